#pragma once
// Counter-based random streams built on Philox4x32-10 (Salmon, Moraes,
// Dror, Shaw, "Parallel random numbers: as easy as 1, 2, 3", SC'11).
//
// Every stochastic consumer in the library owns a Stream keyed by
// (master seed, purpose tag, replica, unit). Distinct keys give
// statistically independent streams, and a stream's draws depend only on
// its key and draw index — never on thread scheduling — so any replica of
// any experiment replays bit-identically no matter how work is
// distributed. Keys are hashed into the 64-bit Philox key plus the upper
// 64 counter bits; the lower 64 counter bits enumerate draws.

#include <array>
#include <cmath>
#include <cstdint>

namespace dynssep {

enum class StreamPurpose : uint32_t {
  environment = 1,  // conductance sampling: quenched levels, flip chains
  clocks = 2,       // per-bond Poisson arrows (unit = bond index)
  initial = 3,      // initial occupation sampling (one stream per replica)
  walker = 4,       // per-walker uniformized jump chain (replica = walker id)
  generic = 5,
};

namespace detail {

inline uint64_t mix64(uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace detail

// One Philox4x32-10 block; exposed for the known-answer tests.
inline std::array<uint32_t, 4> philox4x32(std::array<uint32_t, 4> ctr,
                                          std::array<uint32_t, 2> key) {
  constexpr uint32_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
  constexpr uint32_t W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    const uint64_t p0 = uint64_t(M0) * ctr[0];
    const uint64_t p1 = uint64_t(M1) * ctr[2];
    ctr = {uint32_t(p1 >> 32) ^ ctr[1] ^ key[0], uint32_t(p1),
           uint32_t(p0 >> 32) ^ ctr[3] ^ key[1], uint32_t(p0)};
    key[0] += W0;
    key[1] += W1;
  }
  return ctr;
}

class Stream {
 public:
  Stream(uint64_t master_seed, StreamPurpose purpose, uint64_t replica,
         uint64_t unit) {
    uint64_t h = detail::mix64(master_seed ^ 0x6a09e667f3bcc909ull);
    h = detail::mix64(h ^ (uint64_t(purpose) * 0xd6e8feb86659fd93ull));
    h = detail::mix64(h ^ (replica * 0xa0761d6478bd642full));
    h = detail::mix64(h ^ (unit * 0xe7037ed1a0b428dbull));
    const uint64_t c = detail::mix64(h ^ 0x3c6ef372fe94f82bull);
    key_ = {uint32_t(h), uint32_t(h >> 32)};
    ctr_hi_ = {uint32_t(c), uint32_t(c >> 32)};
  }

  uint64_t next_u64() {
    if (avail_ == 0) refill();
    return buf_[--avail_];
  }

  // Uniform on (0,1]; safe under log().
  double uniform_oc() { return double((next_u64() >> 11) + 1) * 0x1.0p-53; }

  // Uniform on [0,1).
  double uniform_co() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double exponential(double rate) { return -std::log(uniform_oc()) / rate; }

  // Uniform integer in {0, ..., n-1}; n is tiny here (bond fan-out), so the
  // floor of n·U is adequate.
  int below(int n) { return int(uniform_co() * n); }

 private:
  void refill() {
    const auto out = philox4x32(
        {uint32_t(draws_), uint32_t(draws_ >> 32), ctr_hi_[0], ctr_hi_[1]},
        key_);
    ++draws_;
    buf_[1] = uint64_t(out[0]) | (uint64_t(out[1]) << 32);
    buf_[0] = uint64_t(out[2]) | (uint64_t(out[3]) << 32);
    avail_ = 2;
  }

  std::array<uint32_t, 2> key_{};
  std::array<uint32_t, 2> ctr_hi_{};
  uint64_t draws_ = 0;
  std::array<uint64_t, 2> buf_{};
  int avail_ = 0;
};

}  // namespace dynssep
