#include "dynssep/lattice.hpp"

#include <cmath>
#include <cstdlib>

#include "dynssep/errors.hpp"
#include "json.hpp"

namespace dynssep {

Torus::Torus(int dim, int length) : dim_(dim), length_(length) {
  if (dim < 1 || dim > 3)
    throw UsageError("torus: dim must be 1, 2 or 3, got " + std::to_string(dim));
  if (length < 2)
    throw UsageError("torus: L must be >= 2, got " + std::to_string(length));
  sites_ = 1;
  for (int i = 0; i < dim_; ++i) sites_ *= length_;
}

std::array<int, 3> Torus::coords(int site) const {
  std::array<int, 3> c{0, 0, 0};
  for (int i = 0; i < dim_; ++i) {
    c[i] = site % length_;
    site /= length_;
  }
  return c;
}

int Torus::site(const std::array<int, 3>& c) const {
  int s = 0;
  for (int i = dim_ - 1; i >= 0; --i) {
    int x = c[i] % length_;
    if (x < 0) x += length_;
    s = s * length_ + x;
  }
  return s;
}

int Torus::shift(int site, int dir, int step) const {
  auto c = coords(site);
  c[dir] += step;
  return this->site(c);
}

std::pair<int, int> Torus::bond_sites(int b) const {
  const int base = bond_base(b);
  return {base, shift(base, bond_dir(b), 1)};
}

std::array<int, 6> Torus::incident_bonds(int site) const {
  std::array<int, 6> out{-1, -1, -1, -1, -1, -1};
  for (int dir = 0; dir < dim_; ++dir) {
    out[2 * dir] = bond(site, dir);
    out[2 * dir + 1] = bond(shift(site, dir, -1), dir);
  }
  return out;
}

std::vector<int> Torus::neighbors(int site) const {
  std::vector<int> out;
  out.reserve(2 * dim_);
  for (int dir = 0; dir < dim_; ++dir) {
    out.push_back(shift(site, dir, 1));
    out.push_back(shift(site, dir, -1));
  }
  return out;
}

int Torus::wrapped_l1(int a, int b) const {
  const auto ca = coords(a), cb = coords(b);
  int d = 0;
  for (int i = 0; i < dim_; ++i) {
    int diff = std::abs(ca[i] - cb[i]);
    d += std::min(diff, length_ - diff);
  }
  return d;
}

std::array<double, 3> Torus::macro(int site) const {
  const auto c = coords(site);
  std::array<double, 3> u{0.0, 0.0, 0.0};
  for (int i = 0; i < dim_; ++i) u[i] = double(c[i]) / length_;
  return u;
}

std::string torus_json(const Torus& t) {
  nlohmann::json j{{"dim", t.dim()}, {"L", t.length()}};
  return j.dump();
}

Torus torus_from_json(const std::string& s) {
  const auto j = nlohmann::json::parse(s);
  return Torus(j.at("dim").get<int>(), j.at("L").get<int>());
}

}  // namespace dynssep
