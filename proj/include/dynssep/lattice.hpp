#pragma once
// Periodic lattice T_L^d = (Z/LZ)^d with d ∈ {1,2,3}, L ≥ 2, and its bond set.
//
// Sites are row-major indices: site = x0 + L·x1 + L²·x2. Every site owns one
// bond per coordinate direction toward +e_i, so there are exactly d·L^d
// bonds, indexed bond = dir·L^d + base_site with endpoints (base,
// base + e_dir mod L).
//
// L = 2 convention: the wrap makes x + e_i = x − e_i, so the owned bonds of
// the two sites in a column are parallel edges joining the same pair. They
// are kept as distinct bonds (multigraph), `neighbors` always returns 2d
// entries (the same site listed twice when L = 2), and the total swap rate
// between such a pair is the sum over both parallel bonds — exactly the
// projection of the Z^d dynamics onto the torus.
//
// The macroscopic embedding sends site x to x/L ∈ [0,1)^d; the lattice side
// L plays the role of the scale N everywhere in the hydrodynamic surfaces.

#include <array>
#include <string>
#include <utility>
#include <vector>

namespace dynssep {

class Torus {
 public:
  Torus(int dim, int length);

  int dim() const { return dim_; }
  int length() const { return length_; }
  int sites() const { return sites_; }
  int bonds() const { return dim_ * sites_; }

  std::array<int, 3> coords(int site) const;
  int site(const std::array<int, 3>& c) const;  // coordinates reduced mod L

  // site + step·e_dir, wrapped.
  int shift(int site, int dir, int step) const;

  int bond(int base_site, int dir) const { return dir * sites_ + base_site; }
  int bond_base(int b) const { return b % sites_; }
  int bond_dir(int b) const { return b / sites_; }
  std::pair<int, int> bond_sites(int b) const;

  // The 2·dim bonds incident to a site: per direction, the owned bond and
  // the predecessor's. Entries beyond 2·dim are -1.
  std::array<int, 6> incident_bonds(int site) const;

  // 2·dim entries; duplicates when L == 2 (see header comment).
  std::vector<int> neighbors(int site) const;

  // Minimum-image L¹ distance.
  int wrapped_l1(int a, int b) const;

  // x/L componentwise, in [0,1)^d.
  std::array<double, 3> macro(int site) const;

  bool operator==(const Torus& o) const {
    return dim_ == o.dim_ && length_ == o.length_;
  }

 private:
  int dim_;
  int length_;
  int sites_;
};

std::string torus_json(const Torus&);
Torus torus_from_json(const std::string&);

}  // namespace dynssep
