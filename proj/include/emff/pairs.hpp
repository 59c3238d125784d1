#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "emff/error.hpp"

namespace emff {

inline constexpr double kBaseFrequency = 20.0 * M_PI;  // rad/s per frequency slot

// Ordered-pair bookkeeping for an n-satellite formation.
//
// Pairs (i, j) with i < j are stacked in the order
// (1,2), (1,3), ..., (1,n), (2,3), ..., (n-1,n), which is the order used for
// the control vector zeta, the columns of B0, and every logged per-pair series.
// Indices are 0-based internally; slot() returns the 1-based frequency
// multiplier nu_ij so that omega_ij = 20*pi*nu_ij and all 2*pi/omega_ij divide
// the common period T = 0.1 s.
class PairTable {
 public:
  explicit PairTable(int n) : n_(n) {
    if (n < 2) throw Error("bad_formation_spec", "need at least 2 satellites");
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) pairs_.emplace_back(i, j);
  }

  int n() const { return n_; }
  int count() const { return static_cast<int>(pairs_.size()); }

  const std::pair<int, int>& pair(int p) const { return pairs_[p]; }

  // 0-based position of pair (i, j) in the stacking; order of i, j irrelevant.
  int index(int i, int j) const {
    if (i > j) std::swap(i, j);
    if (i < 0 || j >= n_ || i == j)
      throw Error("bad_formation_spec", "pair index out of range");
    // pairs (0,*) occupy the first n-1 slots, (1,*) the next n-2, ...
    return i * (2 * n_ - i - 1) / 2 + (j - i - 1);
  }

  // nu_ij = (i-1)(2n-i)/2 + j - i with 1-based i < j; equals index + 1.
  int slot(int p) const { return p + 1; }

  double omega(int p) const { return kBaseFrequency * slot(p); }

  // Least common period of all interaction frequencies.
  double period() const { return 0.1; }

 private:
  int n_;
  std::vector<std::pair<int, int>> pairs_;
};

}  // namespace emff
