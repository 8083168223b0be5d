#pragma once

#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

#include "sgan/smv.hpp"

namespace sgan {

// Dense synthesis operator mapping coefficients to radial samples on the
// dh_grid(bandlimit) nodes, one row per node in grid layout. Stored
// explicitly so reconstruction and its adjoint are plain matrix products.
// Above bandlimit 32 the entries are kept in single precision to bound the
// footprint; products still accumulate in double.
class BasisMatrix {
 public:
  explicit BasisMatrix(int bandlimit);

  int bandlimit() const { return bandlimit_; }
  int node_count() const { return nodes_; }
  int coeff_count() const { return coeffs_; }
  bool single_precision() const { return d64_.empty(); }

  // radii = B * coeffs
  std::vector<double> reconstruct(std::span<const double> coeffs) const;
  std::vector<double> reconstruct(const Smv& smv) const;

  // grad_coeffs = B^T * grad_radii
  std::vector<double> backprop_to_smv(std::span<const double> grad_radii) const;

  // per-row and per-column sums, for comparing builds
  void dump_checksums(std::ostream& os) const;

  // process-wide cache keyed by bandlimit
  static std::shared_ptr<const BasisMatrix> get(int bandlimit);

 private:
  double entry(int node, int coeff) const {
    return d64_.empty() ? double(d32_[std::size_t(node) * coeffs_ + std::size_t(coeff)])
                        : d64_[std::size_t(node) * coeffs_ + std::size_t(coeff)];
  }

  int bandlimit_ = 0;
  int nodes_ = 0;
  int coeffs_ = 0;
  std::vector<double> d64_;
  std::vector<float> d32_;
};

}  // namespace sgan
