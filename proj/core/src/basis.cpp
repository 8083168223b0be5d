#include "sgan/basis.hpp"

#include <map>
#include <mutex>
#include <ostream>
#include <stdexcept>

#include "sgan/sh.hpp"

namespace sgan {

BasisMatrix::BasisMatrix(int bandlimit)
    : bandlimit_(bandlimit),
      nodes_(4 * bandlimit * bandlimit),
      coeffs_(sgan::coeff_count(bandlimit)) {
  if (bandlimit < 1) throw std::invalid_argument("BasisMatrix: bandlimit must be >= 1");
  SphericalGrid g = dh_grid(bandlimit);
  std::vector<double> row(std::size_t(coeffs_), 0.0);
  bool wide = bandlimit > 32;
  if (wide)
    d32_.resize(std::size_t(nodes_) * coeffs_);
  else
    d64_.resize(std::size_t(nodes_) * coeffs_);
  for (int j = 0; j < g.rows(); ++j)
    for (int k = 0; k < g.cols(); ++k) {
      eval_basis_row(bandlimit, g.thetas[std::size_t(j)], g.phis[std::size_t(k)], row.data());
      std::size_t base = (std::size_t(j) * g.cols() + std::size_t(k)) * coeffs_;
      for (int c = 0; c < coeffs_; ++c) {
        if (wide)
          d32_[base + std::size_t(c)] = float(row[std::size_t(c)]);
        else
          d64_[base + std::size_t(c)] = row[std::size_t(c)];
      }
    }
}

std::vector<double> BasisMatrix::reconstruct(std::span<const double> coeffs) const {
  if (int(coeffs.size()) != coeffs_)
    throw std::invalid_argument("BasisMatrix::reconstruct: coefficient count mismatch");
  std::vector<double> radii(std::size_t(nodes_), 0.0);
  if (!d64_.empty()) {
    for (int n = 0; n < nodes_; ++n) {
      const double* row = &d64_[std::size_t(n) * coeffs_];
      double s = 0.0;
      for (int c = 0; c < coeffs_; ++c) s += row[c] * coeffs[std::size_t(c)];
      radii[std::size_t(n)] = s;
    }
  } else {
    for (int n = 0; n < nodes_; ++n) {
      const float* row = &d32_[std::size_t(n) * coeffs_];
      double s = 0.0;
      for (int c = 0; c < coeffs_; ++c) s += double(row[c]) * coeffs[std::size_t(c)];
      radii[std::size_t(n)] = s;
    }
  }
  return radii;
}

std::vector<double> BasisMatrix::reconstruct(const Smv& smv) const {
  if (smv.max_degree != bandlimit_)
    throw std::invalid_argument("BasisMatrix::reconstruct: moment vector degree mismatch");
  return reconstruct(std::span<const double>(smv.coeffs));
}

std::vector<double> BasisMatrix::backprop_to_smv(std::span<const double> grad_radii) const {
  if (int(grad_radii.size()) != nodes_)
    throw std::invalid_argument("BasisMatrix::backprop_to_smv: node count mismatch");
  // accumulate node-by-node so the summation order is fixed
  std::vector<double> grad(std::size_t(coeffs_), 0.0);
  if (!d64_.empty()) {
    for (int n = 0; n < nodes_; ++n) {
      const double* row = &d64_[std::size_t(n) * coeffs_];
      double gn = grad_radii[std::size_t(n)];
      for (int c = 0; c < coeffs_; ++c) grad[std::size_t(c)] += row[c] * gn;
    }
  } else {
    for (int n = 0; n < nodes_; ++n) {
      const float* row = &d32_[std::size_t(n) * coeffs_];
      double gn = grad_radii[std::size_t(n)];
      for (int c = 0; c < coeffs_; ++c) grad[std::size_t(c)] += double(row[c]) * gn;
    }
  }
  return grad;
}

void BasisMatrix::dump_checksums(std::ostream& os) const {
  os << "bandlimit " << bandlimit_ << " nodes " << nodes_ << " coeffs " << coeffs_ << "\n";
  for (int n = 0; n < nodes_; ++n) {
    double s = 0.0;
    for (int c = 0; c < coeffs_; ++c) s += entry(n, c);
    os << "row " << n << ' ' << s << "\n";
  }
  for (int c = 0; c < coeffs_; ++c) {
    double s = 0.0;
    for (int n = 0; n < nodes_; ++n) s += entry(n, c);
    os << "col " << c << ' ' << s << "\n";
  }
}

std::shared_ptr<const BasisMatrix> BasisMatrix::get(int bandlimit) {
  static std::mutex mu;
  static std::map<int, std::shared_ptr<const BasisMatrix>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(bandlimit);
  if (it != cache.end()) return it->second;
  auto made = std::make_shared<const BasisMatrix>(bandlimit);
  cache.emplace(bandlimit, made);
  return made;
}

}  // namespace sgan
