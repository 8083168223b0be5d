#pragma once

#include <cstddef>
#include <vector>

namespace sgan {

// flat index of the degree-l, order-m coefficient; l-major, m runs -l..l
constexpr int lm_index(int l, int m) { return l * l + l + m; }

constexpr int coeff_count(int max_degree) { return (max_degree + 1) * (max_degree + 1); }

// spherical-harmonic moment vector: every real coefficient up to max_degree
struct Smv {
  int max_degree = 0;
  std::vector<double> coeffs;

  Smv() = default;
  explicit Smv(int max_degree_)
      : max_degree(max_degree_), coeffs(std::size_t(coeff_count(max_degree_)), 0.0) {}

  double& at(int l, int m) { return coeffs[std::size_t(lm_index(l, m))]; }
  double at(int l, int m) const { return coeffs[std::size_t(lm_index(l, m))]; }
};

// equiangular grid of radial samples; rows sweep the polar angle, columns the azimuth
struct SphericalGrid {
  int bandlimit = 0;
  std::vector<double> thetas;
  std::vector<double> phis;
  std::vector<double> weights;  // per-row quadrature weights
  std::vector<double> radii;    // rows() * cols(), row-major

  int rows() const { return int(thetas.size()); }
  int cols() const { return int(phis.size()); }
  std::size_t size() const { return radii.size(); }

  double& r(int j, int k) { return radii[std::size_t(j) * phis.size() + std::size_t(k)]; }
  double r(int j, int k) const { return radii[std::size_t(j) * phis.size() + std::size_t(k)]; }
};

}  // namespace sgan
