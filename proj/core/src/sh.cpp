#include "sgan/sh.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <thread>
#include <vector>

#include "sgan/errors.hpp"
#include "sgan/geom.hpp"

namespace sgan {

namespace {

constexpr double kSqrt2 = 1.41421356237309504880;

int g_threads = 1;

// Rows are independent; each worker takes a strided subset and all writes are
// disjoint, so results do not depend on the worker count.
template <class Fn>
void for_rows(int n, const Fn& fn) {
  int nt = std::min(g_threads, n);
  if (nt <= 1) {
    for (int j = 0; j < n; ++j) fn(j);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(std::size_t(nt));
  for (int t = 0; t < nt; ++t)
    pool.emplace_back([&fn, t, n, nt] {
      for (int j = t; j < n; j += nt) fn(j);
    });
  for (auto& th : pool) th.join();
}

void check_lm(int l, int m) {
  if (l < 0 || std::abs(m) > l) throw std::domain_error("assoc_legendre: need |m| <= l, l >= 0");
}

// cos(m phi_k) and sin(m phi_k) tables, m-major
void trig_tables(int max_order, const std::vector<double>& phis, std::vector<double>& ctab,
                 std::vector<double>& stab) {
  std::size_t cols = phis.size();
  ctab.resize(std::size_t(max_order + 1) * cols);
  stab.resize(std::size_t(max_order + 1) * cols);
  for (int m = 0; m <= max_order; ++m)
    for (std::size_t k = 0; k < cols; ++k) {
      ctab[std::size_t(m) * cols + k] = std::cos(m * phis[k]);
      stab[std::size_t(m) * cols + k] = std::sin(m * phis[k]);
    }
}

}  // namespace

void set_sht_threads(int n) { g_threads = std::max(1, n); }

int sht_threads() { return g_threads; }

void normalized_legendre_table(int max_degree, double x, double* vals) {
  if (max_degree < 0) throw std::domain_error("normalized_legendre_table: negative degree");
  if (!(x >= -1.0 && x <= 1.0))
    throw std::domain_error("normalized_legendre_table: argument outside [-1, 1]");
  const double somx2 = std::sqrt((1.0 - x) * (1.0 + x));
  double pmm = 0.28209479177387814347;  // 1 / sqrt(4 pi)
  for (int m = 0; m <= max_degree; ++m) {
    if (m > 0) pmm *= somx2 * std::sqrt((2.0 * m + 1.0) / (2.0 * m));
    vals[tri_index(m, m)] = pmm;
    if (m == max_degree) break;
    double f_prev = std::sqrt(2.0 * m + 3.0);
    double p_prev2 = pmm;
    double p_prev = x * f_prev * pmm;
    vals[tri_index(m + 1, m)] = p_prev;
    for (int l = m + 2; l <= max_degree; ++l) {
      double f = std::sqrt((4.0 * l * l - 1.0) / (double(l) * l - double(m) * m));
      double p = (x * p_prev - p_prev2 / f_prev) * f;
      vals[tri_index(l, m)] = p;
      p_prev2 = p_prev;
      p_prev = p;
      f_prev = f;
    }
  }
}

double assoc_legendre(int l, int m, double x) {
  check_lm(l, m);
  if (!(x >= -1.0 && x <= 1.0)) throw std::domain_error("assoc_legendre: argument outside [-1, 1]");
  int am = std::abs(m);
  std::vector<double> tbl(std::size_t(tri_index(l, l)) + 1);
  normalized_legendre_table(l, x, tbl.data());
  double k = std::sqrt((2.0 * l + 1.0) / (4.0 * kPi)) *
             std::exp(0.5 * (std::lgamma(double(l - am + 1)) - std::lgamma(double(l + am + 1))));
  double val = tbl[std::size_t(tri_index(l, am))] / k;
  if (am % 2 != 0) val = -val;
  if (m < 0) {
    val *= std::exp(std::lgamma(double(l - am + 1)) - std::lgamma(double(l + am + 1)));
    if (am % 2 != 0) val = -val;
  }
  return val;
}

double real_sph_harm(int l, int m, double theta, double phi) {
  check_lm(l, m);
  int am = std::abs(m);
  std::vector<double> tbl(std::size_t(tri_index(l, l)) + 1);
  normalized_legendre_table(l, std::cos(theta), tbl.data());
  double p = tbl[std::size_t(tri_index(l, am))];
  if (m == 0) return p;
  return m > 0 ? kSqrt2 * p * std::cos(am * phi) : kSqrt2 * p * std::sin(am * phi);
}

void eval_basis_row(int max_degree, double theta, double phi, double* out) {
  std::vector<double> tbl(std::size_t(tri_index(max_degree, max_degree)) + 1);
  normalized_legendre_table(max_degree, std::cos(theta), tbl.data());
  for (int l = 0; l <= max_degree; ++l) out[lm_index(l, 0)] = tbl[std::size_t(tri_index(l, 0))];
  for (int m = 1; m <= max_degree; ++m) {
    double c = std::cos(m * phi), s = std::sin(m * phi);
    for (int l = m; l <= max_degree; ++l) {
      double p = kSqrt2 * tbl[std::size_t(tri_index(l, m))];
      out[lm_index(l, m)] = p * c;
      out[lm_index(l, -m)] = p * s;
    }
  }
}

SphericalGrid dh_grid(int bandlimit) {
  if (bandlimit < 1) throw std::invalid_argument("dh_grid: bandlimit must be >= 1");
  const int n = 2 * bandlimit;
  SphericalGrid g;
  g.bandlimit = bandlimit;
  g.thetas.resize(std::size_t(n));
  g.phis.resize(std::size_t(n));
  g.weights.resize(std::size_t(n));
  g.radii.assign(std::size_t(n) * n, 0.0);
  const double scale = 2.0 * kPi / (double(bandlimit) * bandlimit);
  for (int j = 0; j < n; ++j) {
    double th = kPi * j / n;
    g.thetas[std::size_t(j)] = th;
    double s = 0.0;
    for (int p = 0; p < bandlimit; ++p) s += std::sin((2 * p + 1) * th) / (2 * p + 1);
    g.weights[std::size_t(j)] = scale * std::sin(th) * s;
  }
  for (int k = 0; k < n; ++k) g.phis[std::size_t(k)] = kPi * k / bandlimit;
  return g;
}

Smv forward_sht(const SphericalGrid& grid) {
  const int M = grid.bandlimit;
  const int n = grid.rows();
  if (M < 1 || n != 2 * M || grid.cols() != n)
    throw std::invalid_argument("forward_sht: grid shape does not match its bandlimit");
  if (int(grid.weights.size()) != n)
    throw std::invalid_argument("forward_sht: grid is missing quadrature weights");
  if (grid.radii.size() != std::size_t(n) * n)
    throw std::invalid_argument("forward_sht: radii size does not match grid shape");
  for (double r : grid.radii)
    if (!std::isfinite(r)) throw NumericalError("forward_sht: non-finite radial sample");

  std::vector<double> ctab, stab;
  trig_tables(M, grid.phis, ctab, stab);

  const int nc = coeff_count(M);
  std::vector<double> rowsum(std::size_t(n) * nc, 0.0);
  for_rows(n, [&](int j) {
    double* out = &rowsum[std::size_t(j) * nc];
    std::vector<double> tbl(std::size_t(tri_index(M, M)) + 1);
    normalized_legendre_table(M, std::cos(grid.thetas[std::size_t(j)]), tbl.data());
    const double w = grid.weights[std::size_t(j)];
    const double* r = &grid.radii[std::size_t(j) * n];
    std::vector<double> fc(std::size_t(M) + 1), fs(std::size_t(M) + 1);
    for (int m = 0; m <= M; ++m) {
      double sc = 0.0, ss = 0.0;
      const double* c = &ctab[std::size_t(m) * n];
      const double* s = &stab[std::size_t(m) * n];
      for (int k = 0; k < n; ++k) {
        sc += r[k] * c[k];
        ss += r[k] * s[k];
      }
      fc[std::size_t(m)] = sc;
      fs[std::size_t(m)] = ss;
    }
    for (int l = 0; l <= M; ++l)
      out[lm_index(l, 0)] = w * tbl[std::size_t(tri_index(l, 0))] * fc[0];
    for (int m = 1; m <= M; ++m)
      for (int l = m; l <= M; ++l) {
        double p = kSqrt2 * w * tbl[std::size_t(tri_index(l, m))];
        out[lm_index(l, m)] = p * fc[std::size_t(m)];
        out[lm_index(l, -m)] = p * fs[std::size_t(m)];
      }
  });

  // fixed-order reduction over rows keeps the result independent of threading
  Smv out(M);
  for (int j = 0; j < n; ++j) {
    const double* src = &rowsum[std::size_t(j) * nc];
    for (int i = 0; i < nc; ++i) out.coeffs[std::size_t(i)] += src[i];
  }
  return out;
}

SphericalGrid inverse_sht(const Smv& smv, const SphericalGrid& angles) {
  const int rows = angles.rows();
  const int cols = angles.cols();
  if (rows < 1 || cols < 1) throw std::invalid_argument("inverse_sht: grid has no angles");
  const int L = smv.max_degree;
  if (int(smv.coeffs.size()) != coeff_count(L))
    throw std::invalid_argument("inverse_sht: coefficient count does not match max_degree");

  std::vector<double> ctab, stab;
  trig_tables(L, angles.phis, ctab, stab);

  SphericalGrid out = angles;
  out.radii.assign(std::size_t(rows) * cols, 0.0);
  for_rows(rows, [&](int j) {
    std::vector<double> tbl(std::size_t(tri_index(L, L)) + 1);
    normalized_legendre_table(L, std::cos(angles.thetas[std::size_t(j)]), tbl.data());
    std::vector<double> ac(std::size_t(L) + 1, 0.0), as(std::size_t(L) + 1, 0.0);
    for (int l = 0; l <= L; ++l) ac[0] += smv.at(l, 0) * tbl[std::size_t(tri_index(l, 0))];
    for (int m = 1; m <= L; ++m)
      for (int l = m; l <= L; ++l) {
        double p = kSqrt2 * tbl[std::size_t(tri_index(l, m))];
        ac[std::size_t(m)] += smv.at(l, m) * p;
        as[std::size_t(m)] += smv.at(l, -m) * p;
      }
    double* r = &out.radii[std::size_t(j) * cols];
    for (int k = 0; k < cols; ++k) {
      double v = ac[0];
      for (int m = 1; m <= L; ++m)
        v += ac[std::size_t(m)] * ctab[std::size_t(m) * cols + k] +
             as[std::size_t(m)] * stab[std::size_t(m) * cols + k];
      r[k] = v;
    }
  });
  return out;
}

}  // namespace sgan
