#pragma once

#include "sgan/smv.hpp"

namespace sgan {

// index into a packed lower-triangular table, 0 <= m <= l
constexpr int tri_index(int l, int m) { return l * (l + 1) / 2 + m; }

// Associated Legendre function with the Condon-Shortley factor. Accepts
// -l <= m <= l and |x| <= 1; grows past double range for large l.
double assoc_legendre(int l, int m, double x);

// Orthonormalized associated Legendre values for all 0 <= m <= l <= max_degree
// at one argument, written to vals[tri_index(l, m)]. Carries the
// sqrt((2l+1)/(4pi) (l-m)!/(l+m)!) factor and no sign alternation, which keeps
// every value finite far past the raw function's overflow point.
void normalized_legendre_table(int max_degree, double x, double* vals);

// real orthonormal spherical harmonic; theta is polar from +z, phi azimuth from +x
double real_sph_harm(int l, int m, double theta, double phi);

// all coeff_count(max_degree) basis values at one direction, lm_index order
void eval_basis_row(int max_degree, double theta, double phi, double* out);

// Equiangular quadrature grid with 2M rows and 2M columns:
// theta_j = pi j / (2M), phi_k = pi k / M, and per-row weights that integrate
// spherical polynomials of degree < M exactly. Radii are zero-initialized.
SphericalGrid dh_grid(int bandlimit);

// quadrature analysis of the grid's radial samples into coefficients up to the
// grid's bandlimit
Smv forward_sht(const SphericalGrid& grid);

// synthesis of the expansion onto the angles of `angles` (its radii are
// ignored); the smv degree and the grid bandlimit may differ
SphericalGrid inverse_sht(const Smv& smv, const SphericalGrid& angles);

// worker threads used by the transforms; results are identical for any setting
void set_sht_threads(int n);
int sht_threads();

}  // namespace sgan
