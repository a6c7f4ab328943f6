// Copyright 2026 The Retroptics Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Retrodictive state engineering with a linear multiport and photodetectors.
//
// A target single-mode state reached retrodictively through an (N+1)-port
// device factorizes over the roots of its characteristic polynomial: each
// firing detector pins one root, the coherent reference amplitudes follow by
// inverting the first column of the device unitary, and the preparation
// efficiency is the squared norm of the resulting unnormalized state.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "retroptics/fock.hpp"

namespace retroptics {

// Photon counts n_0..n_N registered by the detectors, one per output port.
struct DetectionPattern {
  std::vector<int> counts;

  int total() const {
    return std::accumulate(counts.begin(), counts.end(), 0);
  }
};

// A fully-solved engineering instance: target state, per-detector roots
// (betas[0] is the constrained root of the undetected/zero-count port 0),
// reference amplitudes alpha_1..alpha_N, and the efficiency figures.
template <typename Real>
struct EngineeredTarget {
  FockVector<Real> psi;
  std::vector<Complex<Real>> betas;
  std::vector<Complex<Real>> alphas;
  Complex<Real> kappa_bar{Real(0), Real(0)};
  Real efficiency{0};
  DetectionPattern pattern;
};

namespace detail {

// Coefficients (ascending) of the characteristic polynomial sum_n psi_n
// z^n / sqrt(n!), trimmed to the highest coefficient that is nonzero
// relative to the largest one.
template <typename Real>
std::vector<Complex<Real>> characteristic_coefficients(
    const FockVector<Real>& psi) {
  Real peak = 0;
  for (int n = 0; n < psi.dim(); ++n) peak = std::max(peak, std::abs(psi.amp(n)));
  if (peak == Real(0)) throw std::invalid_argument("no roots: zero-photon target");
  int degree = -1;
  for (int n = 0; n < psi.dim(); ++n) {
    if (std::abs(psi.amp(n)) > Real(1e-14) * peak) degree = n;
  }
  if (degree < 1) throw std::invalid_argument("no roots: zero-photon target");
  std::vector<Complex<Real>> coeffs(degree + 1);
  for (int n = 0; n <= degree; ++n)
    coeffs[n] = psi.amp(n) / std::sqrt(factorial<Real>(n));
  return coeffs;
}

template <typename Real>
Complex<Real> poly_eval(const std::vector<Complex<Real>>& coeffs,
                        Complex<Real> z) {
  Complex<Real> acc{Real(0), Real(0)};
  for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) acc = acc * z + *it;
  return acc;
}

template <typename Real>
Complex<Real> poly_derivative_eval(const std::vector<Complex<Real>>& coeffs,
                                   Complex<Real> z) {
  Complex<Real> acc{Real(0), Real(0)};
  for (int k = static_cast<int>(coeffs.size()) - 1; k >= 1; --k)
    acc = acc * z + Real(k) * coeffs[k];
  return acc;
}

// Unnormalized coefficients of prod_i (a^dag - conj(betas[i]))^{counts[i]}
// applied to vacuum.
template <typename Real>
CVector<Real> root_product_amps(const std::vector<Complex<Real>>& betas,
                                const std::vector<int>& counts) {
  std::vector<Complex<Real>> poly{Complex<Real>{Real(1), Real(0)}};
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const Complex<Real> root = std::conj(betas[i]);
    for (int rep = 0; rep < counts[i]; ++rep) {
      std::vector<Complex<Real>> next(poly.size() + 1,
                                      Complex<Real>{Real(0), Real(0)});
      for (std::size_t k = 0; k < poly.size(); ++k) {
        next[k] += -root * poly[k];
        next[k + 1] += poly[k];
      }
      poly = std::move(next);
    }
  }
  CVector<Real> amps(poly.size());
  for (std::size_t k = 0; k < poly.size(); ++k)
    amps[static_cast<Eigen::Index>(k)] =
        poly[k] * std::sqrt(factorial<Real>(static_cast<int>(k)));
  return amps;
}

// Euclidean projection onto the simplex {x >= lo, sum x = 1}.
template <typename Real>
std::vector<Real> project_simplex(std::vector<Real> x, Real lo) {
  const int n = static_cast<int>(x.size());
  const Real mass = Real(1) - lo * Real(n);
  std::vector<Real> y(x.size());
  for (int i = 0; i < n; ++i) y[i] = x[i] - lo;
  std::vector<Real> sorted = y;
  std::sort(sorted.begin(), sorted.end(), std::greater<Real>());
  Real running = 0;
  Real theta = 0;
  for (int k = 0; k < n; ++k) {
    running += sorted[k];
    const Real candidate = (running - mass) / Real(k + 1);
    if (sorted[k] - candidate > Real(0)) theta = candidate;
  }
  for (int i = 0; i < n; ++i) x[i] = std::max(Real(0), y[i] - theta) + lo;
  // Repair rounding drift so the constraint holds exactly.
  Real total = std::accumulate(x.begin(), x.end(), Real(0));
  for (auto& xi : x) xi /= total;
  return x;
}

}  // namespace detail

// Roots beta of sum_n psi_n (beta*)^n / sqrt(n!) = 0, with multiplicity,
// ordered by descending imaginary part (ties broken by ascending real part).
// Solved by a companion-matrix eigendecomposition with one Newton polish per
// root; every root is checked by substitution against the normalized target.
template <typename Real>
std::vector<Complex<Real>> characteristic_roots(const FockVector<Real>& psi) {
  const FockVector<Real> unit = normalized_copy(psi);
  auto coeffs = detail::characteristic_coefficients(unit);
  const int degree = static_cast<int>(coeffs.size()) - 1;

  CMatrix<Real> companion = CMatrix<Real>::Zero(degree, degree);
  for (int k = 0; k < degree - 1; ++k) companion(k + 1, k) = Real(1);
  for (int k = 0; k < degree; ++k)
    companion(k, degree - 1) = -coeffs[k] / coeffs[degree];
  Eigen::ComplexEigenSolver<CMatrix<Real>> solver(companion);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("characteristic root solve failed");

  std::vector<Complex<Real>> betas(degree);
  for (int k = 0; k < degree; ++k) {
    Complex<Real> w = solver.eigenvalues()(k);
    const Complex<Real> slope = detail::poly_derivative_eval(coeffs, w);
    if (std::abs(slope) > Real(1e-12))
      w -= detail::poly_eval(coeffs, w) / slope;
    betas[k] = std::conj(w);
  }
  for (const auto& beta : betas) {
    if (std::abs(detail::poly_eval(coeffs, std::conj(beta))) >= Real(1e-8))
      throw std::runtime_error("characteristic root solve failed");
  }
  std::sort(betas.begin(), betas.end(),
            [](const Complex<Real>& a, const Complex<Real>& b) {
              if (a.imag() != b.imag()) return a.imag() > b.imag();
              return a.real() < b.real();
            });
  return betas;
}

template <typename Real>
struct AmplitudeSolution {
  std::vector<Complex<Real>> alphas;
  Complex<Real> beta0;
};

// Given the roots assigned to detectors 1..N and the device unitary, solve
// the constrained port-0 root and the coherent reference amplitudes feeding
// inputs 1..N. Requires a nowhere-vanishing first column.
template <typename Real>
AmplitudeSolution<Real> amplitudes_from_roots(
    const std::vector<Complex<Real>>& betas, const CMatrix<Real>& u) {
  const int dim = static_cast<int>(u.rows());
  if (u.cols() != dim || static_cast<int>(betas.size()) != dim - 1)
    throw std::invalid_argument("dimension mismatch");
  for (int i = 0; i < dim; ++i) {
    if (std::abs(u(i, 0)) < Real(1e-12))
      throw std::domain_error("first-column zero: state unreachable");
  }
  Complex<Real> weighted{Real(0), Real(0)};
  for (int i = 1; i < dim; ++i)
    weighted += std::norm(u(i, 0)) * betas[i - 1];
  const Complex<Real> beta0 = -weighted / std::norm(u(0, 0));

  std::vector<Complex<Real>> full(dim);
  full[0] = beta0;
  for (int i = 1; i < dim; ++i) full[i] = betas[i - 1];

  std::vector<Complex<Real>> alphas(dim - 1);
  Real scale = Real(1);
  for (const auto& b : full) scale = std::max(scale, std::abs(b));
  for (int j = 0; j < dim; ++j) {
    Complex<Real> alpha{Real(0), Real(0)};
    for (int i = 0; i < dim; ++i) alpha -= std::conj(u(i, j)) * u(i, 0) * full[i];
    if (j == 0) {
      if (std::abs(alpha) > Real(1e-10) * scale)
        throw std::runtime_error("reference amplitude solve failed");
    } else {
      alphas[j - 1] = alpha;
    }
  }
  return {std::move(alphas), beta0};
}

// kappa_bar (the amplitude the detection pattern contributes to the factored
// state) and the preparation efficiency P_psi for that pattern.
template <typename Real>
std::pair<Complex<Real>, Real> kappa_and_efficiency(
    const EngineeredTarget<Real>& target, const CMatrix<Real>& u,
    const DetectionPattern& pattern) {
  const int dim = static_cast<int>(u.rows());
  if (u.cols() != dim || static_cast<int>(target.betas.size()) != dim ||
      static_cast<int>(pattern.counts.size()) != dim)
    throw std::invalid_argument("dimension mismatch");

  Real exponent = 0;
  Complex<Real> column_factor{Real(1), Real(0)};
  Real factorials = Real(1);
  for (int i = 0; i < dim; ++i) {
    exponent += std::norm(u(i, 0)) * std::norm(target.betas[i]);
    for (int rep = 0; rep < pattern.counts[i]; ++rep)
      column_factor *= std::conj(u(i, 0));
    factorials *= factorial<Real>(pattern.counts[i]);
  }
  const Complex<Real> kappa_bar =
      std::exp(Real(-0.5) * exponent) * column_factor / std::sqrt(factorials);

  const CVector<Real> amps =
      detail::root_product_amps(target.betas, pattern.counts);
  const Real p_psi = std::norm(kappa_bar) * amps.squaredNorm();
  return {kappa_bar, p_psi};
}

// Unnormalized retrodictive state at input port 0 for coherent references
// alphas on inputs 1..N and photocounts `pattern` on the outputs. Includes
// the full kappa_bar scale, so its squared norm is the preparation
// probability of the pattern.
template <typename Real>
FockVector<Real> engineered_state(const CMatrix<Real>& u,
                                  const std::vector<Complex<Real>>& alphas,
                                  const DetectionPattern& pattern, int cutoff) {
  const int dim = static_cast<int>(u.rows());
  if (u.cols() != dim || static_cast<int>(alphas.size()) != dim - 1 ||
      static_cast<int>(pattern.counts.size()) != dim)
    throw std::invalid_argument("dimension mismatch");
  const int total = pattern.total();
  if (cutoff < total)
    throw std::invalid_argument("cutoff below pattern photon total");

  Real energy = 0;
  for (const auto& a : alphas) energy += std::norm(a);
  Real factorials = Real(1);
  for (int count : pattern.counts) factorials *= factorial<Real>(count);
  const Real scale = std::exp(Real(-0.5) * energy) / std::sqrt(factorials);

  // poly = prod_i (w_i z + c_i)^{n_i} with z the port-0 creation operator.
  std::vector<Complex<Real>> poly{Complex<Real>{Real(1), Real(0)}};
  for (int i = 0; i < dim; ++i) {
    const Complex<Real> w = std::conj(u(i, 0));
    Complex<Real> c{Real(0), Real(0)};
    for (int j = 1; j < dim; ++j) c += std::conj(u(i, j)) * std::conj(alphas[j - 1]);
    for (int rep = 0; rep < pattern.counts[i]; ++rep) {
      std::vector<Complex<Real>> next(poly.size() + 1,
                                      Complex<Real>{Real(0), Real(0)});
      for (std::size_t k = 0; k < poly.size(); ++k) {
        next[k] += c * poly[k];
        next[k + 1] += w * poly[k];
      }
      poly = std::move(next);
    }
  }

  FockVector<Real> state;
  state.amps = CVector<Real>::Zero(cutoff + 1);
  state.cutoff = cutoff;
  state.normalized = false;
  for (int k = 0; k <= total; ++k)
    state.amps[k] = scale * poly[k] * std::sqrt(factorial<Real>(k));
  return state;
}

// Solve a complete engineering instance: factor the target, assign roots to
// the firing detectors in canonical order, recover the constrained port-0
// root and reference amplitudes, and evaluate kappa_bar / P_psi.
template <typename Real>
EngineeredTarget<Real> engineer_target(const FockVector<Real>& psi,
                                       const CMatrix<Real>& u,
                                       const DetectionPattern& pattern) {
  const int dim = static_cast<int>(u.rows());
  if (u.cols() != dim || static_cast<int>(pattern.counts.size()) != dim)
    throw std::invalid_argument("dimension mismatch");
  auto roots = characteristic_roots(psi);
  const int degree = static_cast<int>(roots.size());
  if (pattern.total() != degree)
    throw std::invalid_argument("pattern does not match target degree");
  for (int i = 1; i < dim; ++i) {
    if (pattern.counts[i] < 1)
      throw std::invalid_argument("pattern does not match target degree");
  }

  EngineeredTarget<Real> target;
  target.psi = normalized_copy(psi);
  target.pattern = pattern;
  target.betas.assign(dim, Complex<Real>{Real(0), Real(0)});

  auto cluster_value = [&roots](int offset, int count) {
    Complex<Real> mean{Real(0), Real(0)};
    for (int k = 0; k < count; ++k) mean += roots[offset + k];
    mean /= Real(count);
    for (int k = 0; k < count; ++k) {
      if (std::abs(roots[offset + k] - mean) > Real(1e-6))
        throw std::invalid_argument("pattern multiplicities do not match root clusters");
    }
    return mean;
  };

  if (pattern.counts[0] == 0) {
    int offset = 0;
    std::vector<Complex<Real>> assigned(dim - 1);
    for (int i = 1; i < dim; ++i) {
      assigned[i - 1] = cluster_value(offset, pattern.counts[i]);
      offset += pattern.counts[i];
    }
    auto solution = amplitudes_from_roots(assigned, u);
    target.betas[0] = solution.beta0;
    for (int i = 1; i < dim; ++i) target.betas[i] = assigned[i - 1];
    target.alphas = std::move(solution.alphas);
  } else {
    // Port 0 fires too: one root cluster must coincide with the constrained
    // value implied by the rest. Try each cluster as the port-0 candidate.
    std::vector<Complex<Real>> clusters;
    std::vector<int> cluster_counts;
    int offset = 0;
    for (int i = 0; i < dim; ++i) {
      clusters.push_back(cluster_value(offset, pattern.counts[i]));
      cluster_counts.push_back(pattern.counts[i]);
      offset += pattern.counts[i];
    }
    bool solved = false;
    for (std::size_t pick = 0; pick < clusters.size() && !solved; ++pick) {
      if (cluster_counts[pick] != pattern.counts[0]) continue;
      std::vector<Complex<Real>> rest;
      for (std::size_t k = 0; k < clusters.size(); ++k)
        if (k != pick) rest.push_back(clusters[k]);
      // Remaining clusters must re-expand to the per-detector counts 1..N.
      std::vector<int> rest_counts;
      for (std::size_t k = 0; k < cluster_counts.size(); ++k)
        if (k != pick) rest_counts.push_back(cluster_counts[k]);
      bool counts_match = true;
      for (int i = 1; i < dim; ++i)
        if (rest_counts[i - 1] != pattern.counts[i]) counts_match = false;
      if (!counts_match) continue;
      auto solution = amplitudes_from_roots(rest, u);
      if (std::abs(solution.beta0 - clusters[pick]) <=
          Real(1e-6) * (Real(1) + std::abs(clusters[pick]))) {
        target.betas[0] = solution.beta0;
        for (int i = 1; i < dim; ++i) target.betas[i] = rest[i - 1];
        target.alphas = std::move(solution.alphas);
        solved = true;
      }
    }
    if (!solved)
      throw std::invalid_argument("no consistent root assignment for this pattern");
  }

  auto figures = kappa_and_efficiency(target, u, pattern);
  target.kappa_bar = figures.first;
  target.efficiency = figures.second;
  return target;
}

template <typename Real>
struct FirstColumnOptimum {
  std::vector<Real> x;
  Real p_psi{0};
  Real kkt_residual{0};
  bool feasible{true};
};

namespace detail {

// log |kappa_bar|^2 up to the beta-independent factorial constant, as a
// function of the first-column weights x_i = |U_{i0}|^2. The port-0 root is
// eliminated through the constraint, giving the -|v|^2/x_0 term.
template <typename Real>
struct ColumnObjective {
  const std::vector<Complex<Real>>& betas;
  const std::vector<int>& counts;

  Real value(const std::vector<Real>& x) const {
    const int n = static_cast<int>(betas.size());
    Complex<Real> v{Real(0), Real(0)};
    Real f = 0;
    for (int i = 1; i <= n; ++i) {
      v += x[i] * betas[i - 1];
      f -= x[i] * std::norm(betas[i - 1]);
    }
    f -= std::norm(v) / x[0];
    for (int i = 0; i <= n; ++i)
      if (counts[i] > 0) f += Real(counts[i]) * std::log(x[i]);
    return f;
  }

  std::vector<Real> gradient(const std::vector<Real>& x) const {
    const int n = static_cast<int>(betas.size());
    Complex<Real> v{Real(0), Real(0)};
    for (int i = 1; i <= n; ++i) v += x[i] * betas[i - 1];
    std::vector<Real> g(n + 1);
    g[0] = std::norm(v) / (x[0] * x[0]) + Real(counts[0]) / x[0];
    for (int i = 1; i <= n; ++i) {
      g[i] = -Real(2) * std::real(std::conj(betas[i - 1]) * v) / x[0] -
             std::norm(betas[i - 1]) + Real(counts[i]) / x[i];
    }
    return g;
  }

  Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic> hessian(
      const std::vector<Real>& x) const {
    const int n = static_cast<int>(betas.size());
    Complex<Real> v{Real(0), Real(0)};
    for (int i = 1; i <= n; ++i) v += x[i] * betas[i - 1];
    Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic> h =
        Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>::Zero(n + 1, n + 1);
    h(0, 0) = -Real(2) * std::norm(v) / (x[0] * x[0] * x[0]) -
              Real(counts[0]) / (x[0] * x[0]);
    for (int i = 1; i <= n; ++i) {
      const Real mixed =
          Real(2) * std::real(std::conj(betas[i - 1]) * v) / (x[0] * x[0]);
      h(0, i) = mixed;
      h(i, 0) = mixed;
      for (int k = 1; k <= n; ++k)
        h(i, k) -= Real(2) *
                   std::real(std::conj(betas[i - 1]) * betas[k - 1]) / x[0];
      h(i, i) -= Real(counts[i]) / (x[i] * x[i]);
    }
    return h;
  }
};

}  // namespace detail

// Maximize |kappa_bar|^2 over the first-column weights x_i = |U_{i0}|^2 on
// the simplex, for fixed roots betas (assigned to detectors 1..N) and a
// detection pattern. Projected-gradient ascent finds the basin; an
// equality-constrained Newton polish drives the KKT residual down. Reports
// infeasibility when the optimum pushes a weight to the boundary.
template <typename Real>
FirstColumnOptimum<Real> optimize_first_column(
    const std::vector<Complex<Real>>& betas, const DetectionPattern& pattern) {
  const int n = static_cast<int>(betas.size());
  if (static_cast<int>(pattern.counts.size()) != n + 1)
    throw std::invalid_argument("dimension mismatch");
  detail::ColumnObjective<Real> objective{betas, pattern.counts};
  const Real floor = Real(1e-14);

  std::vector<Real> x(n + 1, Real(1) / Real(n + 1));
  Real fx = objective.value(x);

  // Phase 1: projected-gradient ascent with backtracking.
  Real step = Real(0.1);
  bool stalled = false;
  for (int iter = 0; iter < 500 && !stalled; ++iter) {
    const auto g = objective.gradient(x);
    bool advanced = false;
    for (int attempt = 0; attempt < 40 && !advanced; ++attempt) {
      std::vector<Real> trial(x);
      for (int i = 0; i <= n; ++i) trial[i] += step * g[i];
      trial = detail::project_simplex(trial, floor);
      const Real ft = objective.value(trial);
      if (ft > fx) {
        Real shift = 0;
        for (int i = 0; i <= n; ++i)
          shift = std::max(shift, std::abs(trial[i] - x[i]));
        x = std::move(trial);
        fx = ft;
        step *= Real(1.3);
        advanced = true;
        if (shift < Real(1e-13)) stalled = true;
      } else {
        step *= Real(0.5);
      }
    }
    if (!advanced) break;
  }

  // Phase 2: Newton steps on the equality-constrained KKT system.
  using RealMatrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;
  using RealVector = Eigen::Matrix<Real, Eigen::Dynamic, 1>;
  for (int iter = 0; iter < 60; ++iter) {
    const auto g = objective.gradient(x);
    RealMatrix kkt = RealMatrix::Zero(n + 2, n + 2);
    kkt.topLeftCorner(n + 1, n + 1) = objective.hessian(x);
    for (int i = 0; i <= n; ++i) {
      kkt(i, n + 1) = Real(1);
      kkt(n + 1, i) = Real(1);
    }
    RealVector rhs = RealVector::Zero(n + 2);
    for (int i = 0; i <= n; ++i) rhs[i] = -g[i];
    const RealVector sol = kkt.fullPivLu().solve(rhs);
    if (!sol.allFinite()) break;

    Real t = Real(1);
    bool moved = false;
    for (int attempt = 0; attempt < 50; ++attempt) {
      std::vector<Real> trial(x);
      bool positive = true;
      for (int i = 0; i <= n; ++i) {
        trial[i] += t * sol[i];
        if (trial[i] <= floor) positive = false;
      }
      if (positive) {
        const Real ft = objective.value(trial);
        if (ft >= fx) {
          x = std::move(trial);
          fx = ft;
          moved = true;
          break;
        }
      }
      t *= Real(0.5);
    }
    if (!moved || sol.head(n + 1).norm() < Real(1e-14)) break;
  }

  FirstColumnOptimum<Real> result;
  result.x = x;
  const auto g = objective.gradient(x);
  Real nu = std::accumulate(g.begin(), g.end(), Real(0)) / Real(n + 1);
  Real residual = 0;
  for (int i = 0; i <= n; ++i) residual = std::max(residual, std::abs(g[i] - nu));
  result.kkt_residual = residual;
  result.feasible = std::all_of(x.begin(), x.end(),
                                [](Real xi) { return xi > Real(1e-10); });

  // Full efficiency at the optimum: constrained port-0 root, |kappa_bar|^2,
  // and the squared norm of the factored state.
  Complex<Real> v{Real(0), Real(0)};
  for (int i = 1; i <= n; ++i) v += x[i] * betas[i - 1];
  std::vector<Complex<Real>> full(n + 1);
  full[0] = -v / x[0];
  for (int i = 1; i <= n; ++i) full[i] = betas[i - 1];
  Real exponent = 0;
  Real column = Real(1);
  Real factorials = Real(1);
  for (int i = 0; i <= n; ++i) {
    exponent += x[i] * std::norm(full[i]);
    for (int rep = 0; rep < pattern.counts[i]; ++rep) column *= x[i];
    factorials *= factorial<Real>(pattern.counts[i]);
  }
  const CVector<Real> amps = detail::root_product_amps(full, pattern.counts);
  result.p_psi =
      std::exp(-exponent) * column / factorials * amps.squaredNorm();
  return result;
}

}  // namespace retroptics
