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

// Canonical phase machinery: the phase probability distribution and its
// exponential moments, truncated phase states, Fourier reconstruction of the
// distribution from finitely many sampled probabilities, and the single-shot
// phase POM realized by a symmetric multiport with one reference input.

#include <cmath>
#include <complex>
#include <map>
#include <stdexcept>
#include <utility>
#include <vector>

#include "retroptics/fock.hpp"
#include "retroptics/multiport.hpp"

namespace retroptics {

// A phase density tabulated on [0, 2pi) together with its exponential
// moments alpha_q = integral of P(theta) e^{-iq theta}.
template <typename Real>
struct PhaseDistribution {
  std::vector<Real> grid;
  std::vector<Real> density;
  std::map<int, Complex<Real>> fourier;

  Real integral() const {
    if (grid.size() < 2) return Real(0);
    // Periodic trapezoidal rule on an equally spaced grid.
    Real total = 0;
    for (Real p : density) total += p;
    return total * (Real(2) * pi<Real> / Real(grid.size()));
  }
};

// (N+1)^{-1/2} sum_n e^{in(theta_m + offset)} |n>, theta_m = 2 pi m/(N+1).
template <typename Real>
FockVector<Real> truncated_phase_state(int n_max, int m, Real offset = Real(0)) {
  if (n_max < 0 || m < 0 || m > n_max)
    throw std::invalid_argument("phase state label out of range");
  const Real theta = Real(2) * pi<Real> * Real(m) / Real(n_max + 1) + offset;
  CVector<Real> amps(n_max + 1);
  const Real scale = Real(1) / std::sqrt(Real(n_max + 1));
  for (int n = 0; n <= n_max; ++n)
    amps[n] = scale * std::exp(Complex<Real>{Real(0), Real(n) * theta});
  FockVector<Real> state(std::move(amps));
  state.normalized = true;
  return state;
}

// alpha_q = sum_n rho_{n,n+q} for q = 0..q_max (alpha_{-q} = conj(alpha_q)).
template <typename Real>
std::vector<Complex<Real>> exponential_moments(const DensityMatrix<Real>& rho,
                                               int q_max) {
  if (q_max < 0) throw std::invalid_argument("negative moment order");
  std::vector<Complex<Real>> alpha(q_max + 1, Complex<Real>{Real(0), Real(0)});
  const int dim = rho.dim();
  for (int q = 0; q <= q_max; ++q)
    for (int n = 0; n + q < dim; ++n) alpha[q] += rho.entries(n, n + q);
  return alpha;
}

template <typename Real>
std::vector<Complex<Real>> exponential_moments(const FockVector<Real>& psi,
                                               int q_max) {
  if (q_max < 0) throw std::invalid_argument("negative moment order");
  std::vector<Complex<Real>> alpha(q_max + 1, Complex<Real>{Real(0), Real(0)});
  for (int q = 0; q <= q_max; ++q)
    for (int n = 0; n + q < psi.dim(); ++n)
      alpha[q] += psi.amp(n) * std::conj(psi.amp(n + q));
  return alpha;
}

namespace detail {

// Evaluate P(theta) = (1/2pi) sum_q alpha_q e^{iq theta} on an equally
// spaced grid, given alpha_q for q >= 0.
template <typename Real>
PhaseDistribution<Real> distribution_from_moments(
    const std::vector<Complex<Real>>& alpha, int grid_size) {
  if (grid_size < 2) throw std::invalid_argument("grid too small");
  PhaseDistribution<Real> out;
  out.grid.resize(grid_size);
  out.density.resize(grid_size);
  const int q_max = static_cast<int>(alpha.size()) - 1;
  for (int q = 0; q <= q_max; ++q) {
    out.fourier[q] = alpha[q];
    if (q > 0) out.fourier[-q] = std::conj(alpha[q]);
  }
  for (int k = 0; k < grid_size; ++k) {
    const Real theta = Real(2) * pi<Real> * Real(k) / Real(grid_size);
    out.grid[k] = theta;
    Real p = alpha[0].real();
    for (int q = 1; q <= q_max; ++q)
      p += Real(2) *
           std::real(alpha[q] * std::exp(Complex<Real>{Real(0), Real(q) * theta}));
    out.density[k] = std::max(Real(0), p / (Real(2) * pi<Real>));
  }
  return out;
}

}  // namespace detail

// P(theta) = Tr[rho |theta><theta|] tabulated on `grid_size` points of
// [0, 2pi), with the exponential moments up to the state's cutoff attached.
template <typename Real>
PhaseDistribution<Real> phase_distribution(const DensityMatrix<Real>& rho,
                                           int grid_size = 512) {
  return detail::distribution_from_moments(
      exponential_moments(rho, rho.cutoff), grid_size);
}

template <typename Real>
PhaseDistribution<Real> phase_distribution(const FockVector<Real>& psi,
                                           int grid_size = 512) {
  return detail::distribution_from_moments(
      exponential_moments(psi, psi.cutoff), grid_size);
}

// First and second trigonometric moments of the phase in multiples of
// lambda: means of cos(lambda theta) / sin(lambda theta) and their
// variances via the double-angle identities.
template <typename Real>
struct TrigMoments {
  Real cos_mean{0};
  Real sin_mean{0};
  Real cos_var{0};
  Real sin_var{0};
};

namespace detail {

template <typename Real>
TrigMoments<Real> trig_from_moments(const std::vector<Complex<Real>>& alpha,
                                    int lambda) {
  TrigMoments<Real> out;
  const Complex<Real> a1 = alpha[lambda];
  const Complex<Real> a2 = alpha[2 * lambda];
  out.cos_mean = a1.real();
  out.sin_mean = -a1.imag();
  out.cos_var = Real(0.5) * (Real(1) + a2.real()) - out.cos_mean * out.cos_mean;
  out.sin_var = Real(0.5) * (Real(1) - a2.real()) - out.sin_mean * out.sin_mean;
  return out;
}

}  // namespace detail

template <typename Real>
TrigMoments<Real> trig_moments(const DensityMatrix<Real>& rho, int lambda) {
  if (lambda < 1) throw std::invalid_argument("lambda must be positive");
  return detail::trig_from_moments(exponential_moments(rho, 2 * lambda), lambda);
}

template <typename Real>
TrigMoments<Real> trig_moments(const FockVector<Real>& psi, int lambda) {
  if (lambda < 1) throw std::invalid_argument("lambda must be positive");
  return detail::trig_from_moments(exponential_moments(psi, 2 * lambda), lambda);
}

// The 2N+2 sampled probabilities Pr(gamma_m) = 2 pi P(gamma_m)/(N+1) at the
// equally spaced angles gamma_m = 2 pi m/(2N+2). These are exactly the
// measured-outcome frequencies a phase POM yields at 2N+2 reference-phase
// settings, and they determine P(theta) completely for cutoff <= N.
template <typename Real>
std::vector<std::pair<Real, Real>> sampled_phase_probabilities(
    const DensityMatrix<Real>& rho, int n_max) {
  const int count = 2 * n_max + 2;
  const auto alpha = exponential_moments(rho, rho.cutoff);
  std::vector<std::pair<Real, Real>> samples(count);
  for (int m = 0; m < count; ++m) {
    const Real gamma = Real(2) * pi<Real> * Real(m) / Real(count);
    Real p = alpha[0].real();
    for (int q = 1; q < static_cast<int>(alpha.size()); ++q)
      p += Real(2) *
           std::real(alpha[q] * std::exp(Complex<Real>{Real(0), Real(q) * gamma}));
    samples[m] = {gamma, p / Real(n_max + 1)};
  }
  return samples;
}

template <typename Real>
std::vector<std::pair<Real, Real>> sampled_phase_probabilities(
    const FockVector<Real>& psi, int n_max) {
  return sampled_phase_probabilities(outer_product(psi), n_max);
}

// Rebuild the continuous distribution from the 2N+2 sampled probabilities:
// P(theta) = (1/4pi) sum_{|n|<=N} sum_m e^{in(theta-gamma_m)} Pr(gamma_m).
// Exact for any state truncated at N.
template <typename Real>
PhaseDistribution<Real> reconstruct_distribution(
    const std::vector<std::pair<Real, Real>>& samples, int n_max,
    int grid_size = 512) {
  const int count = 2 * n_max + 2;
  if (static_cast<int>(samples.size()) != count)
    throw std::invalid_argument("expected 2N+2 equally spaced samples");
  for (int m = 0; m < count; ++m) {
    const Real expected = Real(2) * pi<Real> * Real(m) / Real(count);
    if (std::abs(samples[m].first - expected) > Real(1e-9))
      throw std::invalid_argument("expected 2N+2 equally spaced samples");
  }
  std::vector<Complex<Real>> alpha(n_max + 1, Complex<Real>{Real(0), Real(0)});
  for (int q = 0; q <= n_max; ++q) {
    for (int m = 0; m < count; ++m) {
      alpha[q] += Real(0.5) * samples[m].second *
                  std::exp(Complex<Real>{Real(0), -Real(q) * samples[m].first});
    }
  }
  return detail::distribution_from_moments(alpha, grid_size);
}

// Retrodictive signal states of the single-shot phase POM: an (N+1)-port
// symmetric multiport with the signal on input 0, `reference` on input 1 and
// vacuum elsewhere. Outcome m (one photon in every output but m) projects
// the signal onto the returned unnormalized |psi_m>; the measurement
// operator is the rank-one outer product. Reference coefficients beyond N
// never enter and are ignored. With the alternating binomial reference of
// degree N each |psi_m> is proportional to the truncated phase state at
// theta_m = 2 pi m/(N+1).
template <typename Real>
std::vector<FockVector<Real>> single_shot_pom(int n_max,
                                              const FockVector<Real>& reference,
                                              const CMatrix<Real>& u) {
  const int dim = n_max + 1;
  if (u.rows() != dim || u.cols() != dim)
    throw std::invalid_argument("dimension mismatch");
  const CMatrix<Real> dft = dft_matrix<Real>(dim);
  if ((u - dft).cwiseAbs().maxCoeff() > Real(1e-9))
    throw std::invalid_argument("non-DFT U");

  const Real scale = std::pow(Real(dim), -Real(n_max) / Real(2));
  std::vector<FockVector<Real>> states;
  states.reserve(dim);
  for (int m = 0; m < dim; ++m) {
    CVector<Real> amps(dim);
    for (int n = 0; n <= n_max; ++n) {
      const int k = n_max - n;
      const Real angle = -Real(2) * pi<Real> * Real(m) * Real(k) / Real(dim);
      const Complex<Real> phase =
          (k % 2 == 0 ? Real(1) : Real(-1)) *
          std::exp(Complex<Real>{Real(0), angle});
      amps[n] = scale * phase * std::conj(reference.amp(k)) *
                std::sqrt(factorial<Real>(n) * factorial<Real>(k));
    }
    FockVector<Real> state(std::move(amps));
    state.normalized = false;
    states.push_back(std::move(state));
  }
  return states;
}

}  // namespace retroptics
