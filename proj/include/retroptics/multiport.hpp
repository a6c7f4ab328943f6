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

#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include "retroptics/fock.hpp"

// Linear multiport construction and application: two-mode beam-splitter
// elements, DFT multiports, triangular-array decomposition of arbitrary
// unitaries, amplitude-exact multimode evolution, and the non-unitary
// back-action operator of a photon-counting beam splitter.
namespace retroptics {

// Total photon number supported by the exact multimode expansion. sqrt(n!)
// conversions and multinomial growth stay well inside double precision here.
inline constexpr int kPhotonCap = 16;

template <typename Real>
Real wrap_phase(Real x) {
  x = std::fmod(x, 2 * pi<Real>);
  if (x > pi<Real>) x -= 2 * pi<Real>;
  if (x <= -pi<Real>) x += 2 * pi<Real>;
  return x;
}

template <typename Real>
Real unitarity_defect(const CMatrix<Real>& u) {
  return (u.adjoint() * u - CMatrix<Real>::Identity(u.rows(), u.cols()))
      .cwiseAbs()
      .maxCoeff();
}

// One two-mode element of a triangular multiport array. Mixes modes q < p;
// theta sets transmittance t = cos(theta) and reflectance r = sin(theta),
// phi is the input phase on the lower-index (phase-bearing) port.
template <typename Real>
struct BSElement {
  int p = 1;
  int q = 0;
  Real theta = 0;
  Real phi = 0;
};

// Ordered element list with final per-mode output phases delta_n; the
// realized matrix is diag(e^{i delta}) times the elements in list order.
template <typename Real>
struct MultiportPlan {
  int dim = 1;
  std::vector<BSElement<Real>> elements;
  std::vector<Real> output_phases;
};

// Identity except on rows/cols (q, p), where the block is
//   [ e^{i phi} cos(theta)    i sin(theta) ]
//   [ i e^{i phi} sin(theta)  cos(theta)   ].
template <typename Real>
CMatrix<Real> bs_matrix(Real theta, Real phi, int dim, int p, int q) {
  if (q < 0 || p >= dim || q >= p)
    throw std::invalid_argument("beam-splitter modes must satisfy 0 <= q < p < dim");
  CMatrix<Real> m = CMatrix<Real>::Identity(dim, dim);
  const Real c = std::cos(theta), s = std::sin(theta);
  const Complex<Real> eip = std::exp(Complex<Real>(0, phi));
  const Complex<Real> i{0, 1};
  m(q, q) = eip * c;
  m(q, p) = i * s;
  m(p, q) = i * eip * s;
  m(p, p) = c;
  return m;
}

// Per-mode phase shifter diag(e^{i delta_0}, ..., e^{i delta_{dim-1}}).
template <typename Real>
CMatrix<Real> phase_matrix(const std::vector<Real>& deltas) {
  const int dim = int(deltas.size());
  CMatrix<Real> m = CMatrix<Real>::Zero(dim, dim);
  for (int n = 0; n < dim; ++n) m(n, n) = std::exp(Complex<Real>(0, deltas[n]));
  return m;
}

// Entries omega^{nm}/sqrt(dim) with omega = exp(i 2 pi / dim).
template <typename Real>
CMatrix<Real> dft_matrix(int dim) {
  if (dim < 1) throw std::invalid_argument("dimension must be positive");
  CMatrix<Real> m(dim, dim);
  const Real scale = Real(1) / std::sqrt(Real(dim));
  for (int n = 0; n < dim; ++n)
    for (int k = 0; k < dim; ++k)
      m(n, k) = scale * std::exp(Complex<Real>(
                            0, 2 * pi<Real> * Real((n * k) % dim) / Real(dim)));
  return m;
}

template <typename Real>
CMatrix<Real> realize(const MultiportPlan<Real>& plan) {
  CMatrix<Real> u = plan.output_phases.empty()
                        ? CMatrix<Real>::Identity(plan.dim, plan.dim)
                        : phase_matrix(plan.output_phases);
  for (const auto& e : plan.elements)
    u = u * bs_matrix(e.theta, e.phi, plan.dim, e.p, e.q);
  return u;
}

// Triangular-array factorization: peel elements (p, q) with p from the last
// row upward and q below p, each chosen to null the (p, q) entry when the
// element's adjoint is applied on the right; what remains is diagonal and
// becomes the output phases. Elements are stored in realization order
// (ascending p, then ascending q). Degenerate rows (both pivot entries
// negligible) tie-break toward the identity element.
template <typename Real>
MultiportPlan<Real> reck_decompose(const CMatrix<Real>& u) {
  const Real tiny = Real(1e-14);
  if (u.rows() != u.cols()) throw std::invalid_argument("matrix is not square");
  if (unitarity_defect(u) > Real(1e-9))
    throw std::invalid_argument("matrix is not unitary");
  const int dim = int(u.rows());
  CMatrix<Real> v = u;
  MultiportPlan<Real> plan;
  plan.dim = dim;
  for (int p = dim - 1; p >= 1; --p) {
    for (int q = p - 1; q >= 0; --q) {
      const Complex<Real> a = v(p, q), b = v(p, p);
      BSElement<Real> e;
      e.p = p;
      e.q = q;
      if (std::abs(a) < tiny) {
        e.theta = 0;
        e.phi = 0;
      } else {
        e.theta = std::atan2(std::abs(a), std::abs(b));
        e.phi = wrap_phase(std::arg(a) - std::arg(b) - pi<Real> / 2);
      }
      v = v * bs_matrix(e.theta, e.phi, dim, e.p, e.q).adjoint();
      plan.elements.push_back(e);
    }
  }
  std::reverse(plan.elements.begin(), plan.elements.end());
  plan.output_phases.resize(dim);
  for (int n = 0; n < dim; ++n)
    plan.output_phases[n] = wrap_phase(std::arg(v(n, n)));
  return plan;
}

enum class Evolution { forward, backward };

namespace detail {

// Multiply a creation-operator polynomial by (sum_n row[n] x_n)^power,
// dropping monomials whose total degree exceeds the cap.
template <typename Real>
std::map<std::vector<int>, Complex<Real>> multiply_linear_power(
    std::map<std::vector<int>, Complex<Real>> poly,
    const Eigen::Ref<const Eigen::Matrix<Complex<Real>, 1, Eigen::Dynamic>>&
        row,
    int power, int modes, int cap) {
  for (int rep = 0; rep < power; ++rep) {
    std::map<std::vector<int>, Complex<Real>> next;
    for (const auto& [occ, c] : poly) {
      if (total_photons(occ) + 1 > cap) continue;
      for (int n = 0; n < modes; ++n) {
        if (row[n] == Complex<Real>{0}) continue;
        std::vector<int> occ2 = occ;
        occ2[n] += 1;
        next[std::move(occ2)] += c * row[n];
      }
    }
    poly = std::move(next);
  }
  return poly;
}

}  // namespace detail

// Amplitude-exact Schroedinger evolution. Each occupation tuple is rewritten
// as a creation-operator product; mode operators transform linearly
// (forward: by the columns of u; backward: by the conjugated rows, the
// inverse map), and the product is expanded term by term. Photon number is
// conserved exactly.
template <typename Real>
MultimodeState<Real> evolve_multimode(const CMatrix<Real>& u,
                                      const MultimodeState<Real>& state,
                                      Evolution direction) {
  if (int(u.rows()) != state.modes)
    throw std::invalid_argument("mode count does not match matrix dimension");
  const int modes = state.modes;
  // Substitution matrix: creation operator of mode m maps to
  // sum_n subst(m, n) times the creation operator of mode n.
  CMatrix<Real> subst = (direction == Evolution::forward)
                            ? CMatrix<Real>(u.transpose())
                            : CMatrix<Real>(u.conjugate());
  MultimodeState<Real> out;
  out.modes = modes;
  out.total_photon_cap = state.total_photon_cap;
  for (const auto& [occ, amp] : state.terms) {
    const int total = total_photons(occ);
    if (total > kPhotonCap)
      throw std::domain_error("photon cap 16 exceeded");
    Complex<Real> c = amp;
    for (int m = 0; m < modes; ++m) c /= std::sqrt(factorial<Real>(occ[m]));
    std::map<std::vector<int>, Complex<Real>> poly;
    poly[std::vector<int>(modes, 0)] = c;
    for (int m = 0; m < modes; ++m)
      if (occ[m] > 0)
        poly = detail::multiply_linear_power<Real>(std::move(poly),
                                                   subst.row(m), occ[m], modes,
                                                   state.total_photon_cap);
    for (const auto& [occ2, c2] : poly) {
      Complex<Real> a = c2;
      for (int m = 0; m < modes; ++m) a *= std::sqrt(factorial<Real>(occ2[m]));
      out.terms[occ2] += a;
    }
  }
  out.prune(Real(0));
  return out;
}

// Back-action of a beam splitter that transmits the signal (amplitude
// t = cos theta) while its reflected port fires N counts: the non-unitary
// single-mode operator (i r a^dag)^N t^{n} / sqrt(N!), as a matrix taking
// cutoff+1 input amplitudes to cutoff+1 output amplitudes.
template <typename Real>
CMatrix<Real> conditional_bs_backaction(int N, Real theta, int cutoff) {
  if (N < 0) throw std::invalid_argument("negative photon count");
  const Real t = std::cos(theta), r = std::sin(theta);
  const Complex<Real> ir_pow = std::pow(Complex<Real>(0, r), N);
  CMatrix<Real> m = CMatrix<Real>::Zero(cutoff + 1, cutoff + 1);
  for (int n = 0; n + N <= cutoff; ++n)
    m(n + N, n) = ir_pow * std::pow(t, Real(n)) *
                  std::sqrt(binomial_coefficient<Real>(n + N, N));
  return m;
}

template <typename Real>
FockVector<Real> apply_operator(const CMatrix<Real>& op,
                                const FockVector<Real>& v) {
  const int n = std::min<int>(int(op.cols()), v.dim());
  FockVector<Real> out{(op.leftCols(n) * v.amps.head(n)).eval()};
  return out;
}

}  // namespace retroptics
