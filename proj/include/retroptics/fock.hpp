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

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <numbers>
#include <stdexcept>
#include <vector>

// Fock-space state construction and algebra: number/coherent/binomial/squeezed
// states on a photon-number cutoff, inner products, sparse multimode states,
// mode projections, and partial traces.
namespace retroptics {

template <typename Real>
using Complex = std::complex<Real>;
template <typename Real>
using CVector = Eigen::Matrix<Complex<Real>, Eigen::Dynamic, 1>;
template <typename Real>
using CMatrix = Eigen::Matrix<Complex<Real>, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Real>
inline constexpr Real pi = std::numbers::pi_v<Real>;

// Exact for the photon numbers this library works with (n <= 170 in double).
template <typename Real>
Real factorial(int n) {
  Real r{1};
  for (int k = 2; k <= n; ++k) r *= Real(k);
  return r;
}

template <typename Real>
Real binomial_coefficient(int n, int k) {
  if (k < 0 || k > n) return Real{0};
  Real r{1};
  for (int j = 1; j <= k; ++j) r = r * Real(n - k + j) / Real(j);
  return r;
}

// Physicists' Hermite polynomial by the three-term recurrence
// H_{n+1}(x) = 2x H_n(x) - 2n H_{n-1}(x); stable for the n <= ~30 used here.
template <typename Real>
Complex<Real> hermite(int n, Complex<Real> x) {
  Complex<Real> hm1{1}, h = Real(2) * x;
  if (n == 0) return hm1;
  for (int k = 1; k < n; ++k) {
    Complex<Real> next = Real(2) * x * h - Real(2 * k) * hm1;
    hm1 = h;
    h = next;
  }
  return h;
}

// Single-mode state truncated at a photon-number cutoff. `amps[n]` is the
// amplitude of |n>. Constructors report the truncated tail mass and set
// `normalized` only when the retained mass is unity within 1e-12.
template <typename Real>
struct FockVector {
  CVector<Real> amps;
  int cutoff = 0;
  bool normalized = false;
  Real tail = Real(0);

  FockVector() : amps(CVector<Real>::Zero(1)) {}
  explicit FockVector(CVector<Real> a)
      : amps(std::move(a)), cutoff(int(amps.size()) - 1) {}

  int dim() const { return cutoff + 1; }
  Complex<Real> amp(int n) const {
    return (n >= 0 && n <= cutoff) ? amps[n] : Complex<Real>{0};
  }
  Real norm2() const { return amps.squaredNorm(); }
};

template <typename Real>
Complex<Real> inner_product(const FockVector<Real>& a,
                            const FockVector<Real>& b) {
  const int n = std::min(a.dim(), b.dim());
  Complex<Real> s{0};
  for (int k = 0; k < n; ++k) s += std::conj(a.amps[k]) * b.amps[k];
  return s;
}

template <typename Real>
FockVector<Real> normalized_copy(const FockVector<Real>& v) {
  FockVector<Real> out = v;
  const Real n = std::sqrt(v.norm2());
  if (n > Real(0)) out.amps /= n;
  out.normalized = true;
  out.tail = Real(0);
  return out;
}

// e^{i n phi} phase shift applied in the number basis.
template <typename Real>
FockVector<Real> phase_shifted(const FockVector<Real>& v, Real phi) {
  FockVector<Real> out = v;
  for (int n = 0; n <= v.cutoff; ++n)
    out.amps[n] *= std::exp(Complex<Real>(0, Real(n) * phi));
  return out;
}

template <typename Real>
FockVector<Real> number_state(int n, int cutoff) {
  if (n < 0 || cutoff < n)
    throw std::invalid_argument("number state outside cutoff");
  FockVector<Real> v{CVector<Real>::Zero(cutoff + 1)};
  v.amps[n] = Real(1);
  v.normalized = true;
  return v;
}

// amps_n = exp(-|alpha|^2/2) alpha^n / sqrt(n!). Truncation is always legal;
// the Poisson tail mass is reported and gates the `normalized` flag.
template <typename Real>
FockVector<Real> coherent_state(Complex<Real> alpha, int cutoff) {
  if (cutoff < 0) throw std::invalid_argument("negative cutoff");
  FockVector<Real> v{CVector<Real>::Zero(cutoff + 1)};
  Complex<Real> term = std::exp(-Real(0.5) * std::norm(alpha));
  for (int n = 0; n <= cutoff; ++n) {
    v.amps[n] = term;
    term *= alpha / std::sqrt(Real(n + 1));
  }
  v.tail = std::max(Real(0), Real(1) - v.norm2());
  v.normalized = v.tail < Real(1e-12);
  return v;
}

// amps_n = 2^{-N/2} (+/-1)^n C(N,n)^{1/2} for n <= N; exactly normalized.
template <typename Real>
FockVector<Real> binomial_state(int N, int cutoff, bool alternating) {
  if (cutoff < N) throw std::invalid_argument("cutoff below binomial degree");
  FockVector<Real> v{CVector<Real>::Zero(cutoff + 1)};
  const Real scale = std::pow(Real(2), -Real(N) / 2);
  for (int n = 0; n <= N; ++n) {
    Real sign = (alternating && (n % 2)) ? Real(-1) : Real(1);
    v.amps[n] = sign * scale * std::sqrt(binomial_coefficient<Real>(N, n));
  }
  v.normalized = true;
  return v;
}

// Squeezed coherent state in the number basis,
//   amps_n = (1-|t|^2)^{1/4} exp{-[|alpha|^2 + t conj(alpha)^2]/2}
//            (t/2)^{n/2} / sqrt(n!) H_n[(alpha + t conj(alpha)) / sqrt(2t)],
// with t = e^{i phi} tanh|zeta|; |t| -> 0 recovers the coherent state. The
// closed form is exactly normalized (Mehler kernel), so `tail` is the honest
// truncation loss.
template <typename Real>
FockVector<Real> squeezed_state(Complex<Real> alpha, Complex<Real> t,
                                int cutoff) {
  if (cutoff < 0) throw std::invalid_argument("negative cutoff");
  if (std::abs(t) >= Real(1)) throw std::invalid_argument("unphysical squeezing");
  if (std::abs(t) == Real(0)) return coherent_state(alpha, cutoff);
  FockVector<Real> v{CVector<Real>::Zero(cutoff + 1)};
  const Complex<Real> x =
      (alpha + t * std::conj(alpha)) / std::sqrt(Real(2) * t);
  const Complex<Real> pref =
      std::pow(Real(1) - std::norm(t), Real(0.25)) *
      std::exp(-Real(0.5) *
               (Complex<Real>(std::norm(alpha)) + t * std::conj(alpha) * std::conj(alpha)));
  const Complex<Real> half_t_root = std::sqrt(t / Real(2));
  Complex<Real> power{1};
  for (int n = 0; n <= cutoff; ++n) {
    v.amps[n] = pref * power / std::sqrt(factorial<Real>(n)) * hermite(n, x);
    power *= half_t_root;
  }
  v.tail = std::max(Real(0), Real(1) - v.norm2());
  v.normalized = v.tail < Real(1e-12);
  return v;
}

// Truncated density operator in the number basis.
template <typename Real>
struct DensityMatrix {
  CMatrix<Real> entries;
  int cutoff = 0;

  DensityMatrix() : entries(CMatrix<Real>::Zero(1, 1)) {}
  explicit DensityMatrix(CMatrix<Real> m)
      : entries(std::move(m)), cutoff(int(entries.rows()) - 1) {
    if (entries.rows() != entries.cols())
      throw std::invalid_argument("density matrix must be square");
  }

  int dim() const { return cutoff + 1; }
  Complex<Real> trace() const { return entries.trace(); }
  Real hermiticity_defect() const {
    return (entries - entries.adjoint()).cwiseAbs().maxCoeff();
  }
};

template <typename Real>
DensityMatrix<Real> outer_product(const FockVector<Real>& v) {
  return DensityMatrix<Real>{(v.amps * v.amps.adjoint()).eval()};
}

// <psi| rho |psi> with zero-padding at mismatched cutoffs.
template <typename Real>
Complex<Real> expectation(const DensityMatrix<Real>& rho,
                          const FockVector<Real>& psi) {
  const int n = std::min(rho.dim(), psi.dim());
  return (psi.amps.head(n).adjoint() * rho.entries.topLeftCorner(n, n) *
          psi.amps.head(n))(0, 0);
}

template <typename Real>
DensityMatrix<Real> phase_shifted(const DensityMatrix<Real>& rho, Real phi) {
  CMatrix<Real> m = rho.entries;
  for (int a = 0; a < rho.dim(); ++a)
    for (int b = 0; b < rho.dim(); ++b)
      m(a, b) *= std::exp(Complex<Real>(0, Real(a - b) * phi));
  return DensityMatrix<Real>{std::move(m)};
}

// Sparse multimode state: occupation tuple -> amplitude. Tuples all have
// length `modes` and total photon number <= total_photon_cap.
template <typename Real>
struct MultimodeState {
  int modes = 0;
  std::map<std::vector<int>, Complex<Real>> terms;
  int total_photon_cap = 16;

  Real norm2() const {
    Real s{0};
    for (const auto& [occ, amp] : terms) s += std::norm(amp);
    return s;
  }
  void prune(Real eps) {
    for (auto it = terms.begin(); it != terms.end();)
      it = (std::abs(it->second) <= eps) ? terms.erase(it) : std::next(it);
  }
};

inline int total_photons(const std::vector<int>& occ) {
  int s = 0;
  for (int n : occ) s += n;
  return s;
}

// |n_0, ..., n_N> with unit amplitude.
template <typename Real>
MultimodeState<Real> fock_pattern_state(const std::vector<int>& occupation,
                                        int total_photon_cap = 16) {
  for (int n : occupation)
    if (n < 0) throw std::invalid_argument("negative occupation");
  MultimodeState<Real> s;
  s.modes = int(occupation.size());
  s.total_photon_cap = std::max(total_photon_cap, total_photons(occupation));
  s.terms[occupation] = Real(1);
  return s;
}

// Tensor product of single-mode states, truncated at the total photon cap
// (cross terms beyond the cap are dropped, consistent with the per-mode
// truncation already present in the factors).
template <typename Real>
MultimodeState<Real> product_state(const std::vector<FockVector<Real>>& f,
                                   int total_photon_cap = 16) {
  MultimodeState<Real> s;
  s.modes = int(f.size());
  s.total_photon_cap = total_photon_cap;
  s.terms[std::vector<int>{}] = Real(1);
  for (const auto& factor : f) {
    std::map<std::vector<int>, Complex<Real>> next;
    for (const auto& [occ, amp] : s.terms) {
      const int used = total_photons(occ);
      for (int n = 0; n <= factor.cutoff && used + n <= total_photon_cap; ++n) {
        if (factor.amps[n] == Complex<Real>{0}) continue;
        std::vector<int> occ2 = occ;
        occ2.push_back(n);
        next[std::move(occ2)] += amp * factor.amps[n];
      }
    }
    s.terms = std::move(next);
  }
  return s;
}

// Contract one mode with <bra|: |..., n_m, ...> -> conj(bra_{n_m}) |...>.
// The result has one fewer mode; remaining modes keep their relative order.
template <typename Real>
MultimodeState<Real> project_mode(const MultimodeState<Real>& s, int mode,
                                  const FockVector<Real>& bra) {
  if (mode < 0 || mode >= s.modes)
    throw std::invalid_argument("mode index out of range");
  MultimodeState<Real> out;
  out.modes = s.modes - 1;
  out.total_photon_cap = s.total_photon_cap;
  for (const auto& [occ, amp] : s.terms) {
    const Complex<Real> w = std::conj(bra.amp(occ[mode]));
    if (w == Complex<Real>{0}) continue;
    std::vector<int> rest;
    rest.reserve(occ.size() - 1);
    for (int i = 0; i < int(occ.size()); ++i)
      if (i != mode) rest.push_back(occ[i]);
    out.terms[std::move(rest)] += w * amp;
  }
  return out;
}

// View a one-mode multimode state as a FockVector.
template <typename Real>
FockVector<Real> single_mode_vector(const MultimodeState<Real>& s) {
  if (s.modes != 1)
    throw std::invalid_argument("state is not single-mode");
  int cutoff = 0;
  for (const auto& [occ, amp] : s.terms) cutoff = std::max(cutoff, occ[0]);
  FockVector<Real> v{CVector<Real>::Zero(cutoff + 1)};
  for (const auto& [occ, amp] : s.terms) v.amps[occ[0]] += amp;
  return v;
}

// Reduced operator on the kept modes (ascending order, first kept mode most
// significant in the flattened index). Trace equals norm^2 of the input.
template <typename Real>
DensityMatrix<Real> partial_trace(const MultimodeState<Real>& s,
                                  const std::vector<int>& keep) {
  if (keep.empty()) throw std::invalid_argument("keep set must be nonempty");
  std::vector<int> kept = keep;
  std::sort(kept.begin(), kept.end());
  for (int m : kept)
    if (m < 0 || m >= s.modes)
      throw std::invalid_argument("mode index out of range");
  std::vector<bool> is_kept(s.modes, false);
  for (int m : kept) is_kept[m] = true;

  std::vector<int> local_dim(kept.size(), 1);
  for (const auto& [occ, amp] : s.terms)
    for (size_t k = 0; k < kept.size(); ++k)
      local_dim[k] = std::max(local_dim[k], occ[kept[k]] + 1);
  long long dim = 1;
  for (int d : local_dim) dim *= d;

  auto flat_index = [&](const std::vector<int>& occ) {
    long long idx = 0;
    for (size_t k = 0; k < kept.size(); ++k)
      idx = idx * local_dim[k] + occ[kept[k]];
    return idx;
  };

  // Group amplitudes by the discarded-mode occupations; each group
  // contributes an outer product on the kept block.
  std::map<std::vector<int>, std::vector<std::pair<long long, Complex<Real>>>>
      groups;
  for (const auto& [occ, amp] : s.terms) {
    std::vector<int> discarded;
    for (int m = 0; m < s.modes; ++m)
      if (!is_kept[m]) discarded.push_back(occ[m]);
    groups[std::move(discarded)].emplace_back(flat_index(occ), amp);
  }

  CMatrix<Real> rho = CMatrix<Real>::Zero(dim, dim);
  for (const auto& [disc, entries] : groups)
    for (const auto& [i, a] : entries)
      for (const auto& [j, b] : entries) rho(i, j) += a * std::conj(b);
  return DensityMatrix<Real>{std::move(rho)};
}

}  // namespace retroptics
