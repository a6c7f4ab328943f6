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

// Measurement-scheme simulations built on the retrodictive core: the
// two-beam-splitter scheme that projects a signal onto truncated phase
// states, the single 50:50-splitter variant with a two-component reference,
// four-phase extraction of density-matrix elements and trigonometric phase
// moments from photocount probabilities, the four-mode symmetric multiport
// for single-shot phase estimation, photocount degradation/restoration for
// inefficient detectors, and a deterministic Monte Carlo sampler.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <future>
#include <map>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

#include "retroptics/engineer.hpp"
#include "retroptics/fock.hpp"
#include "retroptics/multiport.hpp"

namespace retroptics {

// ---------------------------------------------------------------------------
// Devices and retrodicted signal states
// ---------------------------------------------------------------------------

// Back-evolve a detection pattern through the device and contract every
// ancilla mode with its input state. The result is the (unnormalized)
// signal-mode vector |psi~> for which Pr(pattern) = <psi~| rho_signal |psi~>.
// `ancilla_inputs[j]` is the input of mode j + 1; mode 0 carries the signal.
template <typename Real>
FockVector<Real> retrodicted_signal_state(
    const CMatrix<Real>& u, const DetectionPattern& pattern,
    const std::vector<FockVector<Real>>& ancilla_inputs) {
  const int modes = int(u.rows());
  if (int(pattern.counts.size()) != modes ||
      int(ancilla_inputs.size()) != modes - 1)
    throw std::invalid_argument("dimension mismatch");
  auto state = evolve_multimode(u, fock_pattern_state<Real>(pattern.counts),
                                Evolution::backward);
  for (int m = modes - 1; m >= 1; --m)
    state = project_mode(state, m, ancilla_inputs[m - 1]);
  return single_mode_vector(state);
}

// Two-splitter projection device. The signal enters mode 0, mode 1 carries
// vacuum, and mode 2 carries the coherent reference. The first splitter
// (mixing angle `bs1_theta`) taps the signal into mode 1; the second, fixed
// at 50:50, mixes the transmitted signal with the reference. Photocounters
// watch all three outputs. Free propagation phases are set to zero.
template <typename Real>
CMatrix<Real> double_bs_device(Real bs1_theta) {
  const CMatrix<Real> t1 = bs_matrix<Real>(bs1_theta, Real(0), 3, 1, 0);
  const CMatrix<Real> t2 = bs_matrix<Real>(pi<Real> / 4, Real(0), 3, 2, 0);
  return CMatrix<Real>((t2 * t1).conjugate());
}

// Probability of `pattern` for a signal rho0 entering the two-splitter
// device with a coherent reference alpha * e^{i reference_phase}.
template <typename Real>
Real double_bs_probability(const DensityMatrix<Real>& rho0, Complex<Real> alpha,
                           Real bs1_theta, const DetectionPattern& pattern,
                           Real reference_phase = Real(0)) {
  if (int(pattern.counts.size()) != 3)
    throw std::invalid_argument("dimension mismatch");
  const Complex<Real> ref =
      alpha * std::exp(Complex<Real>(Real(0), reference_phase));
  const std::vector<FockVector<Real>> ancillas{
      number_state<Real>(0, 0), coherent_state<Real>(ref, pattern.total())};
  const auto psi =
      retrodicted_signal_state(double_bs_device(bs1_theta), pattern, ancillas);
  return std::real(expectation(rho0, psi));
}

// Same probability with the reference prepared as an equal mixture of
// `lambda` coherent states whose phases step by 2 pi / lambda. The mixing
// erases reference coherences that are not multiples of lambda while keeping
// the 0 <-> lambda coherence used by the element estimators; lambda = 1
// degenerates to the pure coherent reference.
template <typename Real>
Real double_bs_mixed_probability(const DensityMatrix<Real>& rho0,
                                 Real alpha_mag, Real bs1_theta,
                                 const DetectionPattern& pattern,
                                 Real reference_phase, int lambda) {
  if (lambda < 1) throw std::invalid_argument("lambda must be positive");
  Real sum{0};
  for (int j = 0; j < lambda; ++j)
    sum += double_bs_probability(
        rho0, Complex<Real>(alpha_mag, Real(0)), bs1_theta, pattern,
        reference_phase + Real(2) * pi<Real> * Real(j) / Real(lambda));
  return sum / Real(lambda);
}

// Density matrix of the lambda-component mixed coherent reference at phase
// zero: diagonal-stripe structure with nonzero entries only where the photon
// numbers differ by a multiple of lambda.
template <typename Real>
DensityMatrix<Real> mixed_coherent_reference(Real alpha_mag, int lambda,
                                             int cutoff) {
  if (lambda < 1) throw std::invalid_argument("lambda must be positive");
  DensityMatrix<Real> rho;
  rho.cutoff = cutoff;
  rho.entries = CMatrix<Real>::Zero(cutoff + 1, cutoff + 1);
  for (int j = 0; j < lambda; ++j) {
    const Complex<Real> alpha =
        alpha_mag * std::exp(Complex<Real>(
                        Real(0), Real(2) * pi<Real> * Real(j) / Real(lambda)));
    rho.entries += outer_product(coherent_state<Real>(alpha, cutoff)).entries /
                   Real(lambda);
  }
  return rho;
}

// Single 50:50-splitter device: signal in mode 0, the two-component
// reference in mode 1, photocounters on both outputs.
template <typename Real>
CMatrix<Real> sv_device() {
  return CMatrix<Real>(bs_matrix<Real>(pi<Real> / 4, Real(0), 2, 1, 0).conjugate());
}

// Two-component reference (|0> + e^{i lambda theta} |lambda>) / sqrt(2).
template <typename Real>
FockVector<Real> sv_reference(int lambda, Real theta) {
  if (lambda < 1) throw std::invalid_argument("lambda must be positive");
  CVector<Real> amps = CVector<Real>::Zero(lambda + 1);
  const Real root_half = Real(1) / std::sqrt(Real(2));
  amps[0] = root_half;
  amps[lambda] =
      root_half * std::exp(Complex<Real>(Real(0), Real(lambda) * theta));
  FockVector<Real> v{std::move(amps)};
  v.normalized = true;
  return v;
}

// Probability of `pattern` for a signal rho0 on the single-splitter device
// with the two-component reference at phase theta.
template <typename Real>
Real sv_probability(const DensityMatrix<Real>& rho0, int lambda, Real theta,
                    const DetectionPattern& pattern) {
  if (int(pattern.counts.size()) != 2)
    throw std::invalid_argument("dimension mismatch");
  const std::vector<FockVector<Real>> ancillas{sv_reference<Real>(lambda, theta)};
  const auto psi = retrodicted_signal_state(sv_device<Real>(), pattern, ancillas);
  return std::real(expectation(rho0, psi));
}

// ---------------------------------------------------------------------------
// Four-phase element and moment estimators
// ---------------------------------------------------------------------------

enum class ElementScheme { double_bs, steuernagel_vaccaro };

// Static description of an element-extraction run: the scheme, the first
// splitter's mixing angle and coherent reference magnitude (two-splitter
// scheme only), and the photocount assigned to detector 0. n0 = -1 picks the
// default: count (lambda + 1) / 2 for the two-splitter scheme, the count
// with the largest scaling factor for the single-splitter scheme.
template <typename Real>
struct EstimatorDesign {
  ElementScheme scheme = ElementScheme::double_bs;
  Real bs1_theta = pi<Real> / 4;
  Real alpha_mag = Real(1) / std::sqrt(Real(2));
  int n0 = -1;
};

// The four reference phases q * pi / (2 lambda), q = 0..3, combined with
// weights (1, -i, -1, i) to isolate rho_{N, N+lambda}.
template <typename Real>
std::array<Real, 4> element_phases(int lambda) {
  if (lambda < 1) throw std::invalid_argument("lambda must be positive");
  std::array<Real, 4> phases{};
  for (int q = 0; q < 4; ++q)
    phases[size_t(q)] = Real(q) * pi<Real> / (Real(2) * Real(lambda));
  return phases;
}

namespace detail {

// Amplitudes of |n_level, lambda> and |n_level + lambda, 0> in the
// back-evolved two-mode pattern state: the pair whose product scales the
// element extracted by the single-splitter scheme.
template <typename Real>
std::pair<Complex<Real>, Complex<Real>> sv_z_pair(int n0, int n1, int n_level,
                                                  int lambda) {
  const auto state = evolve_multimode(
      sv_device<Real>(), fock_pattern_state<Real>({n0, n1}), Evolution::backward);
  Complex<Real> z_n{}, z_nl{};
  if (auto it = state.terms.find({n_level, lambda}); it != state.terms.end())
    z_n = it->second;
  if (auto it = state.terms.find({n_level + lambda, 0}); it != state.terms.end())
    z_nl = it->second;
  return {z_n, z_nl};
}

template <typename Real>
int resolve_n0(const EstimatorDesign<Real>& design, int n_level, int lambda) {
  if (design.n0 >= 0) return design.n0;
  if (design.scheme == ElementScheme::double_bs) return (lambda + 1) / 2;
  int best = -1;
  Real best_mag = Real(0);
  for (int n0 = 0; n0 <= n_level + lambda; ++n0) {
    const auto [z_n, z_nl] =
        sv_z_pair<Real>(n0, n_level + lambda - n0, n_level, lambda);
    const Real mag = std::abs(std::conj(z_n) * z_nl);
    if (mag > best_mag) {
      best_mag = mag;
      best = n0;
    }
  }
  if (best < 0) throw std::domain_error("zero scaling factor");
  return best;
}

}  // namespace detail

// Detection pattern measured for the element rho_{n_level, n_level+lambda}:
// (n0, n_level, lambda - n0) on the two-splitter device,
// (n0, n_level + lambda - n0) on the single-splitter device.
template <typename Real>
DetectionPattern element_pattern(const EstimatorDesign<Real>& design,
                                 int n_level, int lambda) {
  if (lambda < 1) throw std::invalid_argument("lambda must be positive");
  if (n_level < 0) throw std::invalid_argument("negative photon count");
  const int n0 = detail::resolve_n0(design, n_level, lambda);
  if (design.scheme == ElementScheme::double_bs) {
    if (n0 > lambda)
      throw std::invalid_argument("detector-0 count exceeds the coherence order");
    return DetectionPattern{{n0, n_level, lambda - n0}};
  }
  if (n0 > n_level + lambda)
    throw std::invalid_argument("detector-0 count exceeds the pattern total");
  return DetectionPattern{{n0, n_level + lambda - n0}};
}

// Divisor s in rho_{N, N+lambda} = sum_q w_q Pr_q / s over the four
// reference phases. Throws when the chosen pattern has a vanishing scaling
// factor (destructive interference makes the element unrecoverable there).
template <typename Real>
Complex<Real> element_scaling(const EstimatorDesign<Real>& design, int n_level,
                              int lambda) {
  if (lambda < 1) throw std::invalid_argument("lambda must be positive");
  if (n_level < 0) throw std::invalid_argument("negative photon count");
  const int n0 = detail::resolve_n0(design, n_level, lambda);
  Complex<Real> scaling;
  if (design.scheme == ElementScheme::double_bs) {
    const Real t = std::cos(design.bs1_theta);
    const Real r = std::sin(design.bs1_theta);
    const Real a0 = std::exp(-design.alpha_mag * design.alpha_mag / Real(2));
    const Real al = a0 * std::pow(design.alpha_mag, Real(lambda)) /
                    std::sqrt(factorial<Real>(lambda));
    const Complex<Real> splitter_pair =
        std::pow(Complex<Real>(Real(0), Real(-0.5)), lambda) *
        Real(n0 % 2 == 0 ? 1 : -1) * binomial_coefficient<Real>(lambda, n0);
    const Complex<Real> sigma =
        std::pow(r, Real(2 * n_level)) * std::pow(t, Real(lambda)) *
        splitter_pair * a0 * al *
        std::sqrt(binomial_coefficient<Real>(n_level + lambda, lambda));
    scaling = Real(4) * std::conj(sigma);
  } else {
    const auto [z_n, z_nl] =
        detail::sv_z_pair<Real>(n0, n_level + lambda - n0, n_level, lambda);
    scaling = Real(2) * std::conj(z_n) * z_nl;
  }
  if (std::abs(scaling) < Real(1e-14))
    throw std::domain_error("zero scaling factor");
  return scaling;
}

// One measured photocount probability at one reference phase.
template <typename Real>
struct MeasuredProbability {
  DetectionPattern pattern;
  Real reference_phase = Real(0);
  Real probability = Real(0);
};

// rho_{n_level, n_level+lambda} from the four probabilities at the phases
// returned by element_phases, in that order.
template <typename Real>
Complex<Real> density_matrix_element(const std::array<Real, 4>& probabilities,
                                     const EstimatorDesign<Real>& design,
                                     int n_level, int lambda) {
  const Complex<Real> scaling = element_scaling(design, n_level, lambda);
  const Complex<Real> i{Real(0), Real(1)};
  const Complex<Real> numerator = probabilities[0] - i * probabilities[1] -
                                  probabilities[2] + i * probabilities[3];
  return numerator / scaling;
}

namespace detail {

template <typename Real>
std::array<Real, 4> four_phase_probabilities(
    const std::vector<MeasuredProbability<Real>>& data,
    const DetectionPattern& pattern, int lambda) {
  const auto phases = element_phases<Real>(lambda);
  std::array<Real, 4> out{};
  for (int q = 0; q < 4; ++q) {
    bool found = false;
    for (const auto& record : data) {
      if (record.pattern.counts == pattern.counts &&
          std::abs(record.reference_phase - phases[size_t(q)]) < Real(1e-9)) {
        out[size_t(q)] = record.probability;
        found = true;
        break;
      }
    }
    if (!found) throw std::invalid_argument("missing phase setting");
  }
  return out;
}

}  // namespace detail

// rho_{n_level, n_level+lambda} looked up from a measured-probability table.
template <typename Real>
Complex<Real> density_matrix_element(
    const std::vector<MeasuredProbability<Real>>& data,
    const EstimatorDesign<Real>& design, int n_level, int lambda) {
  const DetectionPattern pattern = element_pattern(design, n_level, lambda);
  return density_matrix_element(
      detail::four_phase_probabilities(data, pattern, lambda), design, n_level,
      lambda);
}

// <cos(lambda theta)> and <sin(lambda theta)> estimated from measured
// four-phase probabilities: sum the element estimates rho_{N, N+lambda} over
// N = 0..n_max and read off (Re, -Im) of the total.
template <typename Real>
std::pair<Real, Real> estimate_trig_moment(
    const std::vector<MeasuredProbability<Real>>& data, int lambda, int n_max,
    const EstimatorDesign<Real>& design) {
  if (lambda < 1) throw std::invalid_argument("lambda must be positive");
  Complex<Real> total{};
  for (int n = 0; n <= n_max; ++n)
    total += density_matrix_element(data, design, n, lambda);
  return {std::real(total), -std::imag(total)};
}

// Exact measured-probability table for a known signal: every level
// N = 0..n_max at the four reference phases. The two-splitter scheme uses
// the lambda-component mixed reference (pure coherent when lambda = 1).
template <typename Real>
std::vector<MeasuredProbability<Real>> exact_estimator_probabilities(
    const DensityMatrix<Real>& rho0, const EstimatorDesign<Real>& design,
    int lambda, int n_max) {
  const auto phases = element_phases<Real>(lambda);
  std::vector<MeasuredProbability<Real>> table;
  table.reserve(size_t(4 * (n_max + 1)));
  for (int n = 0; n <= n_max; ++n) {
    const DetectionPattern pattern = element_pattern(design, n, lambda);
    for (const Real phase : phases) {
      Real probability;
      if (design.scheme == ElementScheme::double_bs)
        probability = double_bs_mixed_probability(
            rho0, design.alpha_mag, design.bs1_theta, pattern, phase, lambda);
      else
        probability = sv_probability(rho0, lambda, phase, pattern);
      table.push_back({pattern, phase, probability});
    }
  }
  return table;
}

// ---------------------------------------------------------------------------
// Four-mode symmetric multiport
// ---------------------------------------------------------------------------

// Mode map of the symmetric four-port used for single-shot phase estimation:
// the discrete Fourier matrix of dimension 4. The tests verify it is
// realizable, up to output phases, as four 50:50 splitters plus fixed phase
// shifters and an input relabeling.
template <typename Real>
CMatrix<Real> eight_port_matrix() {
  return dft_matrix<Real>(4);
}

// ---------------------------------------------------------------------------
// Detector efficiency transforms
// ---------------------------------------------------------------------------

enum class DetectorDirection { ideal_to_counts, counts_to_ideal };

template <typename Real>
struct TransformedDistribution {
  std::vector<Real> probabilities;
  Real amplification = Real(1);
  bool ill_conditioned = false;
};

namespace detail {

template <typename Real>
void check_efficiency(Real eta) {
  if (!(eta > Real(0)) || eta > Real(1))
    throw std::domain_error("efficiency must lie in (0, 1]");
}

constexpr double kAmplificationLimit = 1e6;

}  // namespace detail

// Photocount statistics of one detector at efficiency eta, where each photon
// registers independently with probability eta. ideal_to_counts maps true
// photon-number probabilities to registered-count probabilities (exactly
// total-preserving); counts_to_ideal inverts it with alternating weights
// that grow like eta^{-m}, truncated at n_max and flagged as ill conditioned
// when the amplification is extreme.
template <typename Real>
TransformedDistribution<Real> detector_transform(const std::vector<Real>& dist,
                                                 Real eta,
                                                 DetectorDirection direction,
                                                 int n_max = 12) {
  detail::check_efficiency(eta);
  const int size = int(dist.size());
  TransformedDistribution<Real> out;
  out.probabilities.assign(size_t(size), Real(0));
  if (direction == DetectorDirection::ideal_to_counts) {
    for (int n = 0; n < size; ++n)
      for (int m = 0; m <= n; ++m)
        out.probabilities[size_t(m)] += dist[size_t(n)] *
                                        binomial_coefficient<Real>(n, m) *
                                        std::pow(Real(1) - eta, Real(n - m)) *
                                        std::pow(eta, Real(m));
  } else {
    const int top = std::min(size - 1, n_max);
    for (int m = 0; m <= top; ++m) {
      const Real inverse_weight = std::pow(eta, Real(-m));
      for (int n = 0; n <= m; ++n)
        out.probabilities[size_t(n)] += dist[size_t(m)] *
                                        binomial_coefficient<Real>(m, n) *
                                        std::pow(eta - Real(1), Real(m - n)) *
                                        inverse_weight;
    }
    out.amplification = std::pow(eta, Real(-top));
    out.ill_conditioned = out.amplification > Real(detail::kAmplificationLimit);
  }
  return out;
}

template <typename Real>
struct TransformedPatternDistribution {
  std::map<std::vector<int>, Real> probabilities;
  Real amplification = Real(1);
  bool ill_conditioned = false;
};

// Independent per-detector transform of a joint pattern distribution. The
// inverse skips source patterns with any count above n_max; its reported
// amplification is eta^{-T} for the largest retained pattern total T.
template <typename Real>
TransformedPatternDistribution<Real> joint_detector_transform(
    const std::map<std::vector<int>, Real>& dist, Real eta,
    DetectorDirection direction, int n_max = 12) {
  detail::check_efficiency(eta);
  const bool forward = direction == DetectorDirection::ideal_to_counts;
  TransformedPatternDistribution<Real> out;
  int worst_total = 0;
  for (const auto& [source, weight] : dist) {
    if (!forward) {
      if (std::any_of(source.begin(), source.end(),
                      [n_max](int c) { return c > n_max; }))
        continue;
      worst_total = std::max(worst_total, total_photons(source));
    }
    std::map<std::vector<int>, Real> partial;
    partial.emplace(std::vector<int>{}, weight);
    for (const int count : source) {
      std::map<std::vector<int>, Real> next;
      for (const auto& [head, value] : partial) {
        for (int m = 0; m <= count; ++m) {
          const Real factor =
              forward ? binomial_coefficient<Real>(count, m) *
                            std::pow(Real(1) - eta, Real(count - m)) *
                            std::pow(eta, Real(m))
                      : binomial_coefficient<Real>(count, m) *
                            std::pow(eta - Real(1), Real(count - m)) *
                            std::pow(eta, Real(-count));
          std::vector<int> key = head;
          key.push_back(m);
          next[std::move(key)] += value * factor;
        }
      }
      partial = std::move(next);
    }
    for (const auto& [pattern, value] : partial)
      out.probabilities[pattern] += value;
  }
  if (!forward) {
    out.amplification = std::pow(eta, Real(-worst_total));
    out.ill_conditioned = out.amplification > Real(detail::kAmplificationLimit);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Deterministic Monte Carlo sampling
// ---------------------------------------------------------------------------

inline constexpr int kSampleWorkers = 8;

template <typename Real>
struct CountRecord {
  DetectionPattern pattern;
  long long count = 0;
  Real probability = Real(0);
};

// One simulated run: the device, one input state per mode, the signal and
// reference mode indices, the detector efficiency applied to the sampled
// distribution, the reference phase offsets to scan, and the trial count per
// setting. Identical configs with identical seeds reproduce identical counts
// on every platform.
template <typename Real>
struct ExperimentConfig {
  CMatrix<Real> unitary;
  std::vector<FockVector<Real>> inputs;
  int signal_mode = 0;
  int reference_mode = 1;
  Real detector_efficiency = Real(1);
  std::vector<Real> phase_settings{Real(0)};
  long long trials = 0;
  std::uint64_t seed = 0;
  int total_photon_cap = kPhotonCap;
};

namespace detail {

template <typename Real>
void validate_config(const ExperimentConfig<Real>& config) {
  const int modes = int(config.inputs.size());
  if (config.unitary.rows() != config.unitary.cols() ||
      int(config.unitary.rows()) != modes)
    throw std::invalid_argument("mode count does not match matrix dimension");
  check_efficiency(config.detector_efficiency);
  if (config.signal_mode < 0 || config.signal_mode >= modes ||
      config.reference_mode < 0 || config.reference_mode >= modes)
    throw std::invalid_argument("mode index out of range");
  if (config.signal_mode == config.reference_mode)
    throw std::invalid_argument("signal and reference modes must differ");
  if (config.trials < 0) throw std::invalid_argument("negative trial count");
  if (config.phase_settings.empty())
    throw std::invalid_argument("at least one phase setting required");
}

inline std::mt19937_64 seeded_engine(std::uint64_t seed, int setting,
                                     int worker) {
  std::seed_seq seq{std::uint32_t(seed), std::uint32_t(seed >> 32),
                    std::uint32_t(setting), std::uint32_t(worker)};
  return std::mt19937_64(seq);
}

// Counts per cumulative slot plus a final overflow slot for draws beyond the
// captured probability mass. Trials are split over a fixed number of
// workers, each with its own deterministically seeded generator, so merged
// totals do not depend on scheduling.
template <typename Real>
std::vector<long long> sample_counts(const std::vector<Real>& cumulative,
                                     long long trials, std::uint64_t seed,
                                     int setting) {
  const auto run_worker = [&cumulative](std::mt19937_64 rng, long long n) {
    std::vector<long long> counts(cumulative.size() + 1, 0);
    for (long long t = 0; t < n; ++t) {
      const Real u = Real((rng() >> 11) * 0x1.0p-53);
      const auto it =
          std::upper_bound(cumulative.begin(), cumulative.end(), u);
      counts[size_t(it - cumulative.begin())] += 1;
    }
    return counts;
  };
  std::vector<std::future<std::vector<long long>>> futures;
  futures.reserve(kSampleWorkers);
  for (int w = 0; w < kSampleWorkers; ++w) {
    const long long share =
        trials / kSampleWorkers + (w < trials % kSampleWorkers ? 1 : 0);
    futures.push_back(std::async(std::launch::async, run_worker,
                                 seeded_engine(seed, setting, w), share));
  }
  std::vector<long long> total(cumulative.size() + 1, 0);
  for (auto& future : futures) {
    const auto part = future.get();
    for (size_t i = 0; i < total.size(); ++i) total[i] += part[i];
  }
  return total;
}

}  // namespace detail

// Exact joint photocount distribution of independent mode inputs sent
// through the device: forward-evolve the product state and collect
// |amplitude|^2 per output occupation pattern. Truncation at the total
// photon cap drops only the high-photon tail of the inputs.
template <typename Real>
std::map<std::vector<int>, Real> joint_pattern_probabilities(
    const CMatrix<Real>& u, const std::vector<FockVector<Real>>& inputs,
    int total_photon_cap = kPhotonCap) {
  const auto evolved = evolve_multimode(
      u, product_state(inputs, total_photon_cap), Evolution::forward);
  std::map<std::vector<int>, Real> probabilities;
  for (const auto& [occupation, amplitude] : evolved.terms)
    probabilities[occupation] += std::norm(amplitude);
  return probabilities;
}

template <typename Real>
struct SettingResult {
  Real phase = Real(0);
  long long trials = 0;
  long long overflow = 0;
  std::vector<CountRecord<Real>> records;  // lexicographic pattern order
};

template <typename Real>
struct MonteCarloResult {
  std::vector<SettingResult<Real>> settings;
};

// Sample photocount patterns from the exact joint distribution, degraded by
// the detector efficiency when it is below one, for every reference phase
// setting. Each record carries the analytic probability actually sampled;
// draws landing beyond the truncated mass are tallied as overflow.
template <typename Real>
MonteCarloResult<Real> monte_carlo(const ExperimentConfig<Real>& config) {
  detail::validate_config(config);
  MonteCarloResult<Real> result;
  result.settings.reserve(config.phase_settings.size());
  for (int setting = 0; setting < int(config.phase_settings.size());
       ++setting) {
    const Real offset = config.phase_settings[size_t(setting)];
    auto inputs = config.inputs;
    inputs[size_t(config.reference_mode)] =
        phase_shifted(inputs[size_t(config.reference_mode)], offset);
    auto probabilities = joint_pattern_probabilities(config.unitary, inputs,
                                                     config.total_photon_cap);
    if (config.detector_efficiency < Real(1))
      probabilities =
          joint_detector_transform(probabilities, config.detector_efficiency,
                                   DetectorDirection::ideal_to_counts)
              .probabilities;
    std::vector<std::pair<std::vector<int>, Real>> ordered(
        probabilities.begin(), probabilities.end());
    std::vector<Real> cumulative;
    cumulative.reserve(ordered.size());
    Real running{0};
    for (const auto& [occupation, probability] : ordered) {
      running += probability;
      cumulative.push_back(running);
    }
    const auto counts =
        detail::sample_counts(cumulative, config.trials, config.seed, setting);
    SettingResult<Real> outcome;
    outcome.phase = offset;
    outcome.trials = config.trials;
    outcome.overflow = counts.back();
    outcome.records.reserve(ordered.size());
    for (size_t i = 0; i < ordered.size(); ++i)
      outcome.records.push_back(
          {DetectionPattern{ordered[i].first}, counts[i], ordered[i].second});
    result.settings.push_back(std::move(outcome));
  }
  return result;
}

// ---------------------------------------------------------------------------
// Single-shot phase histograms
// ---------------------------------------------------------------------------

template <typename Real>
struct PhaseHistogramRow {
  Real theta = Real(0);
  Real density_empirical = Real(0);
  Real density_stderr = Real(0);
  Real density_analytic = Real(0);
  Real density_canonical = Real(0);
  long long count = 0;     // accepted events for this pattern
  long long accepted = 0;  // all accepted events in the same setting
};

// Canonical phase density of a pure state:
// |sum_n psi_n e^{-i n theta}|^2 / (2 pi).
template <typename Real>
Real canonical_phase_density(const FockVector<Real>& psi, Real theta) {
  Complex<Real> sum{};
  for (int n = 0; n < psi.dim(); ++n)
    sum += psi.amps[n] * std::exp(Complex<Real>(Real(0), -Real(n) * theta));
  return std::norm(sum) / (Real(2) * pi<Real>);
}

// Histogram of the single-shot phase measurement on a D-mode device: one
// sampled run per reference phase offset, accepting the D patterns with one
// photon in every output but one. The empty output labels the estimate
// 2 pi m / D + offset. Densities renormalize the accepted-pattern weights to
// a distribution on [0, 2 pi); the standard error is the binomial error of
// the renormalized fraction given the accepted-event count. With
// correct_efficiency the inverse detector transform is applied to the
// empirical (and analytic) pattern frequencies before renormalizing.
template <typename Real>
std::vector<PhaseHistogramRow<Real>> pom_phase_histogram(
    const ExperimentConfig<Real>& config, bool correct_efficiency = false) {
  detail::validate_config(config);
  const int modes = int(config.inputs.size());
  if (modes < 2) throw std::invalid_argument("dimension mismatch");
  std::vector<std::vector<int>> pom_patterns;
  pom_patterns.reserve(size_t(modes));
  for (int m = 0; m < modes; ++m) {
    std::vector<int> pattern(size_t(modes), 1);
    pattern[size_t(m)] = 0;
    pom_patterns.push_back(std::move(pattern));
  }
  const Real two_pi = Real(2) * pi<Real>;
  const Real density_scale = Real(modes) / two_pi;
  const FockVector<Real>& signal = config.inputs[size_t(config.signal_mode)];
  std::vector<PhaseHistogramRow<Real>> rows;
  rows.reserve(size_t(modes) * config.phase_settings.size());
  for (int setting = 0; setting < int(config.phase_settings.size());
       ++setting) {
    const Real offset = config.phase_settings[size_t(setting)];
    auto inputs = config.inputs;
    inputs[size_t(config.reference_mode)] =
        phase_shifted(inputs[size_t(config.reference_mode)], offset);
    auto measured = joint_pattern_probabilities(config.unitary, inputs,
                                                config.total_photon_cap);
    if (config.detector_efficiency < Real(1))
      measured =
          joint_detector_transform(measured, config.detector_efficiency,
                                   DetectorDirection::ideal_to_counts)
              .probabilities;
    std::vector<std::pair<std::vector<int>, Real>> ordered(measured.begin(),
                                                           measured.end());
    std::vector<Real> cumulative;
    cumulative.reserve(ordered.size());
    Real running{0};
    for (const auto& [occupation, probability] : ordered) {
      running += probability;
      cumulative.push_back(running);
    }
    const auto counts =
        detail::sample_counts(cumulative, config.trials, config.seed, setting);
    std::vector<Real> empirical_weight(size_t(modes), Real(0));
    std::vector<Real> analytic_weight(size_t(modes), Real(0));
    std::vector<long long> pattern_counts(size_t(modes), 0);
    for (size_t i = 0; i < ordered.size(); ++i) {
      for (int m = 0; m < modes; ++m) {
        if (ordered[i].first != pom_patterns[size_t(m)]) continue;
        empirical_weight[size_t(m)] = Real(counts[i]);
        analytic_weight[size_t(m)] = ordered[i].second;
        pattern_counts[size_t(m)] = counts[i];
      }
    }
    long long accepted = 0;
    for (const long long c : pattern_counts) accepted += c;
    Real effective_events = Real(accepted);
    if (correct_efficiency && config.detector_efficiency < Real(1)) {
      std::map<std::vector<int>, Real> frequencies;
      if (config.trials > 0)
        for (size_t i = 0; i < ordered.size(); ++i)
          if (counts[i] > 0)
            frequencies[ordered[i].first] =
                Real(counts[i]) / Real(config.trials);
      const auto corrected =
          joint_detector_transform(frequencies, config.detector_efficiency,
                                   DetectorDirection::counts_to_ideal)
              .probabilities;
      const auto corrected_analytic =
          joint_detector_transform(measured, config.detector_efficiency,
                                   DetectorDirection::counts_to_ideal)
              .probabilities;
      for (int m = 0; m < modes; ++m) {
        empirical_weight[size_t(m)] = Real(0);
        analytic_weight[size_t(m)] = Real(0);
        if (auto it = corrected.find(pom_patterns[size_t(m)]);
            it != corrected.end())
          empirical_weight[size_t(m)] = std::max(it->second, Real(0));
        if (auto it = corrected_analytic.find(pom_patterns[size_t(m)]);
            it != corrected_analytic.end())
          analytic_weight[size_t(m)] = it->second;
      }
      Real corrected_mass = Real(0);
      for (const Real w : empirical_weight) corrected_mass += w;
      effective_events = Real(config.trials) * corrected_mass;
    }
    Real empirical_total = Real(0), analytic_total = Real(0);
    for (int m = 0; m < modes; ++m) {
      empirical_total += empirical_weight[size_t(m)];
      analytic_total += analytic_weight[size_t(m)];
    }
    for (int m = 0; m < modes; ++m) {
      const Real fraction = empirical_total > Real(0)
                                ? empirical_weight[size_t(m)] / empirical_total
                                : Real(0);
      const Real analytic_fraction =
          analytic_total > Real(0)
              ? analytic_weight[size_t(m)] / analytic_total
              : Real(0);
      const Real stderr_fraction =
          effective_events > Real(0)
              ? std::sqrt(std::max(fraction * (Real(1) - fraction), Real(0)) /
                          effective_events)
              : Real(0);
      Real theta = std::fmod(two_pi * Real(m) / Real(modes) + offset, two_pi);
      if (theta < Real(0)) theta += two_pi;
      PhaseHistogramRow<Real> row;
      row.theta = theta;
      row.density_empirical = fraction * density_scale;
      row.density_stderr = stderr_fraction * density_scale;
      row.density_analytic = analytic_fraction * density_scale;
      row.density_canonical = canonical_phase_density(signal, theta);
      row.count = pattern_counts[size_t(m)];
      row.accepted = accepted;
      rows.push_back(row);
    }
  }
  std::sort(rows.begin(), rows.end(),
            [](const PhaseHistogramRow<Real>& a,
               const PhaseHistogramRow<Real>& b) { return a.theta < b.theta; });
  return rows;
}

}  // namespace retroptics
