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

#include "presets.hpp"

#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

namespace retroptics::cli {

namespace {

using Cd = Complex<double>;

constexpr double kPi = pi<double>;

FockVector<double> uniform_three_state() {
  CVector<double> amps(3);
  amps[0] = amps[1] = amps[2] = 1.0 / std::sqrt(3.0);
  FockVector<double> v{std::move(amps)};
  v.normalized = true;
  return v;
}

DetectionPattern single_photon_pattern(int detectors) {
  std::vector<int> counts(size_t(detectors) + 1, 1);
  counts[0] = 0;
  return DetectionPattern{std::move(counts)};
}

nlohmann::json fig_preset(double efficiency, std::uint64_t seed) {
  using nlohmann::json;
  const double nbar = 0.076;
  return json{
      {"device", json{{"kind", "dft"}, {"dim", 4}}},
      {"inputs",
       json::array(
           {json{{"kind", "coherent"},
                 {"alpha", json::array({std::sqrt(nbar), 0.0})},
                 {"cutoff", 14}},
            json{{"kind", "squeezed"},
                 {"alpha", json::array({-(2.0 + std::sqrt(2.0)) / 3.0, 0.0})},
                 {"t", json::array({0.5, 0.0})},
                 {"cutoff", 14}},
            json{{"kind", "vacuum"}}, json{{"kind", "vacuum"}}})},
      {"signal_mode", 0},
      {"reference_mode", 1},
      {"efficiency", efficiency},
      {"phase_settings",
       json::array({0.0, kPi / 8.0, kPi / 4.0, 3.0 * kPi / 8.0})},
      {"trials", 1000000LL},
      {"seed", seed}};
}

}  // namespace

std::vector<Cd> detector_betas(const FockVector<double>& target,
                               const DetectionPattern& pattern) {
  const auto roots = characteristic_roots(target);
  std::vector<Cd> betas;
  size_t next = 0;
  for (size_t i = 1; i < pattern.counts.size(); ++i) {
    const int multiplicity = pattern.counts[i];
    if (multiplicity < 1 || next + size_t(multiplicity) > roots.size())
      throw std::invalid_argument("pattern does not match target degree");
    const Cd cluster = roots[next];
    for (int k = 1; k < multiplicity; ++k)
      if (std::abs(roots[next + size_t(k)] - cluster) >
          1e-8 * std::max(1.0, std::abs(cluster)))
        throw std::invalid_argument(
            "pattern multiplicities do not match root clusters");
    betas.push_back(std::conj(cluster));
    next += size_t(multiplicity);
  }
  if (next != roots.size())
    throw std::invalid_argument("pattern does not match target degree");
  return betas;
}

CMatrix<double> unitary_from_first_column(const std::vector<double>& x) {
  const int dim = int(x.size());
  CVector<double> column(dim);
  for (int i = 0; i < dim; ++i) {
    if (x[size_t(i)] < 0)
      throw std::invalid_argument("tap profile entries must be non-negative");
    column[i] = std::sqrt(x[size_t(i)]);
  }
  CMatrix<double> u = CMatrix<double>::Identity(dim, dim);
  CVector<double> w = column;
  w[0] -= 1.0;
  const double norm2 = w.squaredNorm();
  if (norm2 > 1e-28) u -= (2.0 / norm2) * (w * w.adjoint());
  return u;
}

std::optional<DesignScenario> design_preset(const std::string& name,
                                            int photon_count) {
  using nlohmann::json;
  if (name == "simple-config") {
    DesignScenario scenario;
    scenario.name = name;
    scenario.target = uniform_three_state();
    scenario.unitary = bs_matrix<double>(kPi / 4, 0.0, 3, 2, 0) *
                       bs_matrix<double>(kPi / 4, 0.0, 3, 1, 0);
    scenario.pattern = single_photon_pattern(2);
    scenario.extra = json{
        {"description",
         "two-splitter cascade with equal 50:50 elements; signal tap profile "
         "(1/4, 1/2, 1/4)"}};
    return scenario;
  }
  if (name == "dft3") {
    DesignScenario scenario;
    scenario.name = name;
    scenario.target = uniform_three_state();
    scenario.unitary = dft_matrix<double>(3);
    scenario.pattern = single_photon_pattern(2);
    scenario.extra =
        json{{"description", "symmetric three-mode multiport (uniform taps)"}};
    return scenario;
  }
  if (name == "optimal3") {
    DesignScenario scenario;
    scenario.name = name;
    scenario.target = uniform_three_state();
    scenario.pattern = single_photon_pattern(2);
    const auto betas = detector_betas(scenario.target, scenario.pattern);
    const auto optimum = optimize_first_column(betas, scenario.pattern);
    if (!optimum.feasible)
      throw std::domain_error("first-column zero: state unreachable");
    scenario.unitary = unitary_from_first_column(optimum.x);
    scenario.optimized = true;
    scenario.extra = json{
        {"description",
         "three-mode device with the success-probability-optimal tap profile"},
        {"optimization", json{{"tap_profile", optimum.x},
                              {"p_psi", optimum.p_psi},
                              {"kkt_residual", optimum.kkt_residual}}}};
    return scenario;
  }
  if (name == "zero-minus-Nplus1") {
    const int n = photon_count;
    if (n < 1)
      throw std::invalid_argument("photon count must be at least one");
    DesignScenario scenario;
    scenario.name = name;
    CVector<double> amps = CVector<double>::Zero(n + 2);
    amps[0] = 1.0 / std::sqrt(2.0);
    amps[n + 1] = -1.0 / std::sqrt(2.0);
    scenario.target = FockVector<double>{std::move(amps)};
    scenario.target.normalized = true;
    // (N+1)-port symmetric device with every detector (port 0 included)
    // firing once: the single coherent input sits on port 1 and the success
    // probability takes the closed form 2 e^{-|beta|^2} (N+1)!/(N+1)^{N+1}.
    scenario.unitary = dft_matrix<double>(n + 1);
    scenario.pattern = DetectionPattern{std::vector<int>(size_t(n) + 1, 1)};
    scenario.extra = json{
        {"description", "equal superposition of the vacuum and the " +
                            std::to_string(n + 1) +
                            "-photon state on a symmetric multiport"},
        {"photon_count", n}};
    return scenario;
  }
  return std::nullopt;
}

std::optional<nlohmann::json> simulate_preset(const std::string& name) {
  if (name == "fig5_3") return fig_preset(1.0, 20260816ULL);
  if (name == "fig5_5") return fig_preset(0.6, 20260817ULL);
  return std::nullopt;
}

std::string preset_catalog() {
  return "design presets:\n"
         "  simple-config     uniform three-term target on a fixed two-splitter cascade\n"
         "  dft3              uniform three-term target on the symmetric three-port\n"
         "  optimal3          uniform three-term target with the optimal tap profile\n"
         "  zero-minus-Nplus1 (|0> - |N+1>)/sqrt(2) on a symmetric multiport (--n sets N)\n"
         "simulate presets:\n"
         "  fig5_3            single-shot phase histogram, weak coherent signal, ideal detectors\n"
         "  fig5_5            same run with detector efficiency 0.6 (biased unless corrected)\n";
}

}  // namespace retroptics::cli
