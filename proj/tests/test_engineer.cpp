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

#include "retroptics/engineer.hpp"

#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include "doctest.h"
#include "retroptics/multiport.hpp"
#include "test_util.hpp"

using namespace retroptics;
using Cd = std::complex<double>;
using Vec = CVector<double>;
using Mat = CMatrix<double>;

namespace {

FockVector<double> state_from(std::initializer_list<Cd> amps) {
  Vec v(static_cast<Eigen::Index>(amps.size()));
  Eigen::Index k = 0;
  for (const auto& a : amps) v[k++] = a;
  return FockVector<double>(v);
}

// The two-splitter three-port used in the worked examples: a balanced
// splitter on modes (1,0) followed by one on modes (2,0).
Mat simple_three_port() {
  const double quarter = pi<double> / 4;
  return Mat(bs_matrix<double>(quarter, 0.0, 3, 2, 0) *
             bs_matrix<double>(quarter, 0.0, 3, 1, 0));
}

double random_efficiency(const std::vector<Cd>& betas,
                         const DetectionPattern& pattern,
                         const std::vector<double>& x) {
  const int n = static_cast<int>(betas.size());
  Cd v{0, 0};
  for (int i = 1; i <= n; ++i) v += x[i] * betas[i - 1];
  std::vector<Cd> full(n + 1);
  full[0] = -v / x[0];
  for (int i = 1; i <= n; ++i) full[i] = betas[i - 1];
  double expo = 0, column = 1, facts = 1;
  for (int i = 0; i <= n; ++i) {
    expo += x[i] * std::norm(full[i]);
    column *= std::pow(x[i], pattern.counts[i]);
    facts *= factorial<double>(pattern.counts[i]);
  }
  const Vec amps = detail::root_product_amps(full, pattern.counts);
  return std::exp(-expo) * column / facts * amps.squaredNorm();
}

}  // namespace

TEST_CASE("characteristic roots") {
  SUBCASE("flat three-component target") {
    auto betas = characteristic_roots(state_from({1, 1, 1}));
    REQUIRE(betas.size() == 2);
    const double re = -1.0 / std::sqrt(2.0);
    const double im = std::sqrt(std::sqrt(2.0) - 0.5);
    CHECK(std::abs(betas[0] - Cd(re, im)) < 1e-12);
    CHECK(std::abs(betas[1] - Cd(re, -im)) < 1e-12);
  }
  SUBCASE("vacuum-minus-three-photon target") {
    auto betas =
        characteristic_roots(state_from({1, 0, 0, -1}));
    REQUIRE(betas.size() == 3);
    const double mag = std::pow(6.0, 1.0 / 6.0);
    // Canonical order: descending imaginary part.
    CHECK(std::abs(betas[0] - mag * std::exp(Cd(0, 2 * pi<double> / 3))) <
          1e-12);
    CHECK(std::abs(betas[1] - Cd(mag, 0)) < 1e-12);
    CHECK(std::abs(betas[2] - mag * std::exp(Cd(0, -2 * pi<double> / 3))) <
          1e-12);
  }
  SUBCASE("flat four-component target") {
    auto betas = characteristic_roots(state_from({1, 1, 1, 1}));
    REQUIRE(betas.size() == 3);
    CHECK(std::abs(betas[0] - Cd(-0.2168, 1.3563)) < 1.5e-4);
    CHECK(std::abs(betas[1] - Cd(-1.2984, 0.0)) < 1.5e-4);
    CHECK(std::abs(betas[2] - Cd(-0.2168, -1.3563)) < 1.5e-4);
  }
  SUBCASE("repeated roots keep their multiplicity") {
    // (z - r)^2 = z^2 - 2rz + r^2 with r = 0.8 - 0.3i; psi_n = c_n sqrt(n!).
    const Cd r(0.8, -0.3);
    auto psi = state_from({r * r, -2.0 * r, Cd(std::sqrt(2.0), 0)});
    auto betas = characteristic_roots(psi);
    REQUIRE(betas.size() == 2);
    CHECK(std::abs(betas[0] - std::conj(r)) < 1e-5);
    CHECK(std::abs(betas[1] - std::conj(r)) < 1e-5);
  }
  SUBCASE("invariant under global phase and scale") {
    auto base = characteristic_roots(state_from({1, 1, 1}));
    const Cd phase = 5.0 * std::exp(Cd(0, 1.234));
    auto scaled =
        characteristic_roots(state_from({phase, phase, phase}));
    REQUIRE(scaled.size() == base.size());
    for (std::size_t k = 0; k < base.size(); ++k)
      CHECK(std::abs(base[k] - scaled[k]) < 1e-10);
  }
  SUBCASE("zero-photon targets are rejected") {
    CHECK_THROWS_WITH(characteristic_roots(state_from({1})),
                      "no roots: zero-photon target");
    CHECK_THROWS_WITH(characteristic_roots(state_from({1, 0, 0})),
                      "no roots: zero-photon target");
    CHECK_THROWS_WITH(characteristic_roots(state_from({0, 0})),
                      "no roots: zero-photon target");
  }
}

TEST_CASE("reference amplitudes from roots") {
  SUBCASE("symmetric three-port reproduces the documented amplitudes") {
    auto betas = characteristic_roots(state_from({1, 1, 1}));
    auto solution = amplitudes_from_roots(betas, Mat(dft_matrix<double>(3)));
    CHECK(std::abs(solution.beta0 - Cd(std::sqrt(2.0), 0)) < 1e-10);
    CHECK(std::abs(solution.alphas[0] - Cd(-1.2591, 0)) < 1.5e-4);
    CHECK(std::abs(solution.alphas[1] - Cd(-0.1551, 0)) < 1.5e-4);
  }
  SUBCASE("all-zero roots give all-zero amplitudes") {
    std::vector<Cd> betas{Cd(0, 0), Cd(0, 0)};
    auto solution = amplitudes_from_roots(betas, Mat(dft_matrix<double>(3)));
    CHECK(std::abs(solution.beta0) < 1e-14);
    for (const auto& a : solution.alphas) CHECK(std::abs(a) < 1e-14);
  }
  SUBCASE("energy identity and port-0 constraint hold for random devices") {
    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 25; ++trial) {
      const int dim = 2 + static_cast<int>(rng() % 3);
      Mat u = testutil::random_unitary(dim, rng);
      bool small = false;
      for (int i = 0; i < dim; ++i)
        if (std::abs(u(i, 0)) < 1e-3) small = true;
      if (small) continue;
      std::vector<Cd> betas;
      for (int i = 0; i < dim - 1; ++i)
        betas.push_back(testutil::random_complex(rng, 1.5));
      auto solution = amplitudes_from_roots(betas, u);
      Cd constraint = std::norm(u(0, 0)) * solution.beta0;
      double weighted = std::norm(u(0, 0)) * std::norm(solution.beta0);
      for (int i = 1; i < dim; ++i) {
        constraint += std::norm(u(i, 0)) * betas[i - 1];
        weighted += std::norm(u(i, 0)) * std::norm(betas[i - 1]);
      }
      CHECK(std::abs(constraint) < 1e-10);
      double energy = 0;
      for (const auto& a : solution.alphas) energy += std::norm(a);
      CHECK(energy == doctest::Approx(weighted).epsilon(1e-10));
    }
  }
  SUBCASE("vanishing first-column entries are rejected") {
    Mat u = Mat::Zero(3, 3);
    u(0, 0) = 1;
    u(1, 2) = 1;
    u(2, 1) = 1;
    std::vector<Cd> betas{Cd(1, 0), Cd(0, 1)};
    CHECK_THROWS_WITH(amplitudes_from_roots(betas, u),
                      "first-column zero: state unreachable");
  }
  SUBCASE("wrong root count is rejected") {
    std::vector<Cd> betas{Cd(1, 0)};
    CHECK_THROWS_WITH(amplitudes_from_roots(betas, Mat(dft_matrix<double>(3))),
                      "dimension mismatch");
  }
}

TEST_CASE("kappa and efficiency") {
  const DetectionPattern canonical{{0, 1, 1}};
  SUBCASE("symmetric three-port closed form") {
    auto psi = state_from({1, 1, 1});
    auto target =
        engineer_target(psi, Mat(dft_matrix<double>(3)), canonical);
    const double expo = (2.0 + 2.0 * std::sqrt(2.0)) / 3.0;
    CHECK(std::norm(target.kappa_bar) ==
          doctest::Approx(std::exp(-expo) / 9.0).epsilon(1e-12));
    CHECK(target.efficiency ==
          doctest::Approx((2.0 / 3.0) * std::exp(-expo)).epsilon(1e-12));
  }
  SUBCASE("two-splitter three-port closed form") {
    auto psi = state_from({1, 1, 1});
    auto target = engineer_target(psi, simple_three_port(), canonical);
    const double expo = 1.0 + std::sqrt(2.0);
    CHECK(std::norm(target.kappa_bar) ==
          doctest::Approx(std::exp(-expo) / 8.0).epsilon(1e-12));
    CHECK(target.efficiency ==
          doctest::Approx(0.75 * std::exp(-expo)).epsilon(1e-12));
  }
  SUBCASE("efficiency equals the squared norm of the engineered state") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 10; ++trial) {
      const int dim = 3;
      Mat u = testutil::random_unitary(dim, rng);
      bool small = false;
      for (int i = 0; i < dim; ++i)
        if (std::abs(u(i, 0)) < 1e-2) small = true;
      if (small) continue;
      auto psi = testutil::random_state(2, rng);
      auto target = engineer_target(psi, u, canonical);
      auto state = engineered_state(u, target.alphas, canonical, 4);
      CHECK(state.norm2() == doctest::Approx(target.efficiency).epsilon(1e-10));
      CHECK(target.efficiency > 0);
      CHECK(target.efficiency <= 1.0);
    }
  }
  SUBCASE("vacuum-minus-extreme targets match the exponential law") {
    for (int n = 1; n <= 3; ++n) {
      const int dim = n + 1;
      Vec amps = Vec::Zero(dim + 1);
      amps[0] = 1;
      amps[dim] = -1;
      DetectionPattern ones{std::vector<int>(dim, 1)};
      auto target = engineer_target(FockVector<double>(amps),
                                    Mat(dft_matrix<double>(dim)), ones);
      const double beta2 =
          std::pow(factorial<double>(dim), 1.0 / dim);
      const double expected = 2.0 * std::exp(-beta2) * factorial<double>(dim) /
                              std::pow(double(dim), dim);
      CHECK(target.efficiency == doctest::Approx(expected).epsilon(1e-10));
    }
  }
}

TEST_CASE("engineered state") {
  SUBCASE("symmetric three-port prepares the flat target") {
    auto psi = state_from({1, 1, 1});
    const DetectionPattern pattern{{0, 1, 1}};
    auto target = engineer_target(psi, Mat(dft_matrix<double>(3)), pattern);
    auto state = engineered_state(Mat(dft_matrix<double>(3)), target.alphas,
                                  pattern, 4);
    auto unit = normalized_copy(state);
    // Up to a global phase the normalized state is (1,1,1)/sqrt(3).
    const Cd phase = unit.amp(0) / std::abs(unit.amp(0));
    for (int k = 0; k < 3; ++k)
      CHECK(std::abs(unit.amp(k) / phase - 1.0 / std::sqrt(3.0)) < 1e-10);
    CHECK(std::abs(unit.amp(3)) < 1e-10);
    CHECK(std::abs(unit.amp(4)) < 1e-10);
  }
  SUBCASE("all-firing pattern prepares vacuum-minus-three-photon") {
    auto psi = state_from({1, 0, 0, -1});
    const DetectionPattern pattern{{1, 1, 1}};
    auto target = engineer_target(psi, Mat(dft_matrix<double>(3)), pattern);
    auto state = engineered_state(Mat(dft_matrix<double>(3)), target.alphas,
                                  pattern, 3);
    auto unit = normalized_copy(state);
    const Cd phase = unit.amp(0) / std::abs(unit.amp(0));
    CHECK(std::abs(unit.amp(0) / phase - 1.0 / std::sqrt(2.0)) < 1e-8);
    CHECK(std::abs(unit.amp(1)) < 1e-8);
    CHECK(std::abs(unit.amp(2)) < 1e-8);
    CHECK(std::abs(unit.amp(3) / phase + 1.0 / std::sqrt(2.0)) < 1e-8);
  }
  SUBCASE("factored form matches multimode back-evolution and projection") {
    std::mt19937_64 rng(123);
    int done = 0;
    while (done < 20) {
      const int dim = 2 + static_cast<int>(rng() % 3);
      Mat u = testutil::random_unitary(dim, rng);
      std::vector<Cd> alphas;
      for (int j = 1; j < dim; ++j)
        alphas.push_back(testutil::random_complex(rng, 0.9));
      std::vector<int> counts(dim);
      counts[0] = static_cast<int>(rng() % 2);
      int total = counts[0];
      for (int i = 1; i < dim; ++i) {
        counts[i] = 1 + static_cast<int>(rng() % 2);
        total += counts[i];
      }
      if (total > 6) continue;
      const DetectionPattern pattern{counts};

      auto factored = engineered_state(u, alphas, pattern, total);

      auto detected = fock_pattern_state<double>(counts);
      auto evolved = evolve_multimode(u, detected, Evolution::backward);
      MultimodeState<double> reduced = evolved;
      for (int j = dim - 1; j >= 1; --j)
        reduced = project_mode(reduced, j, coherent_state<double>(alphas[j - 1], 12));
      auto brute = single_mode_vector(reduced);

      double worst = 0;
      for (int k = 0; k <= total; ++k)
        worst = std::max(worst, std::abs(factored.amp(k) - brute.amp(k)));
      CHECK(worst / std::sqrt(factored.norm2()) < 1e-8);
      ++done;
    }
  }
  SUBCASE("cutoff below the pattern total is rejected") {
    std::vector<Cd> alphas{Cd(0.3, 0), Cd(0, 0.2)};
    CHECK_THROWS_WITH(engineered_state(Mat(dft_matrix<double>(3)), alphas,
                                       DetectionPattern{{0, 1, 1}}, 1),
                      "cutoff below pattern photon total");
  }
}

TEST_CASE("first-column optimization") {
  SUBCASE("flat three-component target optimum") {
    auto betas = characteristic_roots(state_from({1, 1, 1}));
    const DetectionPattern pattern{{0, 1, 1}};
    auto result = optimize_first_column(betas, pattern);
    REQUIRE(result.x.size() == 3);
    CHECK(result.feasible);
    CHECK(result.kkt_residual < 1e-8);
    CHECK(std::abs(result.x[0] - 0.43591) < 1e-4);
    CHECK(std::abs(result.x[1] - 0.28205) < 1e-4);
    CHECK(std::abs(result.x[2] - 0.28205) < 1e-4);
    CHECK(std::abs(result.x[1] - result.x[2]) < 1e-8);
    CHECK(result.p_psi == doctest::Approx(0.149219).epsilon(2e-4));
    // Better than the symmetric multiport, and better than random probes.
    CHECK(result.p_psi > (2.0 / 3.0) *
                             std::exp(-(2.0 + 2.0 * std::sqrt(2.0)) / 3.0));
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> unit(1e-12, 1.0);
    for (int probe = 0; probe < 2000; ++probe) {
      std::vector<double> x(3);
      double total = 0;
      for (auto& xi : x) {
        xi = -std::log(unit(rng));
        total += xi;
      }
      for (auto& xi : x) xi /= total;
      CHECK(random_efficiency(betas, pattern, x) <= result.p_psi + 1e-12);
    }
  }
  SUBCASE("sum and positivity always hold") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 8; ++trial) {
      const int n = 2 + static_cast<int>(rng() % 2);
      std::vector<Cd> betas;
      for (int i = 0; i < n; ++i)
        betas.push_back(testutil::random_complex(rng, 1.2));
      std::vector<int> counts(n + 1, 1);
      counts[0] = 0;
      const DetectionPattern pattern{counts};
      auto result = optimize_first_column(betas, pattern);
      double total = 0;
      for (double xi : result.x) total += xi;
      CHECK(std::abs(total - 1.0) < 1e-12);
      CHECK(result.kkt_residual < 1e-8);
      CHECK(result.feasible);
      std::uniform_real_distribution<double> unit(1e-12, 1.0);
      for (int probe = 0; probe < 500; ++probe) {
        std::vector<double> x(n + 1);
        double mass = 0;
        for (auto& xi : x) {
          xi = -std::log(unit(rng));
          mass += xi;
        }
        for (auto& xi : x) xi /= mass;
        CHECK(random_efficiency(betas, pattern, x) <= result.p_psi + 1e-12);
      }
    }
  }
  SUBCASE("single-photon target drives the silent port to the boundary") {
    std::vector<Cd> betas{Cd(0, 0)};
    auto result = optimize_first_column(betas, DetectionPattern{{0, 1}});
    CHECK_FALSE(result.feasible);
  }
}
