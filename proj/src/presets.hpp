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

#include <optional>
#include <string>

#include "json.hpp"
#include "retroptics/engineer.hpp"
#include "retroptics/fock.hpp"
#include "retroptics/multiport.hpp"

namespace retroptics::cli {

// A canned design scenario: the target state, the multiport it runs on, and
// the conditioning detection pattern.
struct DesignScenario {
  std::string name;
  FockVector<double> target;
  CMatrix<double> unitary;
  DetectionPattern pattern;
  bool optimized = false;  // device built from the optimal tap profile
  nlohmann::json extra;    // scenario-specific report fields
};

// Resolve a named design preset. `photon_count` parameterizes the
// superposition preset (|0> minus the (N+1)-photon state) and is ignored by
// the fixed three-mode scenarios. Unknown names return nullopt.
std::optional<DesignScenario> design_preset(const std::string& name,
                                            int photon_count);

// Resolve a named simulation preset to a config JSON document. Unknown names
// return nullopt.
std::optional<nlohmann::json> simulate_preset(const std::string& name);

// One-line-per-preset listing for --help text.
std::string preset_catalog();

// Unitary whose first column is the elementwise square root of the tap
// profile x (a real Householder reflection; the identity when x_0 = 1).
CMatrix<double> unitary_from_first_column(const std::vector<double>& x);

// Detector coherent amplitudes for a target state: the characteristic roots
// in canonical order, clustered by the pattern multiplicities (detector i
// absorbs counts[i] coincident roots). Throws when the pattern's detector
// count or multiplicities cannot be matched to the root set.
std::vector<Complex<double>> detector_betas(const FockVector<double>& target,
                                            const DetectionPattern& pattern);

}  // namespace retroptics::cli
