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

// Serialization for the command-line tools: JSON readers/writers for states,
// matrices, multiport plans, engineered targets, and experiment configs, plus
// the CSV formats used for counts, histograms, and netlists. All numeric
// formatting is deterministic so identical inputs yield byte-identical files.

#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "retroptics/engineer.hpp"
#include "retroptics/experiments.hpp"
#include "retroptics/fock.hpp"
#include "retroptics/multiport.hpp"

namespace retroptics::io {

using json = nlohmann::json;
using Cd = Complex<double>;

// ---------------------------------------------------------------------------
// Basic value conversions
// ---------------------------------------------------------------------------

inline json complex_to_json(Cd z) { return json::array({z.real(), z.imag()}); }

inline Cd complex_from_json(const json& j) {
  if (j.is_number()) return Cd(j.get<double>(), 0.0);
  if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number())
    return Cd(j[0].get<double>(), j[1].get<double>());
  throw std::invalid_argument("expected a complex value as [re, im]");
}

inline json fock_to_json(const FockVector<double>& v) {
  json re = json::array(), im = json::array();
  for (int n = 0; n < v.dim(); ++n) {
    re.push_back(v.amps[n].real());
    im.push_back(v.amps[n].imag());
  }
  return json{{"cutoff", v.cutoff}, {"re", re}, {"im", im}};
}

inline FockVector<double> fock_from_json(const json& j) {
  if (!j.contains("re") || !j["re"].is_array() || j["re"].empty())
    throw std::invalid_argument("state JSON requires a non-empty \"re\" array");
  const auto& re = j["re"];
  const size_t dim = re.size();
  if (j.contains("im") && j["im"].size() != dim)
    throw std::invalid_argument("state JSON \"im\" length differs from \"re\"");
  CVector<double> amps(static_cast<Eigen::Index>(dim));
  for (size_t n = 0; n < dim; ++n) {
    const double real_part = re[n].get<double>();
    const double imag_part = j.contains("im") ? j["im"][n].get<double>() : 0.0;
    amps[Eigen::Index(n)] = Cd(real_part, imag_part);
  }
  return FockVector<double>{std::move(amps)};
}

inline json matrix_to_json(const CMatrix<double>& m) {
  json re = json::array(), im = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row_re = json::array(), row_im = json::array();
    for (Eigen::Index jcol = 0; jcol < m.cols(); ++jcol) {
      row_re.push_back(m(i, jcol).real());
      row_im.push_back(m(i, jcol).imag());
    }
    re.push_back(std::move(row_re));
    im.push_back(std::move(row_im));
  }
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"re", re}, {"im", im}};
}

inline CMatrix<double> matrix_from_json(const json& j) {
  if (!j.contains("re") || !j["re"].is_array() || j["re"].empty())
    throw std::invalid_argument("matrix JSON requires a non-empty \"re\" array");
  const auto& re = j["re"];
  const size_t rows = re.size();
  const size_t cols = re[0].size();
  const bool has_im = j.contains("im");
  CMatrix<double> m(static_cast<Eigen::Index>(rows),
                    static_cast<Eigen::Index>(cols));
  for (size_t i = 0; i < rows; ++i) {
    if (re[i].size() != cols || (has_im && j["im"][i].size() != cols))
      throw std::invalid_argument("matrix JSON rows have inconsistent lengths");
    for (size_t c = 0; c < cols; ++c) {
      const double imag_part = has_im ? j["im"][i][c].get<double>() : 0.0;
      m(Eigen::Index(i), Eigen::Index(c)) = Cd(re[i][c].get<double>(), imag_part);
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// Multiport plans and engineered targets
// ---------------------------------------------------------------------------

inline json plan_to_json(const MultiportPlan<double>& plan) {
  json elements = json::array();
  for (const auto& element : plan.elements)
    elements.push_back(json{{"p", element.p},
                            {"q", element.q},
                            {"theta", element.theta},
                            {"phi", element.phi}});
  return json{{"dim", plan.dim},
              {"elements", elements},
              {"output_phases", plan.output_phases}};
}

inline MultiportPlan<double> plan_from_json(const json& j) {
  MultiportPlan<double> plan;
  plan.dim = j.at("dim").get<int>();
  for (const auto& element : j.at("elements"))
    plan.elements.push_back(BSElement<double>{element.at("p").get<int>(),
                                              element.at("q").get<int>(),
                                              element.at("theta").get<double>(),
                                              element.at("phi").get<double>()});
  if (j.contains("output_phases"))
    plan.output_phases = j["output_phases"].get<std::vector<double>>();
  return plan;
}

// Deterministic numeric formatting shared by every CSV writer.
inline std::string format_number(double value) {
  char buffer[40];
  std::snprintf(buffer, sizeof(buffer), "%.12g", value);
  return buffer;
}

// Netlist rows "kind,a,b,param1,param2": splitter rows carry the mode pair
// and (theta, phi); phase rows carry the mode and the final output phase.
inline std::string plan_to_netlist(const MultiportPlan<double>& plan) {
  std::ostringstream out;
  out << "kind,a,b,param1,param2\n";
  for (const auto& element : plan.elements)
    out << "bs," << element.p << ',' << element.q << ','
        << format_number(element.theta) << ',' << format_number(element.phi)
        << '\n';
  for (size_t mode = 0; mode < plan.output_phases.size(); ++mode)
    out << "phase," << mode << ",," << format_number(plan.output_phases[mode])
        << ",\n";
  return out.str();
}

inline json target_to_json(const EngineeredTarget<double>& target) {
  json betas = json::array(), alphas = json::array();
  for (const auto& beta : target.betas) betas.push_back(complex_to_json(beta));
  for (const auto& alpha : target.alphas)
    alphas.push_back(complex_to_json(alpha));
  return json{{"target", fock_to_json(target.psi)},
              {"pattern", target.pattern.counts},
              {"betas", betas},
              {"alphas", alphas},
              {"kappa_bar", complex_to_json(target.kappa_bar)},
              {"kappa_bar_sq", std::norm(target.kappa_bar)},
              {"success_probability", target.efficiency}};
}

// ---------------------------------------------------------------------------
// Experiment configs
// ---------------------------------------------------------------------------

inline FockVector<double> input_from_json(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "vacuum") return number_state<double>(0, 0);
  if (kind == "number") {
    const int n = j.at("n").get<int>();
    return number_state<double>(n, j.value("cutoff", n));
  }
  if (kind == "coherent")
    return coherent_state<double>(complex_from_json(j.at("alpha")),
                                  j.value("cutoff", kPhotonCap));
  if (kind == "squeezed")
    return squeezed_state<double>(complex_from_json(j.at("alpha")),
                                  complex_from_json(j.at("t")),
                                  j.value("cutoff", kPhotonCap));
  if (kind == "binomial")
    return binomial_state<double>(j.at("n").get<int>(),
                                  j.value("cutoff", j.at("n").get<int>()),
                                  j.value("alternating", true));
  if (kind == "fock") return fock_from_json(j);
  throw std::invalid_argument("unknown input kind \"" + kind + "\"");
}

inline CMatrix<double> device_from_json(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "dft") return dft_matrix<double>(j.at("dim").get<int>());
  if (kind == "matrix") return matrix_from_json(j);
  if (kind == "plan") return realize(plan_from_json(j.at("plan")));
  if (kind == "bs_pair")
    return double_bs_device<double>(j.at("theta").get<double>());
  throw std::invalid_argument("unknown device kind \"" + kind + "\"");
}

inline ExperimentConfig<double> config_from_json(const json& j) {
  ExperimentConfig<double> config;
  config.unitary = device_from_json(j.at("device"));
  for (const auto& input : j.at("inputs"))
    config.inputs.push_back(input_from_json(input));
  config.signal_mode = j.value("signal_mode", 0);
  config.reference_mode = j.value("reference_mode", 1);
  config.detector_efficiency = j.value("efficiency", 1.0);
  if (j.contains("phase_settings"))
    config.phase_settings = j["phase_settings"].get<std::vector<double>>();
  config.trials = j.value("trials", 0LL);
  if (j.contains("seed")) config.seed = j["seed"].get<std::uint64_t>();
  config.total_photon_cap = j.value("total_photon_cap", kPhotonCap);
  return config;
}

// ---------------------------------------------------------------------------
// CSV writers and readers
// ---------------------------------------------------------------------------

inline std::string pattern_label(const std::vector<int>& counts) {
  std::string label;
  for (size_t i = 0; i < counts.size(); ++i) {
    if (i) label += '-';
    label += std::to_string(counts[i]);
  }
  return label;
}

inline std::vector<int> pattern_from_label(const std::string& label) {
  std::vector<int> counts;
  std::string digits;
  for (const char c : label + "-") {
    if (c == '-') {
      if (digits.empty())
        throw std::invalid_argument("malformed pattern label \"" + label + "\"");
      counts.push_back(std::stoi(digits));
      digits.clear();
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      digits += c;
    } else {
      throw std::invalid_argument("malformed pattern label \"" + label + "\"");
    }
  }
  return counts;
}

inline std::string histogram_csv(
    const std::vector<PhaseHistogramRow<double>>& rows) {
  std::ostringstream out;
  out << "theta,density,stderr,density_analytic,density_canonical,count,"
         "accepted\n";
  for (const auto& row : rows)
    out << format_number(row.theta) << ',' << format_number(row.density_empirical)
        << ',' << format_number(row.density_stderr) << ','
        << format_number(row.density_analytic) << ','
        << format_number(row.density_canonical) << ',' << row.count << ','
        << row.accepted << '\n';
  return out.str();
}

inline std::string counts_csv(const MonteCarloResult<double>& result) {
  std::ostringstream out;
  out << "phase,pattern,count,trials,analytic_prob\n";
  for (const auto& setting : result.settings)
    for (const auto& record : setting.records)
      out << format_number(setting.phase) << ','
          << pattern_label(record.pattern.counts) << ',' << record.count << ','
          << setting.trials << ',' << format_number(record.probability) << '\n';
  return out.str();
}

// One parsed counts-CSV row. `probability` holds the analytic column; the
// working estimate is count/trials when trials > 0 and the analytic value
// otherwise (exact-probability files are written with trials = 0).
struct CountRow {
  double phase = 0;
  std::vector<int> pattern;
  long long count = 0;
  long long trials = 0;
  double probability = 0;

  double estimate() const {
    return trials > 0 ? double(count) / double(trials) : probability;
  }
  // Binomial variance of the estimate; zero for exact rows.
  double variance() const {
    if (trials <= 0) return 0.0;
    const double p = estimate();
    return p * (1.0 - p) / double(trials);
  }
};

inline std::vector<CountRow> parse_counts_csv(const std::string& text) {
  std::vector<CountRow> rows;
  std::istringstream lines(text);
  std::string line;
  bool first = true;
  while (std::getline(lines, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (first) {
      first = false;
      if (line.rfind("phase,", 0) == 0) continue;  // header
    }
    std::istringstream fields(line);
    std::string phase_text, pattern_text, count_text, trials_text, prob_text;
    if (!std::getline(fields, phase_text, ',') ||
        !std::getline(fields, pattern_text, ',') ||
        !std::getline(fields, count_text, ',') ||
        !std::getline(fields, trials_text, ',') ||
        !std::getline(fields, prob_text))
      throw std::invalid_argument("counts file: malformed row \"" + line + "\"");
    try {
      CountRow row;
      row.phase = std::stod(phase_text);
      row.pattern = pattern_from_label(pattern_text);
      row.count = std::stoll(count_text);
      row.trials = std::stoll(trials_text);
      row.probability = std::stod(prob_text);
      rows.push_back(std::move(row));
    } catch (const std::invalid_argument&) {
      throw std::invalid_argument("counts file: malformed row \"" + line + "\"");
    }
  }
  if (rows.empty())
    throw std::invalid_argument("counts file: no data rows found");
  return rows;
}

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open \"" + path + "\"");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::invalid_argument("cannot write \"" + path + "\"");
  out << content;
}

}  // namespace retroptics::io
