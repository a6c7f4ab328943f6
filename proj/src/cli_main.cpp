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

#include "cli_main.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "presets.hpp"
#include "retroptics/engineer.hpp"
#include "retroptics/experiments.hpp"
#include "retroptics/fock.hpp"
#include "retroptics/io.hpp"
#include "retroptics/multiport.hpp"
#include "retroptics/phase.hpp"

namespace retroptics::cli {
namespace {

using json = nlohmann::json;
using Cd = Complex<double>;

constexpr double kPi = pi<double>;
constexpr double kTwoPi = 2.0 * pi<double>;

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm parts{};
  gmtime_r(&now, &parts);
  char buffer[32];
  std::strftime(buffer, sizeof(buffer), "%Y-%m-%dT%H:%M:%SZ", &parts);
  return buffer;
}

// The generation timestamp lives only in this JSON block so every CSV (and
// everything else in the documents) is byte-identical across reruns.
json metadata(const std::string& command) {
  return json{{"tool", "retro"},
              {"command", command},
              {"generated_at", utc_timestamp()}};
}

std::string file_stem(const std::string& path) {
  return std::filesystem::path(path).stem().string();
}

std::filesystem::path output_path(const std::string& out_dir,
                                  const std::string& file_name) {
  const std::filesystem::path dir =
      out_dir.empty() ? std::filesystem::path(".") : std::filesystem::path(out_dir);
  std::filesystem::create_directories(dir);
  return dir / file_name;
}

double wrap_two_pi(double angle) {
  double wrapped = std::fmod(angle, kTwoPi);
  if (wrapped < 0) wrapped += kTwoPi;
  return wrapped;
}

std::string complex_text(Cd z) {
  return "(" + io::format_number(z.real()) + ", " + io::format_number(z.imag()) +
         ")";
}

std::vector<int> parse_pattern(const std::string& text) {
  std::string label;
  for (const char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) continue;
    label += (c == ',') ? '-' : c;
  }
  return io::pattern_from_label(label);
}

std::uint64_t parse_seed(const std::string& text) {
  try {
    size_t used = 0;
    const unsigned long long value = std::stoull(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return value;
  } catch (const std::exception&) {
    throw std::invalid_argument("invalid seed \"" + text + "\"");
  }
}

// ---------------------------------------------------------------------------
// design
// ---------------------------------------------------------------------------

struct DesignOptions {
  std::string target_file;
  std::string preset;
  std::string unitary = "dft";
  std::string pattern_text;
  std::string out_dir = ".";
  int photons = 1;
  bool unitary_given = false;
  bool print_json = false;
};

// Emitted when the target carries no photons: nothing needs to be detected,
// so there is no device to design. Informational, not an error.
int report_trivial_design(const DesignOptions& opt, const std::string& name,
                          const FockVector<double>& target, std::ostream& out) {
  const std::string message =
      "no roots: zero-photon target — the signal mode already holds the "
      "target and no conditional detection is required";
  json doc{{"metadata", metadata("design")},
           {"name", name},
           {"kind", "trivial"},
           {"message", message},
           {"target", io::fock_to_json(target)}};
  const auto target_path = output_path(opt.out_dir, name + "_target.json");
  doc["outputs"] = json{{"target_json", target_path.string()}};
  io::write_text_file(target_path.string(), doc.dump(2) + "\n");
  if (opt.print_json) {
    out << doc.dump(2) << "\n";
  } else {
    out << "design " << name << ": " << message << "\n";
    out << "  wrote " << target_path.string() << "\n";
  }
  return kOk;
}

int run_design(const DesignOptions& opt, std::ostream& out) {
  std::string name;
  FockVector<double> target;
  DetectionPattern pattern;
  CMatrix<double> unitary;
  std::string unitary_source;
  json extra = json::object();

  if (!opt.preset.empty()) {
    if (!opt.target_file.empty())
      throw std::invalid_argument(
          "give either a target JSON file or --preset, not both");
    if (opt.unitary_given || !opt.pattern_text.empty())
      throw std::invalid_argument(
          "--unitary/--pattern cannot be combined with --preset; presets fix "
          "their own device and detection pattern");
    auto scenario = design_preset(opt.preset, opt.photons);
    if (!scenario)
      throw std::invalid_argument("unknown preset \"" + opt.preset +
                                  "\"; available presets:\n" + preset_catalog());
    name = scenario->name;
    target = std::move(scenario->target);
    pattern = std::move(scenario->pattern);
    unitary = std::move(scenario->unitary);
    unitary_source = scenario->optimized ? "optimize" : "preset";
    extra = std::move(scenario->extra);
  } else if (!opt.target_file.empty()) {
    name = file_stem(opt.target_file);
    const json doc = json::parse(io::read_text_file(opt.target_file));
    target = doc.contains("target") ? io::fock_from_json(doc.at("target"))
                                    : io::fock_from_json(doc);

    std::vector<Cd> roots;
    try {
      roots = characteristic_roots(target);
    } catch (const std::invalid_argument& e) {
      if (std::string(e.what()).find("zero-photon") == std::string::npos) throw;
      return report_trivial_design(opt, name, target, out);
    }
    const int degree = static_cast<int>(roots.size());

    if (!opt.pattern_text.empty()) {
      pattern = DetectionPattern{parse_pattern(opt.pattern_text)};
    } else {
      std::vector<int> counts(size_t(degree) + 1, 1);
      counts[0] = 0;
      pattern = DetectionPattern{std::move(counts)};
    }

    const int dim = static_cast<int>(pattern.counts.size());
    if (opt.unitary == "dft") {
      unitary = dft_matrix<double>(dim);
      unitary_source = "dft";
    } else if (opt.unitary == "optimize") {
      const auto betas = detector_betas(target, pattern);
      const auto optimum = optimize_first_column(betas, pattern);
      if (!optimum.feasible)
        throw std::domain_error("first-column zero: state unreachable");
      unitary = unitary_from_first_column(optimum.x);
      unitary_source = "optimize";
      extra["optimization"] = json{{"tap_profile", optimum.x},
                                   {"p_psi", optimum.p_psi},
                                   {"kkt_residual", optimum.kkt_residual}};
    } else {
      const json device = json::parse(io::read_text_file(opt.unitary));
      unitary = device.contains("kind") ? io::device_from_json(device)
                                        : io::matrix_from_json(device);
      unitary_source = "file";
    }
  } else {
    throw std::invalid_argument(
        "design needs a target JSON file or --preset (see `retro design "
        "--help`)");
  }

  const auto result = engineer_target(target, unitary, pattern);
  const auto plan = reck_decompose(unitary);

  json doc{{"metadata", metadata("design")},
           {"name", name},
           {"unitary_source", unitary_source}};
  doc.update(io::target_to_json(result));
  doc["unitary"] = io::matrix_to_json(unitary);
  doc["plan"] = io::plan_to_json(plan);
  if (!extra.empty()) doc.update(extra);

  const auto target_path = output_path(opt.out_dir, name + "_target.json");
  const auto plan_path = output_path(opt.out_dir, name + "_plan.json");
  const auto netlist_path = output_path(opt.out_dir, name + "_plan.csv");
  doc["outputs"] = json{{"target_json", target_path.string()},
                        {"plan_json", plan_path.string()},
                        {"netlist_csv", netlist_path.string()}};

  io::write_text_file(target_path.string(), doc.dump(2) + "\n");
  io::write_text_file(plan_path.string(), io::plan_to_json(plan).dump(2) + "\n");
  io::write_text_file(netlist_path.string(), io::plan_to_netlist(plan));

  if (opt.print_json) {
    out << doc.dump(2) << "\n";
    return kOk;
  }
  out << "design " << name << "\n";
  out << "  detection pattern: " << io::pattern_label(pattern.counts) << " ("
      << unitary_source << " device, " << plan.elements.size()
      << " splitters)\n";
  out << "  success probability P_psi = " << io::format_number(result.efficiency)
      << "\n";
  out << "  |kappa_bar|^2 = " << io::format_number(std::norm(result.kappa_bar))
      << "\n";
  for (size_t k = 0; k < result.alphas.size(); ++k)
    out << "  alpha[" << (k + 1) << "] = " << complex_text(result.alphas[k])
        << "\n";
  if (extra.contains("optimization"))
    out << "  optimized tap profile: "
        << json(extra["optimization"]["tap_profile"]).dump() << "\n";
  out << "  wrote " << target_path.string() << ", " << plan_path.string()
      << ", " << netlist_path.string() << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

struct SimulateOptions {
  std::string config_file;
  std::string preset;
  std::string seed_text;
  std::string out_dir = ".";
  long long trials = -1;
  double efficiency = -1;
  bool correct = false;
  bool print_json = false;
};

int run_simulate(const SimulateOptions& opt, std::ostream& out) {
  json config_doc;
  std::string name;
  if (!opt.preset.empty()) {
    if (!opt.config_file.empty())
      throw std::invalid_argument(
          "give either a config JSON file or --preset, not both");
    auto preset = simulate_preset(opt.preset);
    if (!preset)
      throw std::invalid_argument("unknown preset \"" + opt.preset +
                                  "\"; available presets:\n" + preset_catalog());
    config_doc = std::move(*preset);
    name = opt.preset;
  } else if (!opt.config_file.empty()) {
    config_doc = json::parse(io::read_text_file(opt.config_file));
    name = file_stem(opt.config_file);
  } else {
    throw std::invalid_argument(
        "simulate needs a config JSON file or --preset (see `retro simulate "
        "--help`)");
  }

  if (opt.trials >= 0) config_doc["trials"] = opt.trials;
  if (opt.efficiency >= 0) config_doc["efficiency"] = opt.efficiency;
  if (!opt.seed_text.empty()) {
    config_doc["seed"] = parse_seed(opt.seed_text);
  } else if (!config_doc.contains("seed")) {
    if (const char* env_seed = std::getenv("RETROPTICS_SEED"))
      config_doc["seed"] = parse_seed(env_seed);
  }

  const auto config = io::config_from_json(config_doc);
  const auto result = monte_carlo(config);
  const auto histogram = pom_phase_histogram(config, opt.correct);

  const int modes = static_cast<int>(config.inputs.size());
  json settings = json::array();
  struct SettingSummary {
    double phase = 0;
    long long trials = 0;
    long long accepted = 0;
    double acceptance_probability = 0;
  };
  std::vector<SettingSummary> summaries;
  for (const auto& setting : result.settings) {
    json pom = json::array();
    SettingSummary summary;
    summary.phase = setting.phase;
    summary.trials = setting.trials;
    for (int m = 0; m < modes; ++m) {
      std::vector<int> pom_pattern(size_t(modes), 1);
      pom_pattern[size_t(m)] = 0;
      double probability = 0;
      long long count = 0;
      for (const auto& record : setting.records) {
        if (record.pattern.counts != pom_pattern) continue;
        probability = record.probability;
        count = record.count;
        break;
      }
      pom.push_back(json{{"pattern", io::pattern_label(pom_pattern)},
                         {"theta", wrap_two_pi(kTwoPi * double(m) /
                                                   double(modes) +
                                               setting.phase)},
                         {"probability", probability},
                         {"count", count}});
      summary.acceptance_probability += probability;
      summary.accepted += count;
    }
    settings.push_back(json{
        {"phase", setting.phase},
        {"trials", setting.trials},
        {"overflow", setting.overflow},
        {"accepted", summary.accepted},
        {"acceptance_probability", summary.acceptance_probability},
        {"pom", std::move(pom)}});
    summaries.push_back(summary);
  }

  const auto counts_path = output_path(opt.out_dir, name + "_counts.csv");
  const auto histogram_path = output_path(opt.out_dir, name + "_histogram.csv");
  const auto analytic_path = output_path(opt.out_dir, name + "_analytic.json");

  json doc{{"metadata", metadata("simulate")},
           {"name", name},
           {"config", config_doc},
           {"efficiency_corrected", opt.correct},
           {"settings", std::move(settings)},
           {"outputs", json{{"counts_csv", counts_path.string()},
                            {"histogram_csv", histogram_path.string()},
                            {"analytic_json", analytic_path.string()}}}};

  io::write_text_file(counts_path.string(), io::counts_csv(result));
  io::write_text_file(histogram_path.string(), io::histogram_csv(histogram));
  io::write_text_file(analytic_path.string(), doc.dump(2) + "\n");

  if (opt.print_json) {
    out << doc.dump(2) << "\n";
    return kOk;
  }
  out << "simulate " << name << ": " << result.settings.size()
      << " phase setting(s), " << config.trials << " trial(s) each, seed "
      << config.seed;
  if (config.detector_efficiency < 1.0)
    out << ", efficiency " << io::format_number(config.detector_efficiency)
        << (opt.correct ? " (corrected)" : "");
  out << "\n";
  for (const auto& summary : summaries)
    out << "  phase " << io::format_number(summary.phase) << ": accepted "
        << summary.accepted << " of " << summary.trials
        << " (acceptance probability "
        << io::format_number(summary.acceptance_probability) << ")\n";
  out << "  wrote " << counts_path.string() << ", " << histogram_path.string()
      << ", " << analytic_path.string() << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// analyze
// ---------------------------------------------------------------------------

struct AnalyzeOptions {
  std::string counts_file;
  std::string mode = "phase-dist";
  std::string scheme = "double-bs";
  std::string out_dir = ".";
  int lambda = 1;
  int n_level = 0;
  int n_max = -1;
  int grid = 512;
  int n0 = -1;
  double bs1_theta = kPi / 4;
  double alpha_mag = 1.0 / std::sqrt(2.0);
  bool print_json = false;
};

// One renormalized sample of the projected phase distribution.
struct PhaseSample {
  double theta = 0;
  double value = 0;
  double variance = 0;
  long long count = 0;
};

// Turns the per-setting counts into renormalized one-zero-pattern fractions
// at their sample angles. Rows whose pattern is not a one-zero pattern are
// ignored; a missing one-zero row counts as zero events.
std::vector<PhaseSample> pom_samples(const std::vector<io::CountRow>& rows,
                                     int modes) {
  std::vector<double> phases;
  for (const auto& row : rows) {
    bool known = false;
    for (const double phi : phases)
      if (std::abs(phi - row.phase) < 1e-9) {
        known = true;
        break;
      }
    if (!known) phases.push_back(row.phase);
  }

  std::vector<PhaseSample> samples;
  for (const double phi : phases) {
    std::vector<double> estimates(size_t(modes), 0.0);
    std::vector<long long> counts(size_t(modes), 0);
    double total = 0;
    long long accepted = 0;
    bool sampled = false;
    bool any = false;
    for (int m = 0; m < modes; ++m) {
      std::vector<int> pom_pattern(size_t(modes), 1);
      pom_pattern[size_t(m)] = 0;
      for (const auto& row : rows) {
        if (std::abs(row.phase - phi) >= 1e-9 || row.pattern != pom_pattern)
          continue;
        estimates[size_t(m)] = row.estimate();
        counts[size_t(m)] = row.count;
        if (row.trials > 0) sampled = true;
        any = true;
        break;
      }
      total += estimates[size_t(m)];
      accepted += counts[size_t(m)];
    }
    if (!any || total <= 0) continue;
    for (int m = 0; m < modes; ++m) {
      PhaseSample sample;
      sample.theta = wrap_two_pi(kTwoPi * double(m) / double(modes) + phi);
      sample.value = estimates[size_t(m)] / total;
      sample.count = counts[size_t(m)];
      sample.variance = (sampled && accepted > 0)
                            ? sample.value * (1.0 - sample.value) /
                                  double(accepted)
                            : 0.0;
      samples.push_back(sample);
    }
  }
  std::sort(samples.begin(), samples.end(),
            [](const PhaseSample& a, const PhaseSample& b) {
              return a.theta < b.theta;
            });
  return samples;
}

int analyze_phase_dist(const std::vector<io::CountRow>& rows,
                       const AnalyzeOptions& opt, const std::string& stem,
                       std::ostream& out) {
  const size_t modes = rows[0].pattern.size();
  for (const auto& row : rows)
    if (row.pattern.size() != modes)
      throw std::invalid_argument("counts file: inconsistent pattern lengths");
  if (modes < 2) throw std::invalid_argument("dimension mismatch");
  const int d = static_cast<int>(modes);
  const int n_max = d - 1;
  if (opt.grid < 2) throw std::invalid_argument("grid too small");

  const auto samples = pom_samples(rows, d);
  const int sample_count = static_cast<int>(samples.size());
  if (sample_count < 2 * d)
    throw std::invalid_argument(
        "insufficient phase settings: " + std::to_string(sample_count) +
        " distinct sample angle(s) for cutoff " + std::to_string(n_max) +
        ", need at least " + std::to_string(2 * d) +
        " (e.g. reference phase settings 0 and pi/" + std::to_string(d) + ")");

  // The quadrature below needs the sample angles to form one equally spaced
  // grid around the circle (any overall offset is fine).
  const double spacing = kTwoPi / double(sample_count);
  for (int j = 0; j < sample_count; ++j) {
    const double next =
        (j + 1 < sample_count) ? samples[size_t(j + 1)].theta
                               : samples[0].theta + kTwoPi;
    const double gap = next - samples[size_t(j)].theta;
    if (std::abs(gap - spacing) > 1e-9) {
      if (gap < 1e-9)
        throw std::invalid_argument(
            "duplicate sample angle theta=" +
            io::format_number(samples[size_t(j)].theta));
      throw std::invalid_argument(
          "sample angles are not equally spaced: gap between theta=" +
          io::format_number(samples[size_t(j)].theta) + " and theta=" +
          io::format_number(wrap_two_pi(next)) + " (expected spacing " +
          io::format_number(spacing) + ")");
    }
  }

  // Exponential moments alpha_q = (N+1)/M sum_m Pr_m e^{-iq theta_m}; exact
  // for signals truncated at N whenever M >= 2N+2 equally spaced samples.
  std::vector<Cd> alpha(size_t(n_max) + 1, Cd{0, 0});
  for (int q = 0; q <= n_max; ++q)
    for (const auto& sample : samples)
      alpha[size_t(q)] += double(n_max + 1) / double(sample_count) *
                          sample.value *
                          std::exp(Cd{0.0, -double(q) * sample.theta});

  std::vector<double> grid(size_t(opt.grid), 0.0);
  std::vector<double> density(size_t(opt.grid), 0.0);
  std::vector<double> density_stderr(size_t(opt.grid), 0.0);
  const double kernel_scale = double(n_max + 1) / (kTwoPi * double(sample_count));
  for (int g = 0; g < opt.grid; ++g) {
    const double theta = kTwoPi * double(g) / double(opt.grid);
    grid[size_t(g)] = theta;
    double value = alpha[0].real();
    for (int q = 1; q <= n_max; ++q)
      value += 2.0 * (alpha[size_t(q)] * std::exp(Cd{0.0, double(q) * theta}))
                         .real();
    density[size_t(g)] = value / kTwoPi;
    double variance = 0;
    for (const auto& sample : samples) {
      double kernel = 1.0;
      for (int n = 1; n <= n_max; ++n)
        kernel += 2.0 * std::cos(double(n) * (theta - sample.theta));
      variance += kernel * kernel * sample.variance;
    }
    density_stderr[size_t(g)] = kernel_scale * std::sqrt(variance);
  }

  double integral = 0;
  for (const double value : density) integral += value;
  integral *= kTwoPi / double(opt.grid);

  std::ostringstream csv;
  csv << "theta,density,stderr\n";
  for (int g = 0; g < opt.grid; ++g)
    csv << io::format_number(grid[size_t(g)]) << ','
        << io::format_number(density[size_t(g)]) << ','
        << io::format_number(density_stderr[size_t(g)]) << '\n';

  json sample_docs = json::array();
  for (const auto& sample : samples)
    sample_docs.push_back(json{{"theta", sample.theta},
                               {"probability", sample.value},
                               {"stderr", std::sqrt(sample.variance)},
                               {"count", sample.count}});
  json moment_docs = json::array();
  for (int q = 0; q <= n_max; ++q)
    moment_docs.push_back(
        json{{"q", q}, {"value", io::complex_to_json(alpha[size_t(q)])}});

  const auto csv_path = output_path(opt.out_dir, stem + "_phase_dist.csv");
  const auto json_path = output_path(opt.out_dir, stem + "_phase_dist.json");
  json doc{{"metadata", metadata("analyze")},
           {"mode", "phase-dist"},
           {"modes", d},
           {"n_max", n_max},
           {"grid", opt.grid},
           {"integral", integral},
           {"samples", std::move(sample_docs)},
           {"moments", std::move(moment_docs)},
           {"outputs", json{{"density_csv", csv_path.string()},
                            {"result_json", json_path.string()}}}};
  io::write_text_file(csv_path.string(), csv.str());
  io::write_text_file(json_path.string(), doc.dump(2) + "\n");

  if (opt.print_json) {
    out << doc.dump(2) << "\n";
    return kOk;
  }
  out << "analyze phase-dist: " << d << " modes (cutoff " << n_max << "), "
      << sample_count << " sample angles, integral "
      << io::format_number(integral) << "\n";
  out << "  wrote " << csv_path.string() << ", " << json_path.string() << "\n";
  return kOk;
}

EstimatorDesign<double> design_from_options(const AnalyzeOptions& opt) {
  EstimatorDesign<double> design;
  design.scheme = (opt.scheme == "sv") ? ElementScheme::steuernagel_vaccaro
                                       : ElementScheme::double_bs;
  design.bs1_theta = opt.bs1_theta;
  design.alpha_mag = opt.alpha_mag;
  design.n0 = opt.n0;
  return design;
}

const io::CountRow* find_row(const std::vector<io::CountRow>& rows,
                             const DetectionPattern& pattern, double phase) {
  for (const auto& row : rows)
    if (row.pattern == pattern.counts && std::abs(row.phase - phase) < 1e-9)
      return &row;
  return nullptr;
}

// Lists every (pattern, phase) pair required for levels 0..n_max that the
// counts file does not supply.
std::string missing_rows_text(const std::vector<io::CountRow>& rows,
                              const EstimatorDesign<double>& design, int lambda,
                              int level_min, int level_max) {
  const auto phases = element_phases<double>(lambda);
  std::string missing;
  for (int level = level_min; level <= level_max; ++level) {
    const auto pattern = element_pattern(design, level, lambda);
    for (const double phase : phases) {
      if (find_row(rows, pattern, phase)) continue;
      if (!missing.empty()) missing += ", ";
      missing += "pattern " + io::pattern_label(pattern.counts) + " at phase " +
                 io::format_number(phase);
    }
  }
  return missing;
}

// Statistical error of the four-phase combination sum_q w_q p_q / s with
// independent probability estimates: per-part variances add in quadrature
// with weights Re/Im(w_q / s)^2.
std::pair<double, double> element_variance(
    const std::vector<io::CountRow>& rows,
    const EstimatorDesign<double>& design, int level, int lambda) {
  const auto phases = element_phases<double>(lambda);
  const Cd scaling = element_scaling(design, level, lambda);
  const auto pattern = element_pattern(design, level, lambda);
  const std::array<Cd, 4> weights{Cd{1, 0}, Cd{0, -1}, Cd{-1, 0}, Cd{0, 1}};
  double var_re = 0, var_im = 0;
  for (int q = 0; q < 4; ++q) {
    const io::CountRow* row = find_row(rows, pattern, phases[size_t(q)]);
    if (!row) throw std::invalid_argument("missing phase setting");
    const Cd weight = weights[size_t(q)] / scaling;
    var_re += weight.real() * weight.real() * row->variance();
    var_im += weight.imag() * weight.imag() * row->variance();
  }
  return {var_re, var_im};
}

int analyze_elements(const std::vector<io::CountRow>& rows,
                     const AnalyzeOptions& opt, const std::string& stem,
                     std::ostream& out) {
  const auto design = design_from_options(opt);
  if (opt.lambda < 1) throw std::invalid_argument("lambda must be positive");

  std::vector<MeasuredProbability<double>> data;
  data.reserve(rows.size());
  for (const auto& row : rows)
    data.push_back(MeasuredProbability<double>{DetectionPattern{row.pattern},
                                               row.phase, row.estimate()});

  if (opt.mode == "dmelem") {
    const std::string missing = missing_rows_text(rows, design, opt.lambda,
                                                  opt.n_level, opt.n_level);
    if (!missing.empty())
      throw std::invalid_argument("insufficient phase settings; missing: " +
                                  missing);
    const Cd element =
        density_matrix_element(data, design, opt.n_level, opt.lambda);
    const auto [var_re, var_im] =
        element_variance(rows, design, opt.n_level, opt.lambda);
    const Cd scaling = element_scaling(design, opt.n_level, opt.lambda);
    const auto pattern = element_pattern(design, opt.n_level, opt.lambda);

    const auto json_path = output_path(opt.out_dir, stem + "_dmelem.json");
    json doc{{"metadata", metadata("analyze")},
             {"mode", "dmelem"},
             {"scheme", opt.scheme},
             {"lambda", opt.lambda},
             {"n_level", opt.n_level},
             {"pattern", io::pattern_label(pattern.counts)},
             {"scaling", io::complex_to_json(scaling)},
             {"element", json{{"re", element.real()},
                              {"im", element.imag()},
                              {"stderr_re", std::sqrt(var_re)},
                              {"stderr_im", std::sqrt(var_im)}}},
             {"outputs", json{{"result_json", json_path.string()}}}};
    io::write_text_file(json_path.string(), doc.dump(2) + "\n");

    if (opt.print_json) {
      out << doc.dump(2) << "\n";
      return kOk;
    }
    out << "analyze dmelem: rho[" << opt.n_level << ", "
        << (opt.n_level + opt.lambda) << "] = " << complex_text(element)
        << " +/- (" << io::format_number(std::sqrt(var_re)) << ", "
        << io::format_number(std::sqrt(var_im)) << ")\n";
    out << "  wrote " << json_path.string() << "\n";
    return kOk;
  }

  // moments
  int n_max = opt.n_max;
  if (n_max < 0) {
    for (int level = 0; level <= 64; ++level) {
      bool complete = false;
      try {
        complete = missing_rows_text(rows, design, opt.lambda, level, level)
                       .empty();
      } catch (const std::invalid_argument&) {
        complete = false;  // no valid pattern at this level for this design
      }
      if (!complete) break;
      n_max = level;
    }
    if (n_max < 0)
      throw std::invalid_argument(
          "insufficient phase settings; missing: " +
          missing_rows_text(rows, design, opt.lambda, 0, 0));
  } else {
    const std::string missing =
        missing_rows_text(rows, design, opt.lambda, 0, n_max);
    if (!missing.empty())
      throw std::invalid_argument("insufficient phase settings; missing: " +
                                  missing);
  }

  const auto [cos_mean, sin_mean] =
      estimate_trig_moment(data, opt.lambda, n_max, design);
  double var_cos = 0, var_sin = 0;
  for (int level = 0; level <= n_max; ++level) {
    const auto [var_re, var_im] =
        element_variance(rows, design, level, opt.lambda);
    var_cos += var_re;
    var_sin += var_im;
  }

  const auto json_path = output_path(opt.out_dir, stem + "_moments.json");
  json doc{{"metadata", metadata("analyze")},
           {"mode", "moments"},
           {"scheme", opt.scheme},
           {"lambda", opt.lambda},
           {"n_max", n_max},
           {"cos", json{{"value", cos_mean}, {"stderr", std::sqrt(var_cos)}}},
           {"sin", json{{"value", sin_mean}, {"stderr", std::sqrt(var_sin)}}},
           {"outputs", json{{"result_json", json_path.string()}}}};
  io::write_text_file(json_path.string(), doc.dump(2) + "\n");

  if (opt.print_json) {
    out << doc.dump(2) << "\n";
    return kOk;
  }
  out << "analyze moments (lambda = " << opt.lambda << ", levels 0.." << n_max
      << ")\n";
  out << "  <cos " << opt.lambda << "theta> = " << io::format_number(cos_mean)
      << " +/- " << io::format_number(std::sqrt(var_cos)) << "\n";
  out << "  <sin " << opt.lambda << "theta> = " << io::format_number(sin_mean)
      << " +/- " << io::format_number(std::sqrt(var_sin)) << "\n";
  out << "  wrote " << json_path.string() << "\n";
  return kOk;
}

int run_analyze(const AnalyzeOptions& opt, std::ostream& out) {
  const auto rows = io::parse_counts_csv(io::read_text_file(opt.counts_file));
  const std::string stem = file_stem(opt.counts_file);
  if (opt.mode == "phase-dist") return analyze_phase_dist(rows, opt, stem, out);
  return analyze_elements(rows, opt, stem, out);
}

}  // namespace

int run(const std::vector<std::string>& argv, std::ostream& out,
        std::ostream& err) {
  CLI::App app{
      "retro: retrodictive state engineering and phase measurement with "
      "linear multiports"};
  app.name("retro");
  app.require_subcommand(1);

  DesignOptions dopt;
  SimulateOptions sopt;
  AnalyzeOptions aopt;

  CLI::App* design_cmd = app.add_subcommand(
      "design",
      "Engineer the conditional preparation of a target signal state");
  design_cmd->add_option(
      "target", dopt.target_file,
      "Target state JSON file: {\"re\": [...], \"im\": [...]} "
      "(amplitudes by photon number)");
  design_cmd->add_option("--preset", dopt.preset,
                         "Named design scenario (see listing below)");
  design_cmd
      ->add_option("--unitary", dopt.unitary,
                   "Device for a file target: \"dft\", \"optimize\", or a "
                   "matrix/device JSON file")
      ->capture_default_str();
  design_cmd->add_option(
      "--pattern", dopt.pattern_text,
      "Detection pattern as comma-separated per-mode counts, e.g. \"0,1,1\" "
      "(default: one photon in every detector mode)");
  design_cmd
      ->add_option("--n", dopt.photons,
                   "Photon number parameter for presets that take one")
      ->capture_default_str();
  design_cmd->add_option("--out", dopt.out_dir, "Output directory")
      ->capture_default_str();
  design_cmd->add_flag("--json", dopt.print_json,
                       "Print the full design document as JSON");
  design_cmd->footer(preset_catalog());

  CLI::App* simulate_cmd = app.add_subcommand(
      "simulate", "Sample photocounts from a multiport experiment");
  simulate_cmd->add_option("config", sopt.config_file,
                           "Experiment config JSON file");
  simulate_cmd->add_option("--preset", sopt.preset,
                           "Named experiment (see listing below)");
  simulate_cmd->add_option(
      "--trials", sopt.trials,
      "Trials per phase setting (0 = analytic probabilities only)");
  simulate_cmd->add_option(
      "--seed", sopt.seed_text,
      "RNG seed; falls back to the config value, then env RETROPTICS_SEED");
  simulate_cmd->add_option("--eta", sopt.efficiency,
                           "Detector efficiency in (0, 1]");
  simulate_cmd->add_flag(
      "--correct-efficiency", sopt.correct,
      "Invert the detector response when building the histogram");
  simulate_cmd->add_option("--out", sopt.out_dir, "Output directory")
      ->capture_default_str();
  simulate_cmd->add_flag("--json", sopt.print_json,
                         "Print the analytic summary document as JSON");
  simulate_cmd->footer(
      "CSV columns -- counts: phase,pattern,count,trials,analytic_prob; "
      "histogram: theta,density,stderr,density_analytic,density_canonical,"
      "count,accepted.\n" +
      preset_catalog());

  CLI::App* analyze_cmd = app.add_subcommand(
      "analyze", "Estimate phase information from a counts CSV");
  analyze_cmd
      ->add_option("counts", aopt.counts_file,
                   "Counts CSV with columns phase,pattern,count,trials,"
                   "analytic_prob")
      ->required();
  analyze_cmd->add_option("--mode", aopt.mode, "phase-dist | moments | dmelem")
      ->check(CLI::IsMember({"phase-dist", "moments", "dmelem"}))
      ->capture_default_str();
  analyze_cmd
      ->add_option("--lambda", aopt.lambda,
                   "Coherence order: estimates involve rho_{N, N+lambda}")
      ->capture_default_str();
  analyze_cmd
      ->add_option("--n-level", aopt.n_level, "Row index N for --mode dmelem")
      ->capture_default_str();
  analyze_cmd->add_option(
      "--n-max", aopt.n_max,
      "Highest level N summed for --mode moments (default: all available)");
  analyze_cmd
      ->add_option("--grid", aopt.grid,
                   "Grid size of the reconstructed density")
      ->capture_default_str();
  analyze_cmd->add_option("--scheme", aopt.scheme, "double-bs | sv")
      ->check(CLI::IsMember({"double-bs", "sv"}))
      ->capture_default_str();
  analyze_cmd
      ->add_option("--bs1-theta", aopt.bs1_theta,
                   "Signal splitter angle used in the run (double-bs scheme)")
      ->capture_default_str();
  analyze_cmd
      ->add_option("--alpha", aopt.alpha_mag,
                   "Reference amplitude magnitude used in the run")
      ->capture_default_str();
  analyze_cmd->add_option(
      "--n0", aopt.n0,
      "Detector-0 count convention (default: scheme-specific choice)");
  analyze_cmd->add_option("--out", aopt.out_dir, "Output directory")
      ->capture_default_str();
  analyze_cmd->add_flag("--json", aopt.print_json,
                        "Print the result document as JSON");
  analyze_cmd->footer(
      "Input CSV columns: phase,pattern,count,trials,analytic_prob (rows with "
      "trials=0 are exact probabilities).\n"
      "phase-dist writes theta,density,stderr and needs the one-zero patterns "
      "of at least two reference settings spaced by pi/modes (2N+2 samples).\n"
      "moments/dmelem need the element pattern at the four phases q*pi/"
      "(2*lambda); with lambda > 1 the double-bs counts must come from the "
      "phase-averaged reference protocol (exact trials=0 tables encode it "
      "directly).");

  std::vector<std::string> args(argv.rbegin(), argv.rend());
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUserError;
  }
  dopt.unitary_given = design_cmd->count("--unitary") > 0;

  try {
    if (app.got_subcommand(design_cmd)) return run_design(dopt, out);
    if (app.got_subcommand(simulate_cmd)) return run_simulate(sopt, out);
    if (app.got_subcommand(analyze_cmd)) return run_analyze(aopt, out);
    err << "error: no command selected\n";
    return kUserError;
  } catch (const json::exception& e) {
    err << "error: invalid JSON input: " << e.what() << "\n";
    return kUserError;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kUserError;
  } catch (const std::domain_error& e) {
    err << "error: " << e.what() << "\n";
    return kUserError;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kInternalError;
  }
}

}  // namespace retroptics::cli
