// Command-line front end: test, simulate, baseline.
//
// Exit codes: 0 success, 1 usage, 2 invalid input (parse, shape, validation,
// domain), 3 calibration failure.

#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "repfrechet/io.hpp"

namespace rf = repfrechet;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitInput = 2;
constexpr int kExitCalibration = 3;

int exit_code_for(const rf::Error& e) {
  switch (e.code()) {
    case rf::ErrorCode::calibration:
    case rf::ErrorCode::numeric:
      return kExitCalibration;
    default:
      return kExitInput;
  }
}

int default_threads() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

rf::Dataset read_input(const std::string& path, bool symmetrize) {
  if (path.size() > 4 && path.substr(path.size() - 4) == ".csv") return rf::load_vector_csv(path);
  return rf::load_dataset(path, {symmetrize});
}

struct TestArgs {
  std::string input;
  double alpha = 0.05;
  std::string pvalue_method = "quadrature";
  std::int64_t mc_draws = 1'000'000;
  std::uint64_t seed = 20240917;
  bool no_within = false;
  bool symmetrize = false;
  std::string output = "-";
  std::string format = "json";
  int threads = default_threads();
};

int cmd_test(const TestArgs& a) {
  const rf::Dataset data = read_input(a.input, a.symmetrize);
  rf::TestOptions opts;
  opts.alpha = a.alpha;
  opts.within = !a.no_within;
  opts.pvalue_method = a.pvalue_method == "mc" ? rf::SfMethod::monte_carlo : rf::SfMethod::quadrature;
  opts.mc_draws = a.mc_draws;
  opts.seed = a.seed;
  const rf::TestResult result = rf::run_test(data, opts);
  if (a.format == "csv") {
    rf::write_text(a.output, rf::test_result_csv(result));
  } else {
    rf::ReportContext ctx{"test", a.seed,
                          rf::Json{{"input", a.input},
                                   {"alpha", a.alpha},
                                   {"pvalue_method", a.pvalue_method},
                                   {"mc_draws", a.mc_draws},
                                   {"within", !a.no_within},
                                   {"symmetrize", a.symmetrize}}};
    rf::write_text(a.output, rf::test_result_to_json(result, ctx).dump(2) + "\n");
  }
  return kExitOk;
}

struct SimulateArgs {
  std::string scenario = "dist";
  rf::Index n1 = 100, n2 = 100;
  std::string r1 = "2", r2;
  double iota = 0.5, beta = 1.0, eps = 1.0;
  rf::Index tau = 3;
  std::optional<double> iota2, beta2, eps2;
  std::optional<rf::Index> tau2;
  rf::Index nodes = 10;
  rf::Index grid_size = rf::kDefaultGridSize;
  double alpha = 0.05;
  rf::Index reps = 500;
  std::uint64_t seed = 1;
  std::string out = "-";
  std::string json_out;
  std::string method = "q";
  std::string vary;
  std::vector<std::string> values;
  int threads = default_threads();
};

rf::ScenarioConfig scenario_config(const SimulateArgs& a) {
  rf::ScenarioConfig cfg;
  cfg.kind = rf::scenario_from_string(a.scenario);
  rf::GroupParams g1{a.n1, rf::RepeatSpec::parse(a.r1), a.iota, a.beta, a.eps, a.tau};
  rf::GroupParams g2{a.n2, rf::RepeatSpec::parse(a.r2.empty() ? a.r1 : a.r2), a.iota2.value_or(a.iota),
                     a.beta2.value_or(a.beta), a.eps2.value_or(a.eps), a.tau2.value_or(a.tau)};
  cfg.groups = {g1, g2};
  cfg.nodes = a.nodes;
  cfg.grid_size = a.grid_size;
  cfg.alpha = a.alpha;
  cfg.replicates = a.reps;
  cfg.seed = a.seed;
  cfg.run_q = a.method == "q" || a.method == "both";
  cfg.run_af = a.method == "af" || a.method == "both";
  cfg.threads = a.threads;
  return cfg;
}

// Sweep values apply to group 2.
void apply_sweep(rf::ScenarioConfig& cfg, const std::string& name, const std::string& value) {
  auto& g = cfg.groups[1];
  cfg.param_name = name;
  if (name == "r") {
    g.repeats = rf::RepeatSpec::parse(value);
    cfg.param_value = g.repeats.mixed ? 0.0 : static_cast<double>(g.repeats.fixed);
    return;
  }
  double v = 0.0;
  try {
    std::size_t used = 0;
    v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
  } catch (const std::exception&) {
    throw CLI::ValidationError("--values", "not a number: " + value);
  }
  cfg.param_value = v;
  if (name == "iota") g.iota = v;
  else if (name == "beta") g.beta = v;
  else if (name == "eps") g.eps = v;
  else if (name == "tau") {
    if (v != std::floor(v)) throw CLI::ValidationError("--values", "tau must be an integer");
    g.tau = static_cast<rf::Index>(v);
  } else {
    throw CLI::ValidationError("--vary", "unknown parameter " + name);
  }
}

int cmd_simulate(const SimulateArgs& a) {
  std::vector<rf::ScenarioConfig> configs;
  try {
    if (a.vary.empty()) {
      configs.push_back(scenario_config(a));
    } else {
      if (a.values.empty()) throw CLI::ValidationError("--values", "required with --vary");
      for (const auto& v : a.values) {
        auto cfg = scenario_config(a);
        apply_sweep(cfg, a.vary, v);
        configs.push_back(std::move(cfg));
      }
    }
    for (const auto& cfg : configs) cfg.validate();
  } catch (const rf::DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  std::string csv = rf::study_csv_header();
  rf::Json all = rf::Json::array();
  for (const auto& cfg : configs) {
    const rf::StudyReport report = rf::run_study(cfg);
    csv += rf::study_csv_rows(report);
    if (!a.json_out.empty()) all.push_back(rf::study_to_json(report));
    if (report.redraws > 0)
      std::cerr << "note: " << report.redraws << " repeat-count draw(s) had no subject with r >= 2 and were redrawn\n";
  }
  rf::write_text(a.out, csv);
  if (!a.json_out.empty()) rf::write_text(a.json_out, (all.size() == 1 ? all[0] : all).dump(2) + "\n");
  return kExitOk;
}

struct BaselineArgs {
  std::string input;
  std::string method = "af";
  rf::Index balanced_r = 2;
  rf::Index resamples = 500;
  std::uint64_t seed = 1;
  double alpha = 0.05;
  bool symmetrize = false;
  std::string output = "-";
  std::string format = "json";
  int threads = default_threads();
};

int cmd_baseline(const BaselineArgs& a) {
  const rf::Dataset data = read_input(a.input, a.symmetrize);
  rf::BaselineOptions opts;
  opts.plan = {a.balanced_r, a.resamples, a.seed};
  opts.test.alpha = a.alpha;
  opts.threads = a.threads;
  const rf::BaselineReport report = rf::run_balanced_af(data, opts);
  if (a.format == "csv") {
    rf::write_text(a.output, rf::baseline_csv(report));
  } else {
    rf::ReportContext ctx{"baseline", a.seed,
                          rf::Json{{"input", a.input},
                                   {"method", a.method},
                                   {"balanced_r", a.balanced_r},
                                   {"resamples", a.resamples},
                                   {"alpha", a.alpha}}};
    rf::write_text(a.output, rf::baseline_to_json(report, ctx).dump(2) + "\n");
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fréchet-type tests for repeated random objects in metric spaces"};
  app.set_version_flag("--version", std::string("repfrechet ") + rf::version_string());
  app.require_subcommand(1);

  TestArgs ta;
  auto* test = app.add_subcommand("test", "Test equality of k populations of repeated random objects");
  test->add_option("--input,-i", ta.input, "Dataset file (.json, or .csv for long-format vectors)")->required()->check(CLI::ExistingFile);
  test->add_option("--alpha", ta.alpha, "Significance level")->check(CLI::Range(0.0, 1.0))->capture_default_str();
  test->add_option("--pvalue-method", ta.pvalue_method)->check(CLI::IsMember({"quadrature", "mc"}))->capture_default_str();
  test->add_option("--mc-draws", ta.mc_draws)->check(CLI::PositiveNumber)->capture_default_str();
  test->add_option("--seed", ta.seed)->capture_default_str();
  test->add_flag("--no-within", ta.no_within, "Drop the within-subject component");
  test->add_flag("--symmetrize", ta.symmetrize, "Symmetrize Laplacians before validation");
  test->add_option("--output,-o", ta.output, "Report path ('-' for stdout)")->capture_default_str();
  test->add_option("--format", ta.format)->check(CLI::IsMember({"json", "csv"}))->capture_default_str();
  test->add_option("--threads", ta.threads)->check(CLI::PositiveNumber);

  SimulateArgs sa;
  auto* sim = app.add_subcommand("simulate", "Rejection rates over simulated replicates");
  sim->add_option("--scenario", sa.scenario)->check(CLI::IsMember({"dist", "distributional", "graph", "network", "vector", "composite"}))->capture_default_str();
  sim->add_option("--n1", sa.n1)->capture_default_str();
  sim->add_option("--n2", sa.n2)->capture_default_str();
  sim->add_option("--r-spec,--r1", sa.r1, "Repeats per subject: integer or 'mixed' (uniform on 1..3)")->capture_default_str();
  sim->add_option("--r2", sa.r2, "Group-2 repeat spec (default: same as group 1)");
  sim->add_option("--iota", sa.iota)->capture_default_str();
  sim->add_option("--beta", sa.beta)->capture_default_str();
  sim->add_option("--eps", sa.eps)->capture_default_str();
  sim->add_option("--tau", sa.tau)->capture_default_str();
  sim->add_option("--iota2", sa.iota2, "Group-2 override");
  sim->add_option("--beta2", sa.beta2, "Group-2 override");
  sim->add_option("--eps2", sa.eps2, "Group-2 override");
  sim->add_option("--tau2", sa.tau2, "Group-2 override");
  sim->add_option("--nodes", sa.nodes)->capture_default_str();
  sim->add_option("--grid-size", sa.grid_size)->capture_default_str();
  sim->add_option("--alpha", sa.alpha)->capture_default_str();
  sim->add_option("--reps", sa.reps)->capture_default_str();
  sim->add_option("--seed", sa.seed)->capture_default_str();
  sim->add_option("--out,-o", sa.out, "CSV path ('-' for stdout)")->capture_default_str();
  sim->add_option("--json-out", sa.json_out, "Also write the full report (with p-values) as JSON");
  sim->add_option("--method", sa.method)->check(CLI::IsMember({"q", "af", "both"}))->capture_default_str();
  sim->add_option("--vary", sa.vary, "Group-2 parameter to sweep: iota, beta, eps, tau or r")->check(CLI::IsMember({"iota", "beta", "eps", "tau", "r"}));
  sim->add_option("--values", sa.values, "Sweep values")->delimiter(',');
  sim->add_option("--threads", sa.threads)->check(CLI::PositiveNumber);

  BaselineArgs ba;
  auto* base = app.add_subcommand("baseline", "Balanced-resampling subject-level test with p-value aggregation");
  base->add_option("--input,-i", ba.input)->required()->check(CLI::ExistingFile);
  base->add_option("--method", ba.method)->check(CLI::IsMember({"af"}))->capture_default_str();
  base->add_option("--balanced-r", ba.balanced_r)->check(CLI::PositiveNumber)->capture_default_str();
  base->add_option("--resamples", ba.resamples)->check(CLI::PositiveNumber)->capture_default_str();
  base->add_option("--seed", ba.seed)->capture_default_str();
  base->add_option("--alpha", ba.alpha)->check(CLI::Range(0.0, 1.0))->capture_default_str();
  base->add_flag("--symmetrize", ba.symmetrize);
  base->add_option("--output,-o", ba.output)->capture_default_str();
  base->add_option("--format", ba.format)->check(CLI::IsMember({"json", "csv"}))->capture_default_str();
  base->add_option("--threads", ba.threads)->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (test->parsed()) return cmd_test(ta);
    if (sim->parsed()) return cmd_simulate(sa);
    if (base->parsed()) return cmd_baseline(ba);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const rf::Error& e) {
    std::cerr << "error [" << rf::to_string(e.code()) << "]: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitUsage;
}
