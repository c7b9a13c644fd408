#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "repfrechet/io.hpp"

using namespace repfrechet;
namespace fs = std::filesystem;

namespace {

const fs::path kData = REPFRECHET_TEST_DATA;
const std::string kCli = REPFRECHET_CLI;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

// Runs the CLI from the data directory so relative input paths echo identically.
CliRun cli(const std::string& args) {
  const fs::path tmp = fs::temp_directory_path() / ("repfrechet_cli_" + std::to_string(::getpid()));
  fs::create_directories(tmp);
  const std::string cmd = "cd '" + kData.string() + "' && '" + kCli + "' " + args + " > '" + (tmp / "out").string() +
                          "' 2> '" + (tmp / "err").string() + "'";
  const int status = std::system(cmd.c_str());
  CliRun r{WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(tmp / "out"), slurp(tmp / "err")};
  fs::remove_all(tmp);
  return r;
}

bool same_dataset(const Dataset& a, const Dataset& b) {
  if (a.kind != b.kind || a.groups.size() != b.groups.size() || a.grid_size != b.grid_size || a.support != b.support) return false;
  if (static_cast<bool>(a.distances) != static_cast<bool>(b.distances)) return false;
  if (a.distances && *a.distances != *b.distances) return false;
  for (std::size_t j = 0; j < a.groups.size(); ++j) {
    const auto &ga = a.groups[j], &gb = b.groups[j];
    if (ga.name != gb.name || ga.subjects.size() != gb.subjects.size()) return false;
    for (std::size_t i = 0; i < ga.subjects.size(); ++i) {
      const auto &sa = ga.subjects[i], &sb = gb.subjects[i];
      if (sa.id != sb.id || sa.observations.size() != sb.observations.size()) return false;
      for (std::size_t l = 0; l < sa.observations.size(); ++l)
        if (schema_of(sa.observations[l]) != schema_of(sb.observations[l]) || compare(sa.observations[l], sb.observations[l]) != 0)
          return false;
    }
  }
  return true;
}

}  // namespace

TEST(LoadDataset, EveryFixtureKind) {
  EXPECT_EQ(load_dataset(kData / "identical_groups.json").kind, ObjectKind::vector);
  EXPECT_EQ(load_dataset(kData / "laplacian.json").kind, ObjectKind::laplacian);
  EXPECT_EQ(load_dataset(kData / "composite.json").kind, ObjectKind::composite);
  const Dataset p = load_dataset(kData / "precomputed.json");
  EXPECT_EQ(p.kind, ObjectKind::precomputed);
  ASSERT_TRUE(p.distances);
  EXPECT_EQ(p.distances->rows(), 10);
}

TEST(LoadDataset, SamplesMatchDirectConversion) {
  const Dataset d = load_dataset(kData / "distribution_samples.json");
  ASSERT_EQ(d.grid_size, 8);
  const std::vector<double> s{0.1, -0.4, 1.2, 0.3, 0.0};
  const auto direct = quantile_from_samples(s, 8);
  EXPECT_EQ(d.groups[0].subjects[0].observations[0].as<QuantileDistribution>().values(), direct.values());
}

TEST(LoadDataset, SchemaErrorsCarryJsonPath) {
  try {
    load_dataset(kData / "bad_schema.json");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("$.groups[0].subjects[0].observations[1]"), std::string::npos) << e.what();
  }
  EXPECT_THROW(dataset_from_json(Json::parse(R"({"groups": []})")), ParseError);
  EXPECT_THROW(dataset_from_json(Json::parse(R"({"kind": "tensor", "groups": []})")), ParseError);
  EXPECT_THROW(dataset_from_json(Json::parse(R"({"kind": "vector", "groups": [{"subjects": [{"observations": [{"vector": [1, "x"]}]}]}]})")), ParseError);
  EXPECT_THROW(load_dataset(kData / "does_not_exist.json"), ParseError);
}

TEST(LoadDataset, InvariantErrorsNameTheSubject) {
  try {
    load_dataset(kData / "nonmonotone_quantiles.json");
    FAIL();
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("group 'g1'"), std::string::npos) << msg;
    EXPECT_NE(msg.find("subject 's1'"), std::string::npos) << msg;
    EXPECT_NE(msg.find("observation 1"), std::string::npos) << msg;
  }
}

TEST(LoadDataset, MixedKindsRejected) {
  const auto doc = Json::parse(R"({"kind": "vector", "groups": [
    {"subjects": [{"observations": [{"vector": [1]}, {"quantiles": [1]}]}]},
    {"subjects": [{"observations": [{"vector": [1]}]}]}]})");
  EXPECT_THROW(dataset_from_json(doc), Error);
}

TEST(LoadDataset, SymmetrizeOption) {
  const auto doc = Json::parse(R"({"kind": "laplacian", "groups": [
    {"subjects": [{"observations": [{"laplacian": [[1, -1.000001], [-0.999999, 1]]}]}]},
    {"subjects": [{"observations": [{"laplacian": [[1, -1], [-1, 1]]}]}]}]})");
  EXPECT_THROW(dataset_from_json(doc), ValidationError);
  EXPECT_NO_THROW(dataset_from_json(doc, {true}));
}

TEST(RoundTrip, SaveThenLoadIsIdentical) {
  for (const char* name : {"identical_groups.json", "laplacian.json", "composite.json", "precomputed.json", "distribution_samples.json"}) {
    const Dataset d = load_dataset(kData / name);
    const Dataset back = dataset_from_json(Json::parse(dataset_to_json(d).dump()));
    EXPECT_TRUE(same_dataset(d, back)) << name;
  }
}

TEST(RoundTrip, TestReport) {
  const Dataset d = load_dataset(kData / "laplacian.json");
  const TestResult r = run_test(d);
  const TestResult back = test_result_from_json(Json::parse(test_result_to_json(r, {"test", 1, {}}).dump()));
  EXPECT_EQ(back.p_value, r.p_value);
  EXPECT_EQ(back.components.Q_n, r.components.Q_n);
  EXPECT_EQ(back.components.U_n, r.components.U_n);
  EXPECT_EQ(back.calibration.eigenvalues, r.calibration.eigenvalues);
  EXPECT_EQ(back.calibration.matrix, r.calibration.matrix);
  ASSERT_EQ(back.groups.size(), r.groups.size());
  EXPECT_EQ(back.groups[1].sigma2.value, r.groups[1].sigma2.value);
  EXPECT_EQ(back.critical_value, r.critical_value);
  EXPECT_EQ(test_result_to_json(back, {"test", 1, {}}).dump(), test_result_to_json(r, {"test", 1, {}}).dump());
}

TEST(VectorCsv, GroupsAndOrdersRepeats) {
  const Dataset d = load_vector_csv(kData / "vectors.csv");
  ASSERT_EQ(d.groups.size(), 2u);
  EXPECT_EQ(d.groups[0].name, "ctrl");
  ASSERT_EQ(d.groups[0].subjects.size(), 8u);
  EXPECT_EQ(d.groups[0].subjects[0].observations[0].as<EuclideanVector>().coords()[0], 0.75);
  EXPECT_EQ(d.groups[1].subjects[2].repeats(), 3);
}

TEST(Format, SeventeenDigits) {
  EXPECT_EQ(format_double(0.1), "0.10000000000000001");
  EXPECT_EQ(std::stod(format_double(1.0 / 3.0)), 1.0 / 3.0);
}

TEST(Cli, IdenticalGroupsGivePOne) {
  const CliRun r = cli("test --input identical_groups.json");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto doc = Json::parse(r.out);
  EXPECT_EQ(doc["result"]["p_value"].get<double>(), 1.0);
  EXPECT_EQ(doc["version"].get<std::string>(), version_string());
  EXPECT_TRUE(doc.contains("seed"));
  EXPECT_TRUE(doc["config"].contains("alpha"));
}

TEST(Cli, SingleRepeatsExitThree) {
  const CliRun r = cli("test --input single_repeats.json");
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("r_i >= 2"), std::string::npos) << r.err;
  EXPECT_EQ(cli("test --input single_repeats.json --no-within").code, 0);
  EXPECT_EQ(cli("test --input minimal.json").code, 3);
}

TEST(Cli, InputErrorsExitTwo) {
  EXPECT_EQ(cli("test --input nonmonotone_quantiles.json").code, 2);
  const CliRun r = cli("test --input bad_schema.json");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("$.groups[0]"), std::string::npos);
}

TEST(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(cli("test").code, 1);
  EXPECT_EQ(cli("frobnicate").code, 1);
  EXPECT_EQ(cli("test --input identical_groups.json --format xml").code, 1);
  EXPECT_EQ(cli("simulate --iota 2 --reps 1").code, 1);
  EXPECT_EQ(cli("simulate --reps 0").code, 1);
}

TEST(Cli, GoldenReport) {
  const CliRun r = cli("test --input laplacian.json --seed 7");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, slurp(kData / "golden" / "laplacian_report.json"));
}

TEST(Cli, CsvFormat) {
  const CliRun r = cli("test --input laplacian.json --format csv");
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(r.out.rfind("field,value\n", 0), 0u);
  EXPECT_NE(r.out.find("\np_value,"), std::string::npos);
}

TEST(Cli, CsvInput) {
  const CliRun r = cli("test --input vectors.csv");
  EXPECT_EQ(r.code, 0) << r.err;
}

TEST(Cli, SimulateSingleRowAndDeterministic) {
  const CliRun a = cli("simulate --scenario vector --n1 20 --n2 20 --reps 1 --seed 3");
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(a.out.rfind("scenario,param_name,param_value,replicates,rejections,rate,se,seed\n", 0), 0u);
  EXPECT_EQ(std::count(a.out.begin(), a.out.end(), '\n'), 2);
  const CliRun b = cli("simulate --scenario vector --n1 20 --n2 20 --reps 3 --seed 3 --threads 2");
  const CliRun c = cli("simulate --scenario vector --n1 20 --n2 20 --reps 3 --seed 3 --threads 1");
  EXPECT_EQ(b.out, c.out);
}

TEST(Cli, SimulateSweep) {
  const CliRun r = cli("simulate --scenario graph --n1 15 --n2 15 --r-spec 2 --reps 2 --vary tau --values 3,4,5");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 4);
  EXPECT_NE(r.out.find("network,tau,5,2,"), std::string::npos);
}

TEST(Cli, BaselineEmptiedGroupExitsTwo) {
  const CliRun r = cli("baseline --input laplacian.json --balanced-r 3 --resamples 2");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("'A'"), std::string::npos) << r.err;
}

TEST(Cli, BaselineReportRecomputes) {
  const CliRun r = cli("baseline --input distribution_samples.json --balanced-r 2 --resamples 5 --seed 4");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto doc = Json::parse(r.out);
  const auto p = doc["result"]["p_values"].get<std::vector<double>>();
  ASSERT_EQ(p.size(), 5u);
  double theta = 0;
  for (double x : p) theta += std::atanh(std::min(x, 1 - 1e-12));
  theta /= 5;
  EXPECT_NEAR(doc["result"]["theta"].get<double>(), theta, 1e-12);
  EXPECT_NEAR(doc["result"]["overall_p"].get<double>(), std::tanh(theta), 1e-12);
}
