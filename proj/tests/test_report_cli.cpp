#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "vacfilter/cli.hpp"
#include "vacfilter/report.hpp"

namespace vacfilter {
namespace {

Table sample_table() {
  Table t{"demo", {"x", "label", "ok"}, {}};
  t.add_row({0.1, "a", true});
  t.add_row({1.0 / 3.0, "b", nullptr});
  return t;
}

TEST(Table, RowWidthChecked) {
  Table t = sample_table();
  EXPECT_THROW(t.add_row({1.0}), std::invalid_argument);
  EXPECT_EQ(t.column("label"), 1u);
  EXPECT_THROW(t.column("missing"), std::out_of_range);
}

TEST(Csv, HeaderAndRoundTripPrecision) {
  std::ostringstream os;
  write_csv(os, sample_table(), Provenance{"demo run", 7, default_conventions()});
  const std::string s = os.str();
  EXPECT_NE(s.find("# table: demo"), std::string::npos);
  EXPECT_NE(s.find("# seed: 7"), std::string::npos);
  EXPECT_NE(s.find("\nx,label,ok\n"), std::string::npos);
  const auto pos = s.find("\n0.33333");
  ASSERT_NE(pos, std::string::npos);
  const double back = std::stod(s.substr(pos + 1));
  EXPECT_EQ(back, 1.0 / 3.0);
}

TEST(Json, DocumentValidatesAndRoundTrips) {
  const auto doc = make_document("demo", Provenance{"demo run", std::nullopt, default_conventions()},
                                 {sample_table()}, {{"answer", 42}});
  EXPECT_TRUE(validate_document(doc).empty());
  EXPECT_EQ(doc["schema_version"], kJsonSchemaVersion);
  const Table back = table_from_document(doc, "demo");
  EXPECT_EQ(back.columns, sample_table().columns);
  EXPECT_EQ(back.rows, sample_table().rows);
}

TEST(Json, ValidationReportsProblems) {
  auto doc = make_document("demo", Provenance{"x", 1, {}}, {sample_table()});
  doc["schema_version"] = 99;
  doc["tables"]["demo"]["rows"][0].erase(0);
  EXPECT_GE(validate_document(doc).size(), 2u);
}

int run_cli(const std::vector<std::string>& args, std::string* out_text = nullptr) {
  std::ostringstream out;
  std::ostringstream err;
  const int rc = cli::run(args, out, err);
  if (out_text) *out_text = out.str();
  return rc;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override { unsetenv("VACFILTER_CONFIG"); }
  void TearDown() override { unsetenv("VACFILTER_CONFIG"); }

  std::string write_config(const std::string& body) {
    const auto path = std::filesystem::temp_directory_path() /
                      ("vacfilter_cfg_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
                       ::testing::UnitTest::GetInstance()->current_test_info()->name() + ".cfg");
    std::ofstream(path) << body;
    return path.string();
  }
};

TEST_F(Cli, AcceptanceCsv) {
  std::string out;
  ASSERT_EQ(run_cli({"acceptance", "--grid", "0,1.65"}, &out), cli::kExitOk);
  EXPECT_NE(out.find("# command:"), std::string::npos);
  EXPECT_NE(out.find("0.80"), std::string::npos);
}

TEST_F(Cli, JsonOutputValidates) {
  std::string out;
  ASSERT_EQ(run_cli({"error", "--format", "json"}, &out), cli::kExitOk);
  const auto doc = nlohmann::json::parse(out);
  EXPECT_TRUE(validate_document(doc).empty());
}

TEST_F(Cli, InvalidInputExitCode) {
  EXPECT_EQ(run_cli({"gain", "--p", "1.5"}), cli::kExitValidation);
  EXPECT_EQ(run_cli({"acceptance", "--detector", "laser"}), cli::kExitValidation);
  EXPECT_EQ(run_cli({"no-such-command"}), cli::kExitValidation);
}

TEST_F(Cli, NumericalFailureExitCode) {
  // An ideal filter never clicks on vacuum, so there is no conditioned state.
  EXPECT_EQ(run_cli({"qkd", "keyrate", "--V", "1", "--eta", "1", "--pd", "0"}), cli::kExitNumerical);
}

TEST_F(Cli, ConfigFileFillsUnsetOptions) {
  const std::string path = write_config("# comment\n\nformat = json\ntrials = 2000\nseed = 3\n");
  setenv("VACFILTER_CONFIG", path.c_str(), 1);
  std::string out;
  ASSERT_EQ(run_cli({"simulate", "--grid", "1.0", "--detector", "apd"}, &out), cli::kExitOk);
  const auto doc = nlohmann::json::parse(out);
  EXPECT_EQ(doc["provenance"]["seed"], 3);
  std::string csv;
  ASSERT_EQ(run_cli({"simulate", "--grid", "1.0", "--detector", "apd", "--format", "csv"}, &csv), cli::kExitOk);
  EXPECT_NE(csv.find("# seed: 3"), std::string::npos);
  std::filesystem::remove(path);
}

TEST_F(Cli, UnknownConfigKeyRejected) {
  const std::string path = write_config("colour = blue\n");
  setenv("VACFILTER_CONFIG", path.c_str(), 1);
  EXPECT_EQ(run_cli({"error"}), cli::kExitValidation);
  std::filesystem::remove(path);
}

TEST_F(Cli, MissingConfigFileRejected) {
  setenv("VACFILTER_CONFIG", "/nonexistent/vacfilter.cfg", 1);
  EXPECT_EQ(run_cli({"error"}), cli::kExitValidation);
}

TEST_F(Cli, SimulationIsReproducible) {
  std::string a;
  std::string b;
  ASSERT_EQ(run_cli({"simulate", "--grid", "0.8", "--trials", "5000", "--seed", "9", "--workers", "1"}, &a),
            cli::kExitOk);
  ASSERT_EQ(run_cli({"simulate", "--grid", "0.8", "--trials", "5000", "--seed", "9", "--workers", "3"}, &b),
            cli::kExitOk);
  // The command line differs, the data rows must not.
  const auto data = [](const std::string& s) {
    const auto begin = s.find("\ndetector,");
    return s.substr(begin, s.find("\n\n", begin) - begin);
  };
  EXPECT_EQ(data(a), data(b));
}

TEST_F(Cli, OracleReportsAgreement) {
  std::string out;
  ASSERT_EQ(run_cli({"oracle", "--case", "tmsv-tap", "--cutoff", "20", "--format", "json"}, &out), cli::kExitOk);
  const auto doc = nlohmann::json::parse(out);
  EXPECT_TRUE(validate_document(doc).empty());
}

}  // namespace
}  // namespace vacfilter
