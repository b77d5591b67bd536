#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <qmeas/qmeas.hpp>

namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path fresh_root() {
  char tmpl[] = "/tmp/qmeas_cli_XXXXXX";
  char* dir = mkdtemp(tmpl);
  REQUIRE(dir != nullptr);
  return fs::path(dir);
}

CliResult run_cli(const fs::path& root, const std::string& args) {
  const fs::path out = root / "stdout.txt";
  const fs::path err = root / "stderr.txt";
  std::ostringstream cmd;
  cmd << "QMEAS_OUTPUT_ROOT='" << root.string() << "' '" << QMEAS_CLI_PATH << "' "
      << args << " >'" << out.string() << "' 2>'" << err.string() << "'";
  const int rc = std::system(cmd.str().c_str());
  CliResult r;
  r.code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  r.out = read_file(out);
  r.err = read_file(err);
  return r;
}

std::string shipped(const std::string& name) {
  return std::string(QMEAS_CONFIG_DIR) + "/" + name;
}

fs::path write_json(const fs::path& root, const std::string& name,
                    const qmeas::Json& j) {
  const fs::path p = root / name;
  std::ofstream out(p);
  out << j.dump(2) << "\n";
  return p;
}

qmeas::Json load_json(const std::string& path) {
  std::ifstream in(path);
  qmeas::Json j;
  in >> j;
  return j;
}

}  // namespace

TEST_CASE("every shipped config validates") {
  const fs::path root = fresh_root();
  for (const char* name : {"weak_re.json", "weak_im.json", "wavefunction.json",
                           "wavefunction_fail.json", "phase_space.json"}) {
    const CliResult r = run_cli(root, "validate '" + shipped(name) + "'");
    INFO(name << ": " << r.err);
    REQUIRE(r.code == 0);
    REQUIRE(r.out.find("config ok") != std::string::npos);
  }
}

TEST_CASE("weak-value run writes a record that matches the analytic value") {
  const fs::path root = fresh_root();
  const CliResult r = run_cli(root, "run '" + shipped("weak_re.json") + "'");
  INFO(r.err);
  REQUIRE(r.code == 0);
  REQUIRE(r.out.find("record.json") != std::string::npos);

  const fs::path record_path = root / "weak-re" / "record.json";
  REQUIRE(fs::exists(record_path));
  const qmeas::RunRecord record = qmeas::load_record(record_path.string());
  REQUIRE(record.version == qmeas::kVersion);
  REQUIRE(record.wall_seconds > 0.0);

  const qmeas::Json& p = record.payload;
  REQUIRE(p.at("target_part").get<std::string>() == "re");
  REQUIRE(p.at("series").size() == 4);
  const double exact = p.at("weak_value")[0].get<double>();
  REQUIRE(std::abs(p.at("extrapolated").get<double>() - exact) <= 1e-3);
  REQUIRE(p.at("residual").get<double>() < 1e-4);

  const fs::path csv = root / "weak-re" / "series.csv";
  REQUIRE(fs::exists(csv));
  const std::string text = read_file(csv);
  REQUIRE(text.rfind("lambda,conditional_average", 0) == 0);
  REQUIRE(std::count(text.begin(), text.end(), '\n') == 5);

  // The stored config reparses to itself.
  const qmeas::ExperimentConfig cfg = qmeas::parse_config(record.config);
  REQUIRE(qmeas::config_to_json(cfg) == record.config);
}

TEST_CASE("repeated runs are deterministic") {
  const fs::path root_a = fresh_root();
  const fs::path root_b = fresh_root();
  REQUIRE(run_cli(root_a, "run '" + shipped("weak_im.json") + "'").code == 0);
  REQUIRE(run_cli(root_b, "run '" + shipped("weak_im.json") + "'").code == 0);
  const qmeas::RunRecord a =
      qmeas::load_record((root_a / "weak-im" / "record.json").string());
  const qmeas::RunRecord b =
      qmeas::load_record((root_b / "weak-im" / "record.json").string());
  REQUIRE(a.payload == b.payload);
  REQUIRE(a.config == b.config);
  REQUIRE(a.payload.at("target_part").get<std::string>() == "im");
}

TEST_CASE("wavefunction run reconstructs with high fidelity") {
  const fs::path root = fresh_root();
  const CliResult r = run_cli(root, "run '" + shipped("wavefunction.json") + "'");
  INFO(r.err);
  REQUIRE(r.code == 0);

  const qmeas::RunRecord record =
      qmeas::load_record((root / "wavefunction" / "record.json").string());
  const qmeas::Json& p = record.payload;
  REQUIRE_FALSE(p.at("failed").get<bool>());
  REQUIRE(p.at("fidelity").get<double>() >= 0.99);
  REQUIRE(p.at("points").size() == 64);
  const auto occupied = p.at("occupied_intervals");
  REQUIRE(!occupied.empty());
  REQUIRE(occupied.size() < 64);
  REQUIRE(fs::exists(root / "wavefunction" / "points.csv"));
}

TEST_CASE("defeated postselection exits with the dedicated code") {
  const fs::path root = fresh_root();
  const CliResult r = run_cli(root, "run '" + shipped("wavefunction_fail.json") + "'");
  REQUIRE(r.code == 2);
  REQUIRE(r.err.find("postselection mass below threshold") != std::string::npos);

  // The record is still written so the failure can be inspected.
  const qmeas::RunRecord record =
      qmeas::load_record((root / "wavefunction-fail" / "record.json").string());
  const qmeas::Json& p = record.payload;
  REQUIRE(p.at("failed").get<bool>());
  REQUIRE(p.at("postselection_mass").get<double>() < 1e-10);
  REQUIRE(p.at("fidelity").get<double>() == 0.0);
  for (const auto& row : p.at("points")) {
    REQUIRE(std::abs(row[1].get<double>()) < 1e-8);
    REQUIRE(std::abs(row[2].get<double>()) < 1e-8);
  }
}

TEST_CASE("phase-space run reports a faithful reconstruction") {
  const fs::path root = fresh_root();
  const CliResult r = run_cli(root, "run '" + shipped("phase_space.json") + "'");
  INFO(r.err);
  REQUIRE(r.code == 0);

  const qmeas::RunRecord record =
      qmeas::load_record((root / "phase-space" / "record.json").string());
  const qmeas::Json& p = record.payload;
  REQUIRE(p.at("trace_distance").get<double>() <= 1e-3);
  REQUIRE(p.at("completeness").at("zero_fraction").get<double>() == 0.0);
  REQUIRE(p.at("qs").size() == 64);
  REQUIRE(p.at("husimi").size() == 64);
  REQUIRE(fs::exists(root / "phase-space" / "husimi.csv"));
  REQUIRE(fs::exists(root / "phase-space" / "husimi_header.json"));
}

TEST_CASE("emit-plots regenerates deleted plot data from the record") {
  const fs::path root = fresh_root();
  REQUIRE(run_cli(root, "run '" + shipped("weak_re.json") + "'").code == 0);
  const fs::path csv = root / "weak-re" / "series.csv";
  const std::string before = read_file(csv);
  fs::remove(csv);
  REQUIRE_FALSE(fs::exists(csv));

  const fs::path record_path = root / "weak-re" / "record.json";
  const CliResult r = run_cli(root, "emit-plots '" + record_path.string() + "'");
  INFO(r.err);
  REQUIRE(r.code == 0);
  REQUIRE(fs::exists(csv));
  REQUIRE(read_file(csv) == before);
}

TEST_CASE("malformed configs are rejected with exit code 3") {
  const fs::path root = fresh_root();

  qmeas::Json bad = load_json(shipped("wavefunction.json"));
  bad["alpha"] = 0.0;
  const fs::path bad_alpha = write_json(root, "bad_alpha.json", bad);
  REQUIRE(run_cli(root, "validate '" + bad_alpha.string() + "'").code == 3);
  REQUIRE(run_cli(root, "run '" + bad_alpha.string() + "'").code == 3);

  qmeas::Json typo = load_json(shipped("weak_re.json"));
  typo["typo_field"] = 1;
  const fs::path bad_key = write_json(root, "bad_key.json", typo);
  const CliResult r = run_cli(root, "validate '" + bad_key.string() + "'");
  REQUIRE(r.code == 3);
  REQUIRE(r.err.find("typo_field") != std::string::npos);

  qmeas::Json unknown = load_json(shipped("weak_re.json"));
  unknown["experiment"] = "frequency-comb";
  const fs::path bad_kind = write_json(root, "bad_kind.json", unknown);
  const CliResult k = run_cli(root, "validate '" + bad_kind.string() + "'");
  REQUIRE(k.code == 3);
  REQUIRE(k.err.find("unknown experiment") != std::string::npos);
}

TEST_CASE("a locked output directory refuses a second run") {
  const fs::path root = fresh_root();
  fs::create_directories(root / "weak-re");
  std::ofstream(root / "weak-re" / ".lock") << "pid 0\n";
  const CliResult r = run_cli(root, "run '" + shipped("weak_re.json") + "'");
  REQUIRE(r.code == 3);
  REQUIRE(r.err.find("locked") != std::string::npos);
}
