#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <unistd.h>

#include <json.hpp>

#include "persim/io.hpp"

namespace fs = std::filesystem;

namespace {

struct RunResult {
  int exit_code;
  std::string output;
};

RunResult run(const std::string& args) {
  const std::string cmd = std::string(PERSIM_CLI_PATH) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::string output;
  std::array<char, 4096> buf;
  while (std::fgets(buf.data(), buf.size(), pipe)) output += buf.data();
  const int status = pclose(pipe);
  return {WEXITSTATUS(status), output};
}

struct TempDir {
  TempDir() {
    path = fs::temp_directory_path() /
           ("persim_cli_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  fs::path path;
  static int counter;
};
int TempDir::counter = 0;

void write_config(const fs::path& file, const std::string& out_dir,
                  int workers) {
  std::ofstream f(file);
  f << "bands = 0.45, 0.95\n"
       "subjects = 120\n"
       "features = 25\n"
       "eer_targets_pct = 10\n"
       "stage_replications = 1, 3\n"
       "impostor = full-cross\n"
       "seed = 77\n"
       "out_dir = " << out_dir << "\n"
       "workers = " << workers << "\n";
}

std::string artifact_checksum(const fs::path& manifest_path,
                              const std::string& name) {
  std::ifstream in(manifest_path);
  REQUIRE(in.good());
  nlohmann::json j;
  in >> j;
  for (const auto& a : j["artifacts"])
    if (a["name"] == name) return a["fnv1a64"].get<std::string>();
  FAIL("artifact " + name + " not in manifest");
  return "";
}

}  // namespace

TEST_CASE("generate writes datasets, summaries and a manifest") {
  TempDir tmp;
  write_config(tmp.path / "cfg", (tmp.path / "out").string(), 0);
  const auto r = run("generate --config " + (tmp.path / "cfg").string());
  INFO(r.output);
  REQUIRE(r.exit_code == 0);
  CHECK(fs::exists(tmp.path / "out" / "band_0.45.psim"));
  CHECK(fs::exists(tmp.path / "out" / "band_0.95.psim"));
  CHECK(fs::exists(tmp.path / "out" / "band_summary.csv"));
  CHECK(fs::exists(tmp.path / "out" / "band_icc.csv"));
  CHECK(fs::exists(tmp.path / "out" / "manifest.json"));

  // same seed, fresh directory: identical artifact checksums
  write_config(tmp.path / "cfg2", (tmp.path / "out2").string(), 0);
  const auto r2 = run("generate --config " + (tmp.path / "cfg2").string());
  REQUIRE(r2.exit_code == 0);
  for (const auto* name :
       {"band_0.45.psim", "band_summary.csv", "band_icc.csv"})
    CHECK(artifact_checksum(tmp.path / "out" / "manifest.json", name) ==
          artifact_checksum(tmp.path / "out2" / "manifest.json", name));
}

TEST_CASE("generate handles the minimal two-subject configuration") {
  TempDir tmp;
  std::ofstream(tmp.path / "cfg")
      << "bands = 0.5\nsubjects = 2\nfeatures = 1\n"
         "stage_replications = 1, 2\nseed = 9\nout_dir = "
      << (tmp.path / "out").string() << "\n";
  const auto r = run("generate --config " + (tmp.path / "cfg").string());
  INFO(r.output);
  REQUIRE(r.exit_code == 0);
  CHECK(fs::exists(tmp.path / "out" / "band_0.5.psim"));
  CHECK(fs::exists(tmp.path / "out" / "band_summary.csv"));
  const auto ds =
      persim::io::read_dataset(tmp.path / "out" / "band_0.5.psim");
  CHECK(ds.config.n_subjects == 2);
  CHECK(ds.config.n_features == 1);

  // a targetless config cannot drive a search
  const auto s = run("search --config " + (tmp.path / "cfg").string());
  CHECK(s.exit_code == 2);
  CHECK(s.output.find("no targets") != std::string::npos);
}

TEST_CASE("icc command reads datasets back") {
  TempDir tmp;
  write_config(tmp.path / "cfg", (tmp.path / "out").string(), 0);
  REQUIRE(run("generate --config " + (tmp.path / "cfg").string()).exit_code ==
          0);
  const auto r = run("icc --in " + (tmp.path / "out").string() + " --out " +
                     (tmp.path / "icc").string());
  INFO(r.output);
  REQUIRE(r.exit_code == 0);
  CHECK(fs::exists(tmp.path / "icc" / "band_summary.csv"));
  CHECK(r.output.find("band 0.45") != std::string::npos);
  CHECK(r.output.find("band 0.95") != std::string::npos);
}

TEST_CASE("search produces a table, deterministically across worker counts") {
  TempDir tmp;
  write_config(tmp.path / "cfg1", (tmp.path / "w1").string(), 1);
  write_config(tmp.path / "cfg2", (tmp.path / "w2").string(), 2);
  const auto r1 = run("search --config " + (tmp.path / "cfg1").string());
  INFO(r1.output);
  REQUIRE(r1.exit_code == 0);
  const auto r2 = run("search --config " + (tmp.path / "cfg2").string());
  REQUIRE(r2.exit_code == 0);

  for (const auto* name : {"required_features.csv", "search_trace.csv"})
    CHECK(artifact_checksum(tmp.path / "w1" / "manifest.json", name) ==
          artifact_checksum(tmp.path / "w2" / "manifest.json", name));

  const auto rows = persim::io::read_required_features_csv(
      tmp.path / "w1" / "required_features.csv");
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].band_target == 0.45);
  CHECK(rows[1].band_target == 0.95);
  CHECK(rows[0].n_required >= rows[1].n_required);
}

TEST_CASE("search resumes from cached cells") {
  TempDir tmp;
  write_config(tmp.path / "cfg", (tmp.path / "out").string(), 0);
  REQUIRE(run("search --config " + (tmp.path / "cfg").string()).exit_code == 0);
  const auto first =
      artifact_checksum(tmp.path / "out" / "manifest.json",
                        "required_features.csv");
  const auto r = run("search --config " + (tmp.path / "cfg").string());
  INFO(r.output);
  REQUIRE(r.exit_code == 0);
  CHECK(r.output.find("cached") != std::string::npos);
  CHECK(artifact_checksum(tmp.path / "out" / "manifest.json",
                          "required_features.csv") == first);
}

TEST_CASE("fit reproduces the reference coefficients from a fixture table") {
  TempDir tmp;
  // the reference feature counts for EER < 5% across the seven bands
  std::ofstream csv(tmp.path / "required_features.csv");
  csv << "band_target,target_kind,target_value,far_level,n_required,"
         "mean_metric_at_n\n";
  const std::vector<std::pair<double, int>> col{
      {0.35, 82}, {0.45, 48}, {0.55, 30}, {0.65, 19},
      {0.75, 13}, {0.85, 8},  {0.95, 5}};
  for (const auto& [b, n] : col)
    csv << b << ",eer,0.05,," << n << ",0.049\n";
  csv.close();

  const auto r = run("fit --in " + (tmp.path / "required_features.csv").string() +
                     " --out " + (tmp.path / "fits").string() + " --svg");
  INFO(r.output);
  REQUIRE(r.exit_code == 0);
  CHECK(r.output.find("slope -1.987") != std::string::npos);
  CHECK(fs::exists(tmp.path / "fits" / "fits.csv"));
  CHECK(fs::exists(tmp.path / "fits" / "fit_points.csv"));
  CHECK(fs::exists(tmp.path / "fits" / "fits.svg"));

  // realized-mean mode: same slope when every band mean sits on target
  std::ofstream means(tmp.path / "band_summary.csv");
  means << "band_target,mean_icc,sd_icc\n";
  for (const auto& [b, n] : col) means << b << "," << b << ",0.005\n";
  means.close();
  const auto rr = run("fit --in " +
                      (tmp.path / "required_features.csv").string() +
                      " --out " + (tmp.path / "fits2").string() +
                      " --realized " + (tmp.path / "band_summary.csv").string());
  INFO(rr.output);
  REQUIRE(rr.exit_code == 0);
  CHECK(rr.output.find("slope -1.987") != std::string::npos);

  // predict from the same table instead of the bundled coefficients
  const auto p = run("predict --icc 0.95 --eer 5 --table " +
                     (tmp.path / "required_features.csv").string());
  INFO(p.output);
  REQUIRE(p.exit_code == 0);
  CHECK(p.output.find("features needed : 5\n") != std::string::npos);
}

TEST_CASE("predict with bundled coefficients") {
  const auto r = run("predict --icc 0.95 --eer 5");
  INFO(r.output);
  REQUIRE(r.exit_code == 0);
  CHECK(r.output.find("features needed : 5\n") != std::string::npos);
  CHECK(r.output.find("warning") == std::string::npos);

  const auto frr = run("predict --icc 0.6 --frr 1 --far 0.01");
  REQUIRE(frr.exit_code == 0);
  CHECK(frr.output.find("FRR 1% @ FAR 0.01%") != std::string::npos);

  const auto extrap = run("predict --icc 0.2 --eer 5");
  REQUIRE(extrap.exit_code == 0);
  CHECK(extrap.output.find("extrapolation") != std::string::npos);

  const auto missing = run("predict --icc 0.5 --eer 3");
  CHECK(missing.exit_code == 2);
  CHECK(missing.output.find("available") != std::string::npos);
}

TEST_CASE("config and resolution errors use the documented exit codes") {
  TempDir tmp;
  std::ofstream(tmp.path / "bad") << "bands = 0.5\nnonsense\n";
  CHECK(run("generate --config " + (tmp.path / "bad").string()).exit_code == 2);
  CHECK(run("generate --config " + (tmp.path / "missing").string()).exit_code ==
        2);
  CHECK(run("predict --icc 0.5").exit_code == 2);

  // EER target below the genuine resolution of 40 subjects
  std::ofstream(tmp.path / "res")
      << "bands = 0.5\nsubjects = 40\nfeatures = 10\n"
         "eer_targets_pct = 0.1\nstage_replications = 1, 2\n"
         "seed = 1\nout_dir = " << (tmp.path / "r").string() << "\n";
  CHECK(run("search --config " + (tmp.path / "res").string()).exit_code == 3);
}

TEST_CASE("unreachable search targets exit with code 4") {
  TempDir tmp;
  std::ofstream(tmp.path / "cfg")
      << "bands = 0.35\nsubjects = 150\nfeatures = 3\n"
         "eer_targets_pct = 1\nstage_replications = 1, 2\n"
         "seed = 3\nout_dir = " << (tmp.path / "out").string() << "\n";
  const auto r = run("search --config " + (tmp.path / "cfg").string());
  INFO(r.output);
  CHECK(r.exit_code == 4);
  CHECK(r.output.find("NOT REACHABLE") != std::string::npos);
  // the table exists, with the unreachable cell omitted
  CHECK(fs::exists(tmp.path / "out" / "required_features.csv"));
  CHECK(persim::io::read_required_features_csv(
            tmp.path / "out" / "required_features.csv")
            .empty());
}

TEST_CASE("reproduce-paper desk scale reports dropped targets") {
  TempDir tmp;
  // tiny desk run: override via config to keep the test fast
  std::ofstream(tmp.path / "cfg")
      << "bands = 0.65, 0.95\nsubjects = 100\nfeatures = 40\n"
         "eer_targets_pct = 10, 0.5\nfrr_far_targets_pct = 10@1, 10@0.001\n"
         "stage_replications = 1, 2\nseed = 5\nout_dir = "
      << (tmp.path / "out").string() << "\n";
  const auto r =
      run("reproduce-paper --scale desk --config " + (tmp.path / "cfg").string());
  INFO(r.output);
  REQUIRE(r.exit_code == 0);
  // EER 0.5% needs 2000 subjects at the 10x margin; FAR 0.001% needs 1e6 pairs
  CHECK(r.output.find("resolution guard dropped EER 0.5%") !=
        std::string::npos);
  CHECK(r.output.find("resolution guard dropped FRR 10% @ FAR 0.001%") !=
        std::string::npos);
  CHECK(fs::exists(tmp.path / "out" / "band_summary.csv"));
  CHECK(fs::exists(tmp.path / "out" / "required_features.csv"));
  CHECK(fs::exists(tmp.path / "out" / "fits.csv"));
  CHECK(fs::exists(tmp.path / "out" / "manifest.json"));
}

TEST_CASE("version flag") {
  const auto r = run("--version");
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("1.0.0") != std::string::npos);
}
