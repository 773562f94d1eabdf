#include <gtest/gtest.h>

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = -1;
  std::string output;
};

Outcome run(const std::string& args) {
  const std::string cmd = std::string(EPSRECON_CLI) + " " + args + " 2>&1";
  Outcome o;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return o;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) o.output.append(buf, n);
  const int status = pclose(p);
  o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::path(::testing::TempDir()) /
           ("epsrecon_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    twin_ = nlohmann::json::parse(slurp(EPSRECON_TWIN_CONFIG));
    const std::string base = (dir_ / "twin").string();
    for (const char* key : {"eps_glob", "eps_true", "data", "record", "eps"}) {
      const std::string v = twin_["paths"][key];
      twin_["paths"][key] = (dir_ / v).string();
    }
    twin_["paths"]["out"] = base;
  }

  std::string write_config(const nlohmann::json& j, const std::string& name) {
    const auto p = dir_ / name;
    std::ofstream(p) << j.dump(2);
    return "--config " + p.string();
  }

  fs::path dir_;
  nlohmann::json twin_;
};

}  // namespace

TEST_F(Cli, DefaultForwardWritesRecord) {
  const auto o = run("forward --out " + (dir_ / "fwd").string());
  ASSERT_EQ(o.code, 0) << o.output;
  const std::string rec = slurp(dir_ / "fwd" / "record.wsbnd");
  EXPECT_EQ(rec.substr(0, 7), "WSBND1\n");
  EXPECT_TRUE(fs::exists(dir_ / "fwd" / "field_00200.vtk"));
  const auto manifest = nlohmann::json::parse(slurp(dir_ / "fwd" / "manifest.json"));
  EXPECT_EQ(manifest["command"], "forward");
  EXPECT_EQ(manifest["config_hash"].get<std::string>().size(), 16u);
}

TEST_F(Cli, ErrorExitCodes) {
  auto j = twin_;
  j["snapshots"] = nlohmann::json::array();
  j["time"]["dt"] = 0.03;
  j["paths"]["eps"] = "";
  auto o = run("forward " + write_config(j, "unstable.json"));
  EXPECT_EQ(o.code, 2) << o.output;
  EXPECT_NE(o.output.find("StabilityError"), std::string::npos);

  j = twin_;
  j["paths"]["eps"] = (dir_ / "absent.wsmesh").string();
  o = run("forward " + write_config(j, "missing.json"));
  EXPECT_EQ(o.code, 1) << o.output;
  EXPECT_NE(o.output.find("IoError"), std::string::npos);

  j = twin_;
  j["cg"]["thetta"] = 1.0;
  o = run("forward " + write_config(j, "typo.json"));
  EXPECT_EQ(o.code, 3) << o.output;

  o = run("--config " + (dir_ / "none.json").string() + " forward");
  EXPECT_EQ(o.code, 1) << o.output;
  o = run("frobnicate");
  EXPECT_EQ(o.code, 3);
}

TEST_F(Cli, SeedControlsNoise) {
  auto j = twin_;
  j["pipeline"]["noise_level"] = 0.05;
  const std::string cfg = write_config(j, "noisy.json");
  ASSERT_EQ(run("synthesize " + cfg + " --seed 7 --out " + (dir_ / "a").string()).code, 0);
  ASSERT_EQ(run("synthesize " + cfg + " --seed 7 --out " + (dir_ / "b").string()).code, 0);
  ASSERT_EQ(run("synthesize " + cfg + " --seed 8 --out " + (dir_ / "c").string()).code, 0);
  EXPECT_EQ(slurp(dir_ / "a" / "data.txt"), slurp(dir_ / "b" / "data.txt"));
  EXPECT_NE(slurp(dir_ / "a" / "data.txt"), slurp(dir_ / "c" / "data.txt"));
}

TEST_F(Cli, TwinPipelineIsReproducible) {
  const std::string cfg = write_config(twin_, "twin.json");
  const auto t0 = std::chrono::steady_clock::now();
  for (const char* cmd : {"synthesize", "preprocess", "invert"}) {
    const auto o = run(std::string(cmd) + " " + cfg);
    ASSERT_EQ(o.code, 0) << cmd << "\n" << o.output;
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  EXPECT_LT(seconds, 600.0);
  const fs::path out = dir_ / "twin";
  const std::string first = slurp(out / "run_record.jsonl");
  const std::string first_eps = slurp(out / "eps_final.wsmesh");
  ASSERT_EQ(run("invert " + cfg).code, 0);
  EXPECT_EQ(slurp(out / "run_record.jsonl"), first);
  EXPECT_EQ(slurp(out / "eps_final.wsmesh"), first_eps);

  const auto manifest = nlohmann::json::parse(slurp(out / "manifest.json"));
  EXPECT_EQ(manifest["command"], "invert");
  EXPECT_FALSE(manifest["stop_reason"].get<std::string>().empty());

  const auto o = run("report " + cfg + " --eps " + (out / "eps_mesh_0.wsmesh").string() + " " +
                     (out / "eps_final.wsmesh").string());
  ASSERT_EQ(o.code, 0) << o.output;
  std::istringstream rows(o.output);
  std::string header, coarse, refined;
  std::getline(rows, header);
  std::getline(rows, coarse);
  std::getline(rows, refined);
  EXPECT_EQ(header, "mesh\teps_max\tn\tn_error\tclass\tdx\tdy\tdz");
  EXPECT_EQ(coarse.substr(0, 7), "coarse\t");
  EXPECT_EQ(refined.substr(0, 3), "1x\t");
  EXPECT_NE(refined.find("%\tdielectric\t"), std::string::npos);
  EXPECT_TRUE(fs::exists(out / "image.vtk"));
}
