#include "poecal/commands.hpp"

#include <doctest.h>

#include <fstream>
#include <initializer_list>
#include <sstream>

using namespace poecal;

namespace {

int run(std::initializer_list<const char*> args) {
  std::vector<const char*> argv{"poecal"};
  argv.insert(argv.end(), args.begin(), args.end());
  return run_cli(int(argv.size()), argv.data());
}

std::filesystem::path data_dir() {
  const auto dir = std::filesystem::path(POECAL_TEST_DATA_DIR) / "cli";
  std::filesystem::create_directories(dir);
  return dir;
}

std::string write_config(const std::string& name, const std::string& text) {
  const auto p = data_dir() / name;
  std::ofstream(p) << text;
  return p.string();
}

Json read_json(const std::filesystem::path& p) {
  std::ifstream in(p);
  return Json::parse(in);
}

const char* kSmall = "[run]\npreset = paper-4.1\n[toy]\nd = 12\nm = 4\ntruths = 0.9\n"
                     "[sampler]\nannealing_steps = 6\nmixing_steps = 2\n"
                     "[field]\ngrid_step = 0.5\n[em]\niterations = 2\n[ablation]\nseeds = 1\np_values = 0, 2\n";

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("configuration problems exit with code 2") {
    CHECK(run({"field", "--config", write_config("missing.cfg", "[toy]\nd = 10\n").c_str()}) == 2);
    CHECK(run({"field", "--config", write_config("unknown.cfg", "[run]\npreset = paper-4.1\nbogus = 1\n").c_str()}) ==
          2);
    CHECK(run({"ablate", "sideways"}) == 2);
    CHECK(run({"frobnicate"}) == 2);
    CHECK(run({"gradient"}) == 2);
    CHECK(run({"field", "--preset", "paper-9"}) == 2);
  }

  TEST_CASE("zero exponent sum is a domain error") {
    const auto cfg = write_config("small.cfg", kSmall);
    const auto out = (data_dir() / "zero").string();
    CHECK(run({"gradient", "--config", cfg.c_str(), "--a", "0,0", "--out-dir", out.c_str()}) == 2);
    CHECK(run({"gradient", "--config", cfg.c_str(), "--a", "0.5,0.2", "--sum-to-one", "--out-dir", out.c_str()}) == 2);
    CHECK(run({"gradient", "--config", cfg.c_str(), "--a", "1", "--out-dir", out.c_str()}) == 2);
  }

  TEST_CASE("gradient output schema") {
    const auto cfg = write_config("small.cfg", kSmall);
    const auto out = data_dir() / "gradient";
    REQUIRE(run({"gradient", "--config", cfg.c_str(), "--a", "0.6,0.5", "--out-dir", out.string().c_str()}) == 0);
    const Json j = read_json(out / "gradient.json");
    CHECK(j.at("a").size() == 2);
    CHECK(j.at("g").size() == 2);
    CHECK(j.at("stderr").size() == 2);
    CHECK(j.at("mode") == "unconstrained");
    CHECK(j.at("n_samples").at("posterior") == 20);
    CHECK(j.contains("seeds"));
    CHECK(j.at("config").at("run").at("preset") == "paper-4.1");

    REQUIRE(run({"gradient", "--config", cfg.c_str(), "--a", "0.3,0.7", "--sum-to-one", "--out-dir",
                 out.string().c_str()}) == 0);
    const Json c = read_json(out / "gradient.json");
    CHECK(c.at("g").size() == 1);
    CHECK(c.at("mode") == "sum_to_one");
  }

  TEST_CASE("field, em and ablate write their files") {
    const auto cfg = write_config("small.cfg", kSmall);
    const auto out = data_dir() / "all";
    std::filesystem::remove_all(out);
    REQUIRE(run({"field", "--config", cfg.c_str(), "--out-dir", out.string().c_str()}) == 0);
    const auto fdir = out / "field" / "truth_0.9";
    for (const char* f : {"gradient_a1.csv", "gradient_a2.csv", "field_reconstructed.csv", "field_analytic.csv",
                          "field_reconstructed.pgm", "summary.json"}) {
      CHECK(std::filesystem::exists(fdir / f));
    }
    const Json fs = read_json(fdir / "summary.json").at("result");
    for (const char* k : {"nrmse", "correlation", "argmax", "argmax_analytic", "analytic_maximizer", "logZ1"})
      CHECK(fs.contains(k));
    CHECK(std::filesystem::exists(out / "field" / "timing.json"));

    REQUIRE(run({"em", "--config", cfg.c_str(), "--out-dir", out.string().c_str()}) == 0);
    const Json traj = read_json(out / "em" / "truth_0.9" / "trajectory_init0.json");
    CHECK(traj.at("iterates").size() == 3);
    CHECK(std::filesystem::exists(out / "em" / "truth_0.9" / "samples_init2.csv"));

    REQUIRE(run({"ablate", "collapse", "--config", cfg.c_str(), "--out-dir", out.string().c_str()}) == 0);
    CHECK(read_json(out / "ablate" / "collapse.json").at("iterations").size() == 11);
    REQUIRE(run({"ablate", "weighting", "--config", cfg.c_str(), "--out-dir", out.string().c_str()}) == 0);
    std::ifstream csv(out / "ablate" / "weighting.csv");
    std::string header;
    std::getline(csv, header);
    CHECK(header == "p,nrmse,seed");
  }

  TEST_CASE("truth selection reproduces the full-run measurement") {
    const auto a = data_dir() / "truth_a", b = data_dir() / "truth_b";
    const auto two = write_config("two_truths.cfg",
                                  "[run]\npreset = paper-4.1\n[toy]\nd = 12\nm = 4\ntruths = 0.9, 0.7\n"
                                  "[sampler]\nannealing_steps = 6\nmixing_steps = 2\n[field]\ngrid_step = 0.5\n");
    REQUIRE(run({"field", "--config", two.c_str(), "--out-dir", a.string().c_str()}) == 0);
    REQUIRE(run({"field", "--config", two.c_str(), "--truth", "0.7", "--out-dir", b.string().c_str()}) == 0);
    std::ifstream fa(a / "field" / "truth_0.7" / "gradient_a1.csv"), fb(b / "field" / "truth_0.7" / "gradient_a1.csv");
    std::stringstream sa, sb;
    sa << fa.rdbuf();
    sb << fb.rdbuf();
    CHECK(sa.str() == sb.str());
    CHECK_FALSE(sa.str().empty());
  }
}
