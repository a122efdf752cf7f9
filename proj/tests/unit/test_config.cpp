#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <set>

#include "surfreg/config.hpp"
#include "surfreg/error.hpp"

using namespace surfreg;
using nlohmann::json;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::Internal;
}

std::string message_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

std::filesystem::path write_temp(const std::string& name, const std::string& text) {
  const auto p = std::filesystem::temp_directory_path() / name;
  std::ofstream(p) << text;
  return p;
}

/// Restores an environment variable on scope exit.
struct EnvGuard {
  std::string name;
  std::optional<std::string> old;
  explicit EnvGuard(std::string n) : name(std::move(n)) {
    if (const char* v = std::getenv(name.c_str())) old = v;
  }
  ~EnvGuard() {
    if (old) setenv(name.c_str(), old->c_str(), 1);
    else unsetenv(name.c_str());
  }
};

}  // namespace

TEST_CASE("defaults validate and every key round-trips") {
  const PipelineConfig d;
  CHECK_NOTHROW(d.validate());
  const json j = config_to_json(d);
  const auto keys = config_keys();
  CHECK(std::set<std::string>(keys.begin(), keys.end()).size() == keys.size());
  for (const std::string& k : keys) {
    std::string ptr = "/" + k;
    std::replace(ptr.begin(), ptr.end(), '.', '/');
    CHECK_MESSAGE(j.contains(json::json_pointer(ptr)), k);
  }
  PipelineConfig back;
  back.seed = 99;
  back.seg.tau_iou = 0.1;
  apply_config_json(back, j);
  CHECK(config_to_json(back) == j);
}

TEST_CASE("nested and dotted trees are equivalent") {
  PipelineConfig a, b;
  apply_config_json(a, json::parse(R"({"reg": {"ransac": {"max_iterations": 123}}, "seg": {"k_obs": 5}})"));
  apply_config_json(b, json::parse(R"({"reg.ransac.max_iterations": 123, "seg": {"k_obs": 5}})"));
  CHECK(a.reg.ransac.max_iterations == 123);
  CHECK(a.seg.k_obs == 5);
  CHECK(config_to_json(a) == config_to_json(b));
}

TEST_CASE("unknown keys and bad types name the key") {
  PipelineConfig c;
  CHECK(kind_of([&] { apply_config_json(c, json{{"seg", {{"tau_io", 0.5}}}}); }) == ErrorKind::Config);
  CHECK(message_of([&] { apply_config_json(c, json{{"seg", {{"tau_io", 0.5}}}}); }).find("seg.tau_io") !=
        std::string::npos);
  CHECK(message_of([&] { apply_override(c, "reg.levels=\"three\""); }).find("reg.levels") != std::string::npos);
  CHECK(kind_of([&] { apply_override(c, "synth.distractor=1"); }) == ErrorKind::Config);
  CHECK(kind_of([&] { apply_override(c, "reg.levels=2.5"); }) == ErrorKind::Config);
  CHECK(kind_of([&] { apply_override(c, "seed=-1"); }) == ErrorKind::Config);
  CHECK(kind_of([&] { apply_override(c, "seg.k_obs=1e20"); }) == ErrorKind::Config);
  CHECK(kind_of([&] { apply_override(c, "no_equals_sign"); }) == ErrorKind::Config);
  CHECK(kind_of([&] { apply_override(c, "=3"); }) == ErrorKind::Config);
  CHECK(kind_of([&] { apply_config_json(c, json::array()); }) == ErrorKind::Config);
}

TEST_CASE("override values") {
  PipelineConfig c;
  apply_override(c, "output_dir=results/run one");  // not JSON: taken as a string
  CHECK(c.output_dir == "results/run one");
  apply_override(c, "seg.segmenter=service:http://localhost:8000");
  CHECK(c.segmenter == "service:http://localhost:8000");
  apply_override(c, "seg.tau_iou=0.25");
  CHECK(c.seg.tau_iou == 0.25);
  apply_override(c, "seg.initial_prompts=[{\"x\":3,\"y\":4},{\"x\":5,\"y\":6,\"positive\":false}]");
  REQUIRE(c.initial_prompts.size() == 2);
  CHECK(c.initial_prompts[0].col == 3);
  CHECK(c.initial_prompts[0].positive);
  CHECK_FALSE(c.initial_prompts[1].positive);
  CHECK(kind_of([&] { apply_override(c, "seg.initial_prompts=[{\"x\":3,\"y\":4,\"z\":1}]"); }) == ErrorKind::Config);
  CHECK(kind_of([&] { apply_override(c, "seg.initial_prompts=[{\"x\":3}]"); }) == ErrorKind::Config);
}

TEST_CASE("validation names the offending key") {
  auto msg = [](const std::string& o) {
    return message_of([&] {
      PipelineConfig c;
      apply_override(c, o);
      c.validate();
    });
  };
  CHECK(msg("reconstruction.send_voxel=0").find("reconstruction.send_voxel") != std::string::npos);
  CHECK(msg("seg.segmenter=magic").find("seg.segmenter") != std::string::npos);
  CHECK(msg("seg.segmenter=service:").find("seg.segmenter") != std::string::npos);
  CHECK(msg("pipeline.queue_capacity=0").find("pipeline.queue_capacity") != std::string::npos);
  CHECK_FALSE(msg("seg.tau_iou=1.5").empty());
  CHECK_FALSE(msg("reg.trim=0.5").empty());
  CHECK(kind_of([] {
          PipelineConfig c;
          c.reg.levels = 0;
          c.validate();
        }) == ErrorKind::Config);
}

TEST_CASE("load_config precedence") {
  EnvGuard guard(kConfigEnv);
  unsetenv(kConfigEnv);
  const auto file = write_temp("surfreg_cfg_a.json", R"({"seed": 7, "seg": {"k_obs": 4}, "output_dir": "from_file"})");
  const auto env_file = write_temp("surfreg_cfg_env.json", R"({"seed": 11})");

  CHECK(load_config({}, {}).seed == PipelineConfig{}.seed);

  const PipelineConfig a = load_config(file, {});
  CHECK(a.seed == 7);
  CHECK(a.seg.k_obs == 4);

  // Later overrides win over earlier ones and over the file.
  const PipelineConfig b = load_config(file, {"seed=8", "seed=9"});
  CHECK(b.seed == 9);
  CHECK(b.seg.k_obs == 4);
  CHECK(b.output_dir == "from_file");

  setenv(kConfigEnv, env_file.c_str(), 1);
  CHECK(load_config({}, {}).seed == 11);
  CHECK(load_config(file, {}).seed == 7);  // explicit path beats the environment
  CHECK(load_config({}, {"seed=12"}).seed == 12);
  unsetenv(kConfigEnv);

  CHECK(kind_of([] { load_config("/nonexistent/surfreg.json", {}); }) == ErrorKind::Io);
  const auto bad = write_temp("surfreg_cfg_bad.json", "{ not json");
  CHECK(kind_of([&] { load_config(bad, {}); }) == ErrorKind::Config);
  const auto unknown = write_temp("surfreg_cfg_unknown.json", R"({"reg": {"lamda_c": 1}})");
  CHECK(message_of([&] { load_config(unknown, {}); }).find("reg.lamda_c") != std::string::npos);
  // Validation runs after overrides, so an override can repair a file value.
  const auto invalid = write_temp("surfreg_cfg_invalid.json", R"({"synth": {"frames": 0}})");
  CHECK(kind_of([&] { load_config(invalid, {}); }) == ErrorKind::Config);
  CHECK(load_config(invalid, {"synth.frames=3"}).synth.frames == 3);

  for (const auto& p : {file, env_file, bad, unknown, invalid}) std::filesystem::remove(p);
}
