#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "fixtures.hpp"
#include "json.hpp"
#include "ymap/image_io.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string output;
};

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("ymap_test_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

Run run(const fs::path& dir, const std::string& args) {
  const fs::path log = dir / "cli.log";
  const std::string cmd = std::string(YMAP_CLI_PATH) + " --root " + dir.string() + " " + args + " > " +
                          log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.output = ymap::read_text_file(log);
  return r;
}

// COCO keypoint file with the given people on one 256x256 image.
void write_keypoints(const fs::path& path, const std::vector<ymap::SkeletonAnnotation>& people) {
  json anns = json::array();
  int id = 1;
  for (const auto& p : people) {
    json kp = json::array();
    for (const auto& j : p.joints) {
      kp.push_back(j.x);
      kp.push_back(j.y);
      kp.push_back(static_cast<int>(j.visibility));
    }
    anns.push_back({{"id", id++}, {"image_id", 7}, {"category_id", 1}, {"keypoints", kp},
                    {"num_keypoints", 17}, {"iscrowd", 0}});
  }
  const json doc = {{"images", {{{"id", 7}, {"file_name", "scene.jpg"}, {"width", 256}, {"height", 256}}}},
                    {"annotations", anns},
                    {"categories", {{{"id", 1}, {"name", "person"}}}}};
  std::ofstream(path) << doc.dump();
}

}  // namespace

TEST_CASE("arch-check confirms the final configuration") {
  const fs::path dir = temp_dir("arch");
  const Run r = run(dir, "arch-check --preset ymap-1-8-44");
  CHECK(r.code == 0);
  CHECK(r.output.find("44-channel output confirmed") != std::string::npos);
  CHECK(r.output.find("topology: ok") != std::string::npos);
  CHECK(fs::exists(dir / "arch-check" / "shapes.json"));
  CHECK(fs::exists(dir / "arch-check" / "manifest.json"));
  CHECK(run(dir, "arch-check --list").output.find("exp15") != std::string::npos);
}

TEST_CASE("exit codes") {
  const fs::path dir = temp_dir("codes");
  CHECK(run(dir, "frobnicate").code == 3);
  CHECK(run(dir, "decode-pose").code == 2);
  CHECK(run(dir, "decode-pose --input missing.f32").code == 4);
  CHECK(run(dir, "arch-check --preset nope").code == 2);
  std::ofstream(dir / "bad.json") << "{ not json";
  CHECK(run(dir, "ingest --annotations bad.json").code == 5);
  CHECK(run(dir, "--version").code == 0);
}

TEST_CASE("synth-targets then decode-pose recovers the fixture") {
  const fs::path dir = temp_dir("roundtrip");
  const std::vector<ymap::SkeletonAnnotation> people = {fixture::upright_person(70, 50, 140),
                                                        fixture::upright_person(180, 40, 170)};
  write_keypoints(dir / "kp.json", people);
  REQUIRE(run(dir, "synth-targets --annotations kp.json --epoch 0").code == 0);
  CHECK(fs::exists(dir / "targets" / "scene.f32"));
  CHECK(fs::exists(dir / "targets" / "manifest.json"));
  REQUIRE(run(dir, "decode-pose --input targets").code == 0);
  const json result = json::parse(ymap::read_text_file(dir / "pose" / "scene.json"));
  REQUIRE(result.at("skeletons").size() == 2);
  for (const auto& s : result["skeletons"]) CHECK(s.at("joints").size() == 17);

  const json manifest = json::parse(ymap::read_text_file(dir / "targets" / "manifest.json"));
  CHECK(manifest.at("command") == "synth-targets");
  CHECK(manifest.at("inputs").size() >= 1);

  // Same inputs and seed give byte-identical stacks.
  const std::string first = ymap::read_text_file(dir / "targets" / "scene.f32");
  REQUIRE(run(dir, "-j 3 synth-targets --annotations kp.json --epoch 0").code == 0);
  CHECK(ymap::read_text_file(dir / "targets" / "scene.f32") == first);
}

TEST_CASE("eval on identical directories reports perfect scores") {
  const fs::path dir = temp_dir("eval");
  write_keypoints(dir / "kp.json", {fixture::upright_person(128, 40, 160)});
  REQUIRE(run(dir, "synth-targets --annotations kp.json").code == 0);
  const Run r = run(dir, "eval --pred targets --truth targets --metric all --T 0.1");
  REQUIRE(r.code == 0);
  const json report = json::parse(ymap::read_text_file(dir / "eval" / "eval.json"));
  for (const auto& [key, value] : report.at("hdm")[0].items()) {
    if (key == "T") continue;
    CAPTURE(key);
    CHECK(value.get<double>() == 1.0);
  }
  CHECK(report.at("loss").at("total").get<double>() == 0.0);
}
