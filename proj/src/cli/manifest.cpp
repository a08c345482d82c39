#include "manifest.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "cli.hpp"
#include "ymap/error.hpp"
#include "ymap/image_io.hpp"

namespace ymap::cli {

std::string file_digest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingFileError("cannot open " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ull;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    const auto n = in.gcount();
    for (std::streamsize i = 0; i < n; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ull;
    }
  }
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
  return hex;
}

Manifest::Manifest(std::string command, std::vector<std::string> argv, std::uint64_t seed, int jobs)
    : command_(std::move(command)), argv_(std::move(argv)), seed_(seed), jobs_(jobs) {}

void Manifest::add_input(const std::filesystem::path& path) {
  nlohmann::json entry = {{"path", path.generic_string()}};
  if (std::filesystem::is_regular_file(path)) {
    entry["bytes"] = std::filesystem::file_size(path);
    entry["fnv1a64"] = file_digest(path);
  }
  inputs_.push_back(std::move(entry));
}

void Manifest::add_output(const std::filesystem::path& path) {
  outputs_.push_back(path.generic_string());
}

void Manifest::begin_phase(const std::string& name) {
  end_phase();
  phase_ = name;
  phase_start_ = Clock::now();
}

void Manifest::end_phase() {
  if (phase_.empty()) return;
  const std::chrono::duration<double> d = Clock::now() - phase_start_;
  timings_[phase_] = d.count();
  phase_.clear();
}

nlohmann::json Manifest::to_json() const {
  auto outputs = outputs_;
  std::sort(outputs.begin(), outputs.end());
  nlohmann::json timings = timings_;
  const std::chrono::duration<double> total = Clock::now() - start_;
  timings["total"] = total.count();
  return {{"command", command_},
          {"argv", argv_},
          {"version", kVersion},
          {"seed", seed_},
          {"jobs", jobs_},
          {"inputs", inputs_},
          {"outputs", outputs},
          {"parameters", extra_},
          {"timings", timings}};
}

void Manifest::write(const std::filesystem::path& path) {
  end_phase();
  write_text_atomic(path, to_json().dump(2) + "\n");
}

}  // namespace ymap::cli
