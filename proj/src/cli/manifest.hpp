#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace ymap::cli {

// 64-bit FNV-1a of a file's bytes, as 16 hex digits.
std::string file_digest(const std::filesystem::path& path);

// Record of one command run. Everything except "timings" is a pure function
// of the inputs, flags and seed.
class Manifest {
 public:
  Manifest(std::string command, std::vector<std::string> argv, std::uint64_t seed, int jobs);

  void add_input(const std::filesystem::path& path);
  void add_output(const std::filesystem::path& path);
  void set(const std::string& key, nlohmann::json value) { extra_[key] = std::move(value); }
  void begin_phase(const std::string& name);
  void end_phase();

  nlohmann::json to_json() const;
  void write(const std::filesystem::path& path);

 private:
  using Clock = std::chrono::steady_clock;

  std::string command_;
  std::vector<std::string> argv_;
  std::uint64_t seed_;
  int jobs_;
  std::vector<nlohmann::json> inputs_;
  std::vector<std::string> outputs_;
  nlohmann::json extra_ = nlohmann::json::object();
  nlohmann::json timings_ = nlohmann::json::object();
  std::string phase_;
  Clock::time_point phase_start_;
  Clock::time_point start_ = Clock::now();
};

}  // namespace ymap::cli
