#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "depthtransfer/align.hpp"
#include "depthtransfer/motionseg.hpp"
#include "depthtransfer/optimizer.hpp"
#include "depthtransfer/viewsynth.hpp"

namespace dt {

// Every tunable of a run. Keys in config files use the names listed by
// config_keys(); the matching command-line flags swap '_' for '-'.
struct RunConfig {
  ObjectiveParams objective;
  AlignParams align;
  MotionParams motion;
  StereoParams stereo;
  unsigned workers = 0;
  int width = 0;
  int height = 0;
};

struct ConfigKey {
  std::string name;
  std::string help;
  std::function<void(RunConfig&, const std::string&)> set;  // throws dt::Error on bad values
  std::function<std::string(const RunConfig&)> get;
};

const std::vector<ConfigKey>& config_keys();

// Applies one key=value pair; unknown keys and out-of-range values throw.
void apply_setting(RunConfig& config, const std::string& key, const std::string& value);

// TOML-style "key = value" lines, '#' starts a comment.
void load_config_file(RunConfig& config, const std::filesystem::path& path);

void print_config(std::ostream& os, const RunConfig& config);

// Exit codes: 0 success, 1 usage error, 2 runtime failure.
int run_cli(int argc, const char* const* argv);

}  // namespace dt
