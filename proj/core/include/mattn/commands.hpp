/* Copyright 2026 The Matrix Attention Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef MATTN_COMMANDS_HPP_
#define MATTN_COMMANDS_HPP_

#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "mattn/blocks.hpp"
#include "mattn/run_config.hpp"
#include "mattn/synth.hpp"

namespace mattn {

enum ExitCode : int {
  kExitOk = 0,
  kExitCheckFailed = 1,
  kExitConfig = 2,
  kExitNumeric = 3,
};

struct CommandIo {
  std::ostream& out;
  std::ostream& err;
};

// Each command validates `cfg`, writes its artifacts under cfg.out_dir and
// the resolved configuration to <out_dir>/resolved_<command>.cfg.
int cmd_verify(const RunConfig& cfg, bool inject_fault, CommandIo io);
int cmd_train(const RunConfig& cfg, CommandIo io);
int cmd_sample(const RunConfig& cfg, CommandIo io);
int cmd_bench(const RunConfig& cfg, CommandIo io);
int cmd_flops(const RunConfig& cfg, CommandIo io);

// Loads the config (file, then overrides, then MATTN_OUT), dispatches, and
// maps errors to exit codes.
int run_command(const std::string& command, const std::string& config_path,
                const std::vector<std::pair<std::string, std::string>>& overrides,
                bool inject_fault, CommandIo io);

// Trained weights plus what sampling needs to map tokens back to pixels.
struct TrainedModel {
  ParamSet params;
  ParamSet ema;
  Normalizer normalizer;
};
void save_checkpoint(const std::string& path, const TrainedModel& m);
TrainedModel load_checkpoint(const std::string& path);

inline constexpr const char* kCheckpointFile = "checkpoint.fdtc";
inline constexpr const char* kLossFile = "loss.csv";

}  // namespace mattn

#endif  // MATTN_COMMANDS_HPP_
