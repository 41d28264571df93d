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

#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "mattn/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Matrix Attention / FrameDiT toolkit"};
  app.require_subcommand(1, 1);

  std::string config;
  std::vector<std::string> sets;
  bool inject_fault = false;

  for (const char* name : {"verify", "train", "sample", "bench", "flops"}) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config, "key=value configuration file")->required();
    sub->add_option("--set", sets, "override, key=value (repeatable)");
    if (std::string(name) == "verify") {
      sub->add_flag("--inject-fault", inject_fault)->group("");
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : mattn::kExitConfig;
  }

  std::vector<std::pair<std::string, std::string>> overrides;
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) {
      std::cerr << "config error: --set expects key=value, got '" << s << "'\n";
      return mattn::kExitConfig;
    }
    overrides.emplace_back(s.substr(0, eq), s.substr(eq + 1));
  }
  const std::string command = app.get_subcommands().front()->get_name();
  return mattn::run_command(command, config, overrides, inject_fault,
                            mattn::CommandIo{std::cout, std::cerr});
}
