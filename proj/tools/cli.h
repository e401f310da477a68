// Copyright 2026 The CropRL Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CROPRL_TOOLS_CLI_H_
#define CROPRL_TOOLS_CLI_H_

#include <iosfwd>
#include <string>
#include <vector>

namespace croprl::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitConfig = 3;

// Environment variable naming the default output root.
inline constexpr const char* kOutputRootEnv = "CROPRL_OUTPUT_ROOT";

// Runs one command line. args[0] is the program name. Failures print a
// single "croprl: error[<category>]: <message>" line to `err`.
int Run(const std::vector<std::string>& args, std::istream& in, std::ostream& out,
        std::ostream& err);

}  // namespace croprl::cli

#endif  // CROPRL_TOOLS_CLI_H_
