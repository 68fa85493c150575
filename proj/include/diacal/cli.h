// Copyright (c) 2026 The diacal Authors
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

#ifndef DIACAL_CLI_H_
#define DIACAL_CLI_H_

#include <string>
#include <vector>

namespace diacal {

// Runs the `diacal` command line. args[0] is the program name. Returns the
// process exit status; errors are reported on stderr.
int run_cli(const std::vector<std::string>& args);
int run_cli(int argc, char** argv);

}  // namespace diacal

#endif  // DIACAL_CLI_H_
