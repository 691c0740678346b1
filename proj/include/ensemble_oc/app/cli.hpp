/*
 Copyright 2026 The ensemble-oc Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace eoc::app {

enum ExitCode : int { exit_ok = 0, exit_check_failed = 1, exit_usage = 2 };

/// Entry point of `ensemble-oc {solve|verify|discretize|benchmark}`; args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace eoc::app
