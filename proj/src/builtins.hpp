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

#include <string>

#include "ensemble_oc/app/problem.hpp"

namespace eoc::app {

// Each installer validates its parameter block, wires the callbacks into `sys`
// and returns the block with defaults filled in.

json install_dynamics(const json& doc, const std::string& path, Eigen::Index n, Eigen::Index m, Eigen::Index d,
                      ControlSystem<double>& sys);
json install_cost(const json& doc, const std::string& path, Eigen::Index n, Eigen::Index d, ControlSystem<double>& sys);
json install_constraint(const json& doc, const std::string& path, Eigen::Index n, Eigen::Index d,
                        ControlSystem<double>& sys);

}  // namespace eoc::app
