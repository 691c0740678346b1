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

#include <cstddef>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace eoc {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Column k holds the value at time node t_k.
template <typename Scalar>
using StateArray = Matrix<Scalar>;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Non-finite state or costate during integration.
class BlowUpError : public Error {
public:
    BlowUpError(const std::string& what, std::ptrdiff_t node, std::ptrdiff_t atom = -1)
        : Error(what), node_(node), atom_(atom) {}

    std::ptrdiff_t node() const noexcept { return node_; }
    /// Index of the offending atom, or -1 when not propagated through an ensemble.
    std::ptrdiff_t atom() const noexcept { return atom_; }

private:
    std::ptrdiff_t node_;
    std::ptrdiff_t atom_;
};

/// The terminal cost is not differentiable at the requested point.
class TerminalGradientError : public Error {
public:
    using Error::Error;
};

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
    return m.allFinite();
}

}  // namespace eoc
