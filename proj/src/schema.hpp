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

// Field accessors that report the JSON path of every schema violation.

#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "ensemble_oc/app/problem.hpp"

namespace eoc::app::schema {

inline std::string join(const std::vector<std::string>& names) {
    std::string out;
    for (const auto& n : names) out += (out.empty() ? "" : ", ") + n;
    return out;
}

[[noreturn]] inline void fail(const std::string& path, const std::string& what) { throw SchemaError(path + ": " + what); }

inline const json& object(const json& doc, const std::string& path) {
    if (!doc.is_object()) fail(path, "expected an object");
    return doc;
}

inline void allow_keys(const json& doc, const std::string& path, const std::vector<std::string>& keys) {
    object(doc, path);
    for (const auto& [k, v] : doc.items()) {
        bool known = false;
        for (const auto& a : keys) known = known || a == k;
        if (!known) fail(path, "unknown key '" + k + "' (allowed: " + join(keys) + ")");
    }
}

inline std::string sub(const std::string& path, const std::string& key) { return path + "." + key; }

inline const json& require(const json& doc, const std::string& path, const std::string& key) {
    if (!doc.contains(key)) fail(path, "missing required key '" + key + "'");
    return doc.at(key);
}

/// Numbers, plus the strings "inf" / "-inf" for unbounded domains when `allow_inf` is set.
inline double number(const json& v, const std::string& path, bool allow_inf = false) {
    if (v.is_number()) return v.get<double>();
    if (allow_inf && v.is_string()) {
        const auto s = v.get<std::string>();
        if (s == "inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
    }
    fail(path, allow_inf ? "expected a number or \"inf\"/\"-inf\"" : "expected a number");
}

inline json encode(double x) {
    if (std::isinf(x)) return x > 0 ? json("inf") : json("-inf");
    return json(x);
}

inline long long integer(const json& v, const std::string& path) {
    if (!v.is_number_integer()) fail(path, "expected an integer");
    return v.get<long long>();
}

inline std::string string(const json& v, const std::string& path) {
    if (!v.is_string()) fail(path, "expected a string");
    return v.get<std::string>();
}

inline Vec vector(const json& v, const std::string& path, std::optional<Eigen::Index> size = std::nullopt) {
    if (!v.is_array()) fail(path, "expected an array of numbers");
    Vec out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) out[Eigen::Index(i)] = number(v[i], path + "[" + std::to_string(i) + "]");
    if (size && out.size() != *size) fail(path, "expected " + std::to_string(*size) + " entries, got " + std::to_string(out.size()));
    return out;
}

/// Row-major nested arrays.
inline Matrix<double> matrix(const json& v, const std::string& path, Eigen::Index rows, Eigen::Index cols) {
    if (!v.is_array() || Eigen::Index(v.size()) != rows) fail(path, "expected " + std::to_string(rows) + " rows");
    Matrix<double> out(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) out.row(r) = vector(v[std::size_t(r)], path + "[" + std::to_string(r) + "]", cols);
    return out;
}

inline json to_json(const Vec& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(encode(v[i]));
    return out;
}

inline json to_json(const Matrix<double>& m) {
    json out = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) out.push_back(to_json(Vec(m.row(r).transpose())));
    return out;
}

}  // namespace eoc::app::schema
