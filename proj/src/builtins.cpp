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

#include "builtins.hpp"

#include <cmath>
#include <map>

#include "schema.hpp"

namespace eoc::app {

namespace {

using Mat = Matrix<double>;

struct Shape {
    Eigen::Index n, m, d;
};

using Installer = json (*)(const json& params, const std::string& path, const Shape& s, ControlSystem<double>& sys);

void same_dims(const Shape& s, const std::string& path, bool need_omega) {
    if (s.n != s.m) schema::fail(path, "requires control_dim == state_dim");
    if (need_omega && s.d < 1) schema::fail(path, "requires a parameter of dimension >= 1");
}

json integrator(const json& params, const std::string& path, const Shape& s, ControlSystem<double>& sys) {
    schema::allow_keys(params, path, {});
    same_dims(s, path, false);
    sys.dynamics = [](double, const Vec&, const Vec& u, const Vec&) { return Vec(u); };
    const auto n = s.n;
    sys.dynamics_jacobian = [n](double, const Vec&, const Vec&, const Vec&) { return Mat(Mat::Zero(n, n)); };
    return json::object();
}

json scaled_drift(const json& params, const std::string& path, const Shape& s, ControlSystem<double>& sys) {
    schema::allow_keys(params, path, {"omega_index"});
    same_dims(s, path, true);
    const long long idx = params.contains("omega_index") ? schema::integer(params["omega_index"], schema::sub(path, "omega_index")) : 0;
    if (idx < 0 || idx >= s.d) schema::fail(schema::sub(path, "omega_index"), "out of range for the parameter dimension");
    const auto i = Eigen::Index(idx);
    sys.dynamics = [i](double, const Vec&, const Vec& u, const Vec& w) { return Vec(w[i] * u); };
    const auto n = s.n;
    sys.dynamics_jacobian = [n](double, const Vec&, const Vec&, const Vec&) { return Mat(Mat::Zero(n, n)); };
    return json{{"omega_index", idx}};
}

json linear(const json& params, const std::string& path, const Shape& s, ControlSystem<double>& sys) {
    schema::allow_keys(params, path, {"A", "B", "E"});
    const Mat A = params.contains("A") ? schema::matrix(params["A"], schema::sub(path, "A"), s.n, s.n) : Mat(Mat::Zero(s.n, s.n));
    Mat B;
    if (params.contains("B")) {
        B = schema::matrix(params["B"], schema::sub(path, "B"), s.n, s.m);
    } else if (s.n == s.m) {
        B = Mat::Identity(s.n, s.m);
    } else {
        schema::fail(path, "missing key 'B' (required when control_dim != state_dim)");
    }
    const Mat E = params.contains("E") ? schema::matrix(params["E"], schema::sub(path, "E"), s.n, s.d) : Mat(Mat::Zero(s.n, s.d));
    sys.dynamics = [A, B, E](double, const Vec& x, const Vec& u, const Vec& w) { return Vec(A * x + B * u + E * w); };
    sys.dynamics_jacobian = [A](double, const Vec&, const Vec&, const Vec&) { return A; };
    return json{{"A", schema::to_json(A)}, {"B", schema::to_json(B)}, {"E", schema::to_json(E)}};
}

json sine(const json& params, const std::string& path, const Shape& s, ControlSystem<double>& sys) {
    schema::allow_keys(params, path, {});
    same_dims(s, path, false);
    sys.dynamics = [](double, const Vec& x, const Vec& u, const Vec&) { return Vec(x.array().sin().matrix() + u); };
    sys.dynamics_jacobian = [](double, const Vec& x, const Vec&, const Vec&) { return Mat(x.array().cos().matrix().asDiagonal()); };
    return json::object();
}

const std::map<std::string, Installer>& dynamics_table() {
    static const std::map<std::string, Installer> table{
        {"integrator", integrator}, {"linear", linear}, {"scaled_drift", scaled_drift}, {"sine", sine}};
    return table;
}

Vec target_offset(const json& params, const std::string& path, const Shape& s, double& omega_scale) {
    const Vec offset = params.contains("offset") ? schema::vector(params["offset"], schema::sub(path, "offset"), s.n) : Vec(Vec::Zero(s.n));
    omega_scale = params.contains("omega_scale") ? schema::number(params["omega_scale"], schema::sub(path, "omega_scale")) : 0.0;
    if (omega_scale != 0.0 && s.d != s.n) schema::fail(path, "omega_scale requires parameter dimension == state_dim");
    return offset;
}

json neg_abs_distance(const json& params, const std::string& path, const Shape& s, ControlSystem<double>& sys) {
    schema::allow_keys(params, path, {});
    if (s.d != s.n) schema::fail(path, "requires parameter dimension == state_dim");
    sys.terminal_cost = [](const Vec& x, const Vec& w) { return -(x - w).norm(); };
    sys.terminal_cost_gradient = [](const Vec& x, const Vec& w) -> std::optional<Vec> {
        const double r = (x - w).norm();
        if (r == 0.0) return std::nullopt;
        return Vec(-(x - w) / r);
    };
    return json::object();
}

json quadratic(const json& params, const std::string& path, const Shape& s, ControlSystem<double>& sys) {
    schema::allow_keys(params, path, {"offset", "omega_scale"});
    double scale = 0.0;
    const Vec offset = target_offset(params, path, s, scale);
    auto target = [offset, scale](const Vec& w) { return scale == 0.0 ? offset : Vec(offset + scale * w); };
    sys.terminal_cost = [target](const Vec& x, const Vec& w) { return 0.5 * (x - target(w)).squaredNorm(); };
    sys.terminal_cost_gradient = [target](const Vec& x, const Vec& w) -> std::optional<Vec> { return Vec(x - target(w)); };
    return json{{"offset", schema::to_json(offset)}, {"omega_scale", scale}};
}

json linear_cost(const json& params, const std::string& path, const Shape& s, ControlSystem<double>& sys) {
    schema::allow_keys(params, path, {"c", "omega_scale"});
    const Vec c = schema::vector(schema::require(params, path, "c"), schema::sub(path, "c"), s.n);
    const double scale = params.contains("omega_scale") ? schema::number(params["omega_scale"], schema::sub(path, "omega_scale")) : 0.0;
    if (scale != 0.0 && s.d != s.n) schema::fail(path, "omega_scale requires parameter dimension == state_dim");
    auto weight = [c, scale](const Vec& w) { return scale == 0.0 ? c : Vec(c + scale * w); };
    sys.terminal_cost = [weight](const Vec& x, const Vec& w) { return weight(w).dot(x); };
    sys.terminal_cost_gradient = [weight](const Vec&, const Vec& w) -> std::optional<Vec> { return weight(w); };
    return json{{"c", schema::to_json(c)}, {"omega_scale", scale}};
}

json zero(const json& params, const std::string& path, const Shape& s, ControlSystem<double>& sys) {
    schema::allow_keys(params, path, {});
    const auto n = s.n;
    sys.terminal_cost = [](const Vec&, const Vec&) { return 0.0; };
    sys.terminal_cost_gradient = [n](const Vec&, const Vec&) -> std::optional<Vec> { return Vec(Vec::Zero(n)); };
    return json::object();
}

const std::map<std::string, Installer>& cost_table() {
    static const std::map<std::string, Installer> table{
        {"linear", linear_cost}, {"neg_abs_distance", neg_abs_distance}, {"quadratic", quadratic}, {"zero", zero}};
    return table;
}

std::vector<std::string> names(const std::map<std::string, Installer>& table) {
    std::vector<std::string> out;
    for (const auto& [k, v] : table) out.push_back(k);
    return out;
}

json install(const std::map<std::string, Installer>& table, const char* what, const json& doc, const std::string& path,
             const Shape& s, ControlSystem<double>& sys) {
    schema::allow_keys(doc, path, {"builtin", "params"});
    const std::string name = schema::string(schema::require(doc, path, "builtin"), schema::sub(path, "builtin"));
    const auto it = table.find(name);
    if (it == table.end()) {
        schema::fail(schema::sub(path, "builtin"),
                     std::string("unknown ") + what + " builtin '" + name + "'; available: " + schema::join(names(table)));
    }
    const json params = doc.contains("params") ? doc["params"] : json::object();
    schema::object(params, schema::sub(path, "params"));
    return json{{"builtin", name}, {"params", it->second(params, schema::sub(path, "params"), s, sys)}};
}

}  // namespace

std::vector<std::string> dynamics_builtins() { return names(dynamics_table()); }
std::vector<std::string> cost_builtins() { return names(cost_table()); }

json install_dynamics(const json& doc, const std::string& path, Eigen::Index n, Eigen::Index m, Eigen::Index d,
                      ControlSystem<double>& sys) {
    return install(dynamics_table(), "dynamics", doc, path, Shape{n, m, d}, sys);
}

json install_cost(const json& doc, const std::string& path, Eigen::Index n, Eigen::Index d, ControlSystem<double>& sys) {
    return install(cost_table(), "cost", doc, path, Shape{n, n, d}, sys);
}

json install_constraint(const json& doc, const std::string& path, Eigen::Index n, Eigen::Index d,
                        ControlSystem<double>& sys) {
    schema::object(doc, path);
    const std::string kind = schema::string(schema::require(doc, path, "kind"), schema::sub(path, "kind"));
    if (kind == "none") {
        schema::allow_keys(doc, path, {"kind"});
        sys.constraint = nullptr;
        return json{{"kind", "none"}};
    }
    if (kind == "point") {
        schema::allow_keys(doc, path, {"kind", "offset", "omega_scale"});
        double scale = 0.0;
        const Vec offset = target_offset(doc, path, Shape{n, n, d}, scale);
        sys.constraint = [offset, scale](const Vec& w) {
            return ConstraintSet<double>::point(scale == 0.0 ? offset : Vec(offset + scale * w));
        };
        return json{{"kind", "point"}, {"offset", schema::to_json(offset)}, {"omega_scale", scale}};
    }
    if (kind == "box") {
        schema::allow_keys(doc, path, {"kind", "lo", "hi"});
        const Vec lo = schema::vector(schema::require(doc, path, "lo"), schema::sub(path, "lo"), n);
        const Vec hi = schema::vector(schema::require(doc, path, "hi"), schema::sub(path, "hi"), n);
        if (!(lo.array() <= hi.array()).all()) schema::fail(path, "requires lo <= hi");
        sys.constraint = [lo, hi](const Vec&) { return ConstraintSet<double>::box(lo, hi); };
        return json{{"kind", "box"}, {"lo", schema::to_json(lo)}, {"hi", schema::to_json(hi)}};
    }
    if (kind == "halfspace") {
        schema::allow_keys(doc, path, {"kind", "normal", "offset"});
        const Vec normal = schema::vector(schema::require(doc, path, "normal"), schema::sub(path, "normal"), n);
        const double offset = schema::number(schema::require(doc, path, "offset"), schema::sub(path, "offset"));
        if (!(normal.norm() > 0)) schema::fail(schema::sub(path, "normal"), "must be nonzero");
        sys.constraint = [normal, offset](const Vec&) { return ConstraintSet<double>::halfspace(normal, offset); };
        return json{{"kind", "halfspace"}, {"normal", schema::to_json(normal)}, {"offset", offset}};
    }
    schema::fail(schema::sub(path, "kind"), "unknown constraint kind '" + kind + "'; available: box, halfspace, none, point");
}

}  // namespace eoc::app
