#include "emff/scenario.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

#include "emff/error.hpp"

namespace emff {

using nlohmann::json;

namespace {

const json& require(const json& obj, const std::string& table,
                    const std::string& key) {
  if (!obj.is_object() || !obj.contains(key))
    throw Error("config_error", "missing field " + table + "." + key);
  return obj.at(key);
}

double require_number(const json& obj, const std::string& table,
                      const std::string& key) {
  const json& v = require(obj, table, key);
  if (!v.is_number())
    throw Error("config_error", table + "." + key + " must be a number");
  return v.get<double>();
}

Eigen::Vector3d parse_vec3(const json& v, const std::string& where) {
  if (!v.is_array() || v.size() != 3)
    throw Error("config_error", where + " must be an array of 3 numbers");
  for (const auto& c : v)
    if (!c.is_number())
      throw Error("config_error", where + " must contain only numbers");
  return {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
}

std::vector<Eigen::Vector3d> parse_vec3_list(const json& v,
                                             const std::string& where,
                                             int expected) {
  if (!v.is_array() || static_cast<int>(v.size()) != expected)
    throw Error("config_error", where + " must list " +
                                    std::to_string(expected) + " vectors");
  std::vector<Eigen::Vector3d> out;
  out.reserve(v.size());
  for (size_t k = 0; k < v.size(); ++k)
    out.push_back(parse_vec3(v[k], where + "[" + std::to_string(k) + "]"));
  return out;
}

json dump_vec3(const Eigen::Vector3d& v) {
  return json::array({v.x(), v.y(), v.z()});
}

}  // namespace

Eigen::VectorXd Scenario::initial_state() const {
  Eigen::VectorXd x(6 * n);
  for (int i = 0; i < n; ++i) {
    x.segment<3>(3 * i) = r0[i];
    x.segment<3>(3 * (n + i)) = v0[i];
  }
  return x;
}

Scenario parse_scenario(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error("config_error", std::string("scenario parse error: ") +
                                    e.what());
  }

  Scenario s;
  const json& sat = require(root, "scenario", "satellites");
  const double n_raw = require_number(sat, "satellites", "n");
  s.n = static_cast<int>(n_raw);
  if (s.n < 2 || s.n != n_raw)
    throw Error("config_error", "satellites.n must be an integer >= 2");
  s.params.mass = require_number(sat, "satellites", "mass_kg");
  s.params.turns = require_number(sat, "satellites", "turns");
  s.params.coil_area = require_number(sat, "satellites", "coil_area_m2");
  s.params.coil_resistance =
      require_number(sat, "satellites", "coil_resistance_ohm");
  s.params.coil_inductance =
      require_number(sat, "satellites", "coil_inductance_h");
  s.params.power_cap = require_number(sat, "satellites", "power_cap_w");
  if (s.params.mass <= 0.0)
    throw Error("config_error", "satellites.mass_kg must be positive");

  const json& con = require(root, "scenario", "constraints");
  s.config.r_min = require_number(con, "constraints", "r_min_m");
  s.config.s_max = require_number(con, "constraints", "s_max_mps");
  s.config.q_max = s.params.power_cap;
  if (s.config.r_min <= 0.0 || s.config.s_max <= 0.0)
    throw Error("config_error", "constraints must be positive");

  const json& ctl = require(root, "scenario", "controller");
  s.config.rho = require_number(ctl, "controller", "rho");
  s.config.gamma = require_number(ctl, "controller", "gamma");
  s.config.ac_scale = require_number(ctl, "controller", "ac_scale");
  s.config.alpha0 = require_number(ctl, "controller", "alpha0");
  s.config.alpha1 = require_number(ctl, "controller", "alpha1");
  s.config.alphav = require_number(ctl, "controller", "alphav");
  s.config.alpha = require_number(ctl, "controller", "alpha");
  s.config.wz_pos = require_number(ctl, "controller", "wz_pos");
  s.config.wz_vel = require_number(ctl, "controller", "wz_vel");
  s.config.wz_zeta = require_number(ctl, "controller", "wz_zeta");
  s.config.wmu = require_number(ctl, "controller", "wmu");
  s.config.psi_params.eps1 = require_number(ctl, "controller", "eps1");
  s.config.psi_params.eps2 = require_number(ctl, "controller", "eps2");
  if (s.config.rho <= 0.0 || s.config.gamma <= 0.0)
    throw Error("config_error", "controller.rho and controller.gamma must be "
                                "positive");

  const json& env = require(root, "scenario", "environment");
  const json& kind = require(env, "environment", "kind");
  if (kind == "deep_space")
    s.env.kind = Environment::Kind::deep_space;
  else if (kind == "leo")
    s.env.kind = Environment::Kind::leo;
  else
    throw Error("config_error",
                "environment.kind must be deep_space or leo");
  s.env.mu_g = require_number(env, "environment", "mu_g");
  s.env.earth_mass = require_number(env, "environment", "m_earth");

  const json& init = require(root, "scenario", "initial");
  s.r0 = parse_vec3_list(require(init, "initial", "r_i"), "initial.r_i", s.n);
  s.v0 = parse_vec3_list(require(init, "initial", "v_i"), "initial.v_i", s.n);

  const json& form = require(root, "scenario", "formation");
  const json& frame = require(form, "formation", "frame");
  if (frame == "inertial")
    s.frame = FormationFrameKind::inertial;
  else if (frame == "com")
    s.frame = FormationFrameKind::com;
  else
    throw Error("config_error", "formation.frame must be inertial or com");
  const json& segs = require(form, "formation", "segments");
  if (!segs.is_array() || segs.empty())
    throw Error("config_error",
                "formation.segments must be a nonempty array");
  for (size_t k = 0; k < segs.size(); ++k) {
    const std::string where = "formation.segments[" + std::to_string(k) + "]";
    FormationSegment seg;
    seg.start_time = require_number(segs[k], where, "start_time_s");
    seg.d = parse_vec3_list(require(segs[k], where, "d"), where + ".d",
                            s.n - 1);
    if (!s.segments.empty() && seg.start_time <= s.segments.back().start_time)
      throw Error("config_error",
                  where + ".start_time_s must be strictly increasing");
    s.segments.push_back(std::move(seg));
  }
  if (s.segments.front().start_time > 0.0)
    throw Error("config_error",
                "formation.segments must start at or before t=0");

  const json& sim = require(root, "scenario", "sim");
  const json& mode = require(sim, "sim", "mode");
  if (mode == "averaged")
    s.mode = SimMode::averaged;
  else if (mode == "full")
    s.mode = SimMode::full;
  else
    throw Error("config_error", "sim.mode must be averaged or full");
  s.horizon = require_number(sim, "sim", "horizon_s");
  s.period = require_number(sim, "sim", "period_s");
  if (s.horizon <= 0.0 || s.period <= 0.0)
    throw Error("config_error", "sim.horizon_s and sim.period_s must be "
                                "positive");

  attach_coil_model(&s.config, s.params, PairTable(s.n));
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw Error("config_error", "cannot open scenario file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

std::string serialize_scenario(const Scenario& s) {
  json root;
  root["satellites"] = {{"n", s.n},
                        {"mass_kg", s.params.mass},
                        {"turns", s.params.turns},
                        {"coil_area_m2", s.params.coil_area},
                        {"coil_resistance_ohm", s.params.coil_resistance},
                        {"coil_inductance_h", s.params.coil_inductance},
                        {"power_cap_w", s.params.power_cap}};
  root["constraints"] = {{"r_min_m", s.config.r_min},
                         {"s_max_mps", s.config.s_max}};
  root["controller"] = {{"rho", s.config.rho},
                        {"gamma", s.config.gamma},
                        {"ac_scale", s.config.ac_scale},
                        {"alpha0", s.config.alpha0},
                        {"alpha1", s.config.alpha1},
                        {"alphav", s.config.alphav},
                        {"alpha", s.config.alpha},
                        {"wz_pos", s.config.wz_pos},
                        {"wz_vel", s.config.wz_vel},
                        {"wz_zeta", s.config.wz_zeta},
                        {"wmu", s.config.wmu},
                        {"eps1", s.config.psi_params.eps1},
                        {"eps2", s.config.psi_params.eps2}};
  root["environment"] = {
      {"kind",
       s.env.kind == Environment::Kind::deep_space ? "deep_space" : "leo"},
      {"mu_g", s.env.mu_g},
      {"m_earth", s.env.earth_mass}};
  json r_i = json::array(), v_i = json::array();
  for (int i = 0; i < s.n; ++i) {
    r_i.push_back(dump_vec3(s.r0[i]));
    v_i.push_back(dump_vec3(s.v0[i]));
  }
  root["initial"] = {{"r_i", r_i}, {"v_i", v_i}};
  json segs = json::array();
  for (const auto& seg : s.segments) {
    json d = json::array();
    for (const auto& v : seg.d) d.push_back(dump_vec3(v));
    segs.push_back({{"start_time_s", seg.start_time}, {"d", d}});
  }
  root["formation"] = {
      {"frame", s.frame == FormationFrameKind::inertial ? "inertial" : "com"},
      {"segments", segs}};
  root["sim"] = {{"mode", s.mode == SimMode::averaged ? "averaged" : "full"},
                 {"horizon_s", s.horizon},
                 {"period_s", s.period}};
  return root.dump(2) + "\n";
}

bool scenario_equal(const Scenario& a, const Scenario& b) {
  if (a.n != b.n || a.frame != b.frame || a.mode != b.mode ||
      a.horizon != b.horizon || a.period != b.period ||
      a.env.kind != b.env.kind || a.env.mu_g != b.env.mu_g ||
      a.env.earth_mass != b.env.earth_mass ||
      a.segments.size() != b.segments.size())
    return false;
  const auto& pa = a.params;
  const auto& pb = b.params;
  if (pa.mass != pb.mass || pa.turns != pb.turns ||
      pa.coil_area != pb.coil_area ||
      pa.coil_resistance != pb.coil_resistance ||
      pa.coil_inductance != pb.coil_inductance ||
      pa.power_cap != pb.power_cap)
    return false;
  const auto& ca = a.config;
  const auto& cb = b.config;
  if (ca.rho != cb.rho || ca.gamma != cb.gamma ||
      ca.ac_scale != cb.ac_scale || ca.alpha0 != cb.alpha0 ||
      ca.alpha1 != cb.alpha1 || ca.alphav != cb.alphav ||
      ca.alpha != cb.alpha || ca.wz_pos != cb.wz_pos ||
      ca.wz_vel != cb.wz_vel || ca.wz_zeta != cb.wz_zeta ||
      ca.wmu != cb.wmu || ca.psi_params.eps1 != cb.psi_params.eps1 ||
      ca.psi_params.eps2 != cb.psi_params.eps2 || ca.r_min != cb.r_min ||
      ca.s_max != cb.s_max || ca.q_max != cb.q_max)
    return false;
  for (int i = 0; i < a.n; ++i)
    if (a.r0[i] != b.r0[i] || a.v0[i] != b.v0[i]) return false;
  for (size_t k = 0; k < a.segments.size(); ++k) {
    if (a.segments[k].start_time != b.segments[k].start_time) return false;
    for (int i = 0; i < a.n - 1; ++i)
      if (a.segments[k].d[i] != b.segments[k].d[i]) return false;
  }
  return true;
}

}  // namespace emff
