#include "emff/sim.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "emff/allocation.hpp"
#include "emff/error.hpp"
#include "emff/numerics.hpp"

namespace emff {

FormationFrame formation_frame(const InertialState& state) {
  FormationFrame fr;
  fr.r_com = Eigen::Vector3d::Zero();
  Eigen::Vector3d v_com = Eigen::Vector3d::Zero();
  for (int i = 0; i < state.n; ++i) {
    fr.r_com += state.r(i);
    v_com += state.v(i);
  }
  fr.r_com /= state.n;
  v_com /= state.n;

  const double rn = fr.r_com.norm();
  if (rn <= 0.0)
    throw Error("degenerate_com", "formation mass center at the origin");
  const Eigen::Vector3d i_hat = fr.r_com / rn;

  const Eigen::Vector3d hvec = fr.r_com.cross(v_com);
  const double hn = hvec.norm();
  if (hn > 1e-12 * rn * std::max(v_com.norm(), 1e-300)) {
    fr.k_hat = hvec / hn;
    if (fr.k_hat.z() < 0.0) fr.k_hat = -fr.k_hat;
    fr.omega_orb = hn / fr.r_com.squaredNorm();
  } else {
    // No orbital motion: fall back to the inertial k direction (or j if the
    // center happens to sit on the k axis) and zero rotation rate.
    Eigen::Vector3d seed = Eigen::Vector3d::UnitZ();
    if (std::abs(i_hat.z()) > 0.99) seed = Eigen::Vector3d::UnitY();
    fr.k_hat = (seed - seed.dot(i_hat) * i_hat).normalized();
    fr.omega_orb = 0.0;
  }
  const Eigen::Vector3d j_hat = fr.k_hat.cross(i_hat);
  fr.R_com.col(0) = i_hat;
  fr.R_com.col(1) = j_hat;
  fr.R_com.col(2) = fr.k_hat;
  return fr;
}

DesiredSignals desired_signals(const Scenario& scenario,
                               const InertialState& state, double t) {
  if (scenario.segments.empty() || t < scenario.segments.front().start_time)
    throw Error("schedule_gap",
                "no formation segment covers t=" + std::to_string(t));
  const FormationSegment* seg = &scenario.segments.front();
  for (const auto& s : scenario.segments)
    if (s.start_time <= t) seg = &s;

  const int n = scenario.n;
  DesiredSignals sig = DesiredSignals::zero(n);
  if (scenario.frame == FormationFrameKind::inertial) {
    for (int j = 0; j < n - 1; ++j) sig.d.segment<3>(3 * j) = seg->d[j];
    return sig;
  }
  const FormationFrame fr = formation_frame(state);
  const Eigen::Vector3d w = fr.omega_orb * fr.k_hat;
  for (int j = 0; j < n - 1; ++j) {
    const Eigen::Vector3d d = fr.R_com * seg->d[j];
    const Eigen::Vector3d dd = w.cross(d);
    sig.d.segment<3>(3 * j) = d;
    sig.d_dot.segment<3>(3 * j) = dd;
    sig.d_ddot.segment<3>(3 * j) = w.cross(dd);
    sig.d_dddot.segment<3>(3 * j) = w.cross(w.cross(dd));
  }
  return sig;
}

Eigen::VectorXd apparent_power(const std::vector<Eigen::Vector3d>& amps_low,
                               const std::vector<Eigen::Vector3d>& amps_high,
                               const ControllerConfig& config,
                               const PairTable& table) {
  Eigen::VectorXd q = Eigen::VectorXd::Zero(table.n());
  for (int p = 0; p < table.count(); ++p) {
    const auto [i, j] = table.pair(p);
    q[i] += config.power_norm * config.impedance[p] *
            amps_low[p].squaredNorm();
    q[j] += config.power_norm * config.impedance[p] *
            amps_high[p].squaredNorm();
  }
  return q;
}

namespace {

// Precomputed per-run context: matrices, LQR gain, coil model.
struct Engine {
  const Scenario& sc;
  RunOptions opts;
  PairTable table;
  SystemMatrices mats;
  CareSolution care;

  Engine(const Scenario& scenario, const RunOptions& options)
      : sc(scenario), opts(options), table(scenario.n) {
    mats = build_matrices(table, sc.params.mass, sc.config);
    care = solve_care(mats.Ftilde, mats.Gtilde,
                      lqr_state_weight(mats, sc.config),
                      lqr_input_weight(mats, sc.config));
  }

  double horizon() const {
    return opts.horizon_override > 0.0 ? opts.horizon_override : sc.horizon;
  }

  ControlDecision decide(double t, const Eigen::VectorXd& x,
                         const Eigen::VectorXd& zeta) const {
    InertialState st(sc.n, x);
    st.t = t;
    const DesiredSignals sig = desired_signals(sc, st, t);
    const Eigen::VectorXd mu_d = mu_desired(x, zeta, sig, care, mats);
    const BarrierEvaluation eval = barrier_h(x, zeta, sc.config, mats, table);
    if (!opts.filter_enabled) {
      ControlDecision dec;
      dec.mu = mu_d;
      dec.mu_d = mu_d;
      dec.b_at_mud = constraint_b(x, zeta, mu_d, 0.0, eval, sc.config, mats);
      return dec;
    }
    return optimal_control(x, zeta, mu_d, eval, sc.config, mats);
  }

  // Controller-state derivative for the co-integrated closed loop, given the
  // physical-block derivative dx (which includes accelerations the control
  // model neglects, such as gravity). When the trajectory sits on the
  // composite barrier surface with the filter active, those unmodeled
  // accelerations can press h downward at a rate the relaxed correction no
  // longer counters once h < 0, because the slack absorbs the constraint.
  // Discrete realizations of this controller chatter across the surface and
  // stay safe; the continuous limit of that chattering is sliding, so on the
  // surface we add the minimal extra correction along the filter direction
  // that keeps h from decreasing.
  Eigen::VectorXd zeta_rate(double t, const Eigen::VectorXd& xs,
                            const Eigen::VectorXd& zs,
                            const Eigen::VectorXd& dx) const {
    InertialState st(sc.n, xs);
    st.t = t;
    const DesiredSignals sig = desired_signals(sc, st, t);
    const Eigen::VectorXd mu_d = mu_desired(xs, zs, sig, care, mats);
    const BarrierEvaluation eval = barrier_h(xs, zs, sc.config, mats, table);
    Eigen::VectorXd mu = mu_d;
    double lambda = 0.0;
    if (opts.filter_enabled) {
      const ControlDecision dec =
          optimal_control(xs, zs, mu_d, eval, sc.config, mats);
      mu = dec.mu;
      lambda = dec.lambda;
    }
    if (lambda > 0.0 && std::abs(eval.h) < 1e-7) {
      const Eigen::VectorXd dir = mats.Bc.transpose() * eval.grad_zeta;
      const double dir2 = dir.squaredNorm();
      const double hdot = eval.grad_x.dot(dx) +
                          eval.grad_zeta.dot(mats.Ac * zs + mats.Bc * mu);
      if (hdot < 0.0 && dir2 > 0.0) mu += (-hdot / dir2) * dir;
    }
    return mats.Ac * zs + mats.Bc * mu;
  }

  void check_safe_start(const Eigen::VectorXd& x,
                        const Eigen::VectorXd& zeta) const {
    const CbfValues v = cbf_values(x, zeta, sc.config, mats, table);
    std::ostringstream bad;
    auto scan = [&](const Eigen::VectorXd& vals, const char* name) {
      for (Eigen::Index k = 0; k < vals.size(); ++k)
        if (vals[k] < 0.0) bad << " " << name << "[" << k << "]";
    };
    scan(v.R, "R");
    scan(v.R1, "R1");
    scan(v.R2, "R2");
    scan(v.V, "V");
    scan(v.V1, "V1");
    scan(v.Q, "Q");
    if (!bad.str().empty())
      throw Error("unsafe_initial_state",
                  "negative initial barriers:" + bad.str());
  }

  void log_sample(TrajectoryLog* log, double t, const Eigen::VectorXd& x,
                  const Eigen::VectorXd& zeta,
                  const std::vector<Eigen::Vector3d>& amps_low,
                  const std::vector<Eigen::Vector3d>& amps_high) const {
    const ControlDecision dec = decide(t, x, zeta);
    const BarrierEvaluation eval = barrier_h(x, zeta, sc.config, mats, table);
    const InertialState st(sc.n, x);
    Eigen::VectorXd dist(mats.l), speed(mats.l);
    for (int p = 0; p < mats.l; ++p) {
      const auto [i, j] = table.pair(p);
      dist[p] = st.r_rel(i, j).norm();
      speed[p] = (st.v(i) - st.v(j)).norm();
    }
    log->t.push_back(t);
    log->x.push_back(x);
    log->zeta.push_back(zeta);
    log->h.push_back(eval.h);
    log->lambda.push_back(dec.lambda);
    log->args.push_back(eval.args);
    log->dist.push_back(dist);
    log->speed.push_back(speed);
    log->power.push_back(apparent_power(amps_low, amps_high, sc.config, table));
    log->amps_low.push_back(amps_low);
    log->amps_high.push_back(amps_high);
  }

  std::pair<std::vector<Eigen::Vector3d>, std::vector<Eigen::Vector3d>>
  allocate_all(const Eigen::VectorXd& x, const Eigen::VectorXd& zeta) const {
    const InertialState st(sc.n, x);
    std::vector<Eigen::Vector3d> lo(mats.l), hi(mats.l);
    for (int p = 0; p < mats.l; ++p) {
      const auto [i, j] = table.pair(p);
      std::tie(lo[p], hi[p]) =
          allocate_pair(st.r_rel(i, j), zeta.segment<3>(3 * p), i, j);
    }
    return {lo, hi};
  }

  // The physical block is integrated tightly; the controller block only
  // needs its chattering band bounded relative to its (large) magnitude, so
  // it gets loose tolerances. Tight tolerances there make the error test
  // unsatisfiable while the trajectory slides along a constraint surface.
  AdaptiveOptions step_options(double max_step) const {
    AdaptiveOptions aopt;
    aopt.max_step = max_step;
    aopt.initial_step = max_step;
    const int nx = 6 * sc.n, nz = 3 * mats.l;
    aopt.rtol_vec.resize(nx + nz);
    aopt.atol_vec.resize(nx + nz);
    aopt.rtol_vec.head(nx).setConstant(1e-6);
    aopt.atol_vec.head(nx).setConstant(1e-8);
    aopt.rtol_vec.tail(nz).setConstant(1e-3);
    aopt.atol_vec.tail(nz).setConstant(1.0);
    // Bound how far the controller state can move in one step so that a
    // filter activation spike cannot overshoot a constraint surface within a
    // single step; the physical block is left unbounded.
    aopt.max_delta_vec =
        Eigen::VectorXd::Constant(nx + nz, std::numeric_limits<double>::max());
    aopt.max_delta_vec.tail(nz).setConstant(300.0);
    // With the filter active the exact closed loop keeps the composite
    // barrier nonnegative once it is nonnegative (the optimal control pins
    // hdot = -(alpha + eta) h on the active constraint), but below zero the
    // slack term drains the correction and the barrier diverges. Guarding
    // the sign change keeps integration error from tunneling through that
    // invariant surface.
    if (opts.filter_enabled) {
      aopt.guard = [this, nx](double, const Eigen::VectorXd& y) {
        return barrier_h(y.head(nx), y.tail(3 * mats.l), sc.config, mats, table)
            .h;
      };
      aopt.guard_tol = 1e-9;
    }
    return aopt;
  }
};

}  // namespace

TrajectoryLog run_averaged(const Scenario& scenario, const RunOptions& opts) {
  const Engine eng(scenario, opts);
  const int n = scenario.n;
  const double T = scenario.period;

  Eigen::VectorXd x = scenario.initial_state();
  Eigen::VectorXd zeta = Eigen::VectorXd::Zero(3 * eng.mats.l);
  eng.check_safe_start(x, zeta);

  TrajectoryLog log;
  log.n = n;
  log.l = eng.mats.l;

  // Stacked closed loop: averaged plant (exactly A x + B zeta between
  // samples, since the allocation realizes the prescribed forces) plus the
  // control dynamics driven by the filtered input.
  auto rhs = [&](double t, const Eigen::VectorXd& y) {
    Eigen::VectorXd xs = y.head(6 * n);
    Eigen::VectorXd zs = y.tail(3 * eng.mats.l);
    InertialState st(n, xs);
    st.t = t;
    Eigen::VectorXd dy(y.size());
    dy.head(6 * n) = eng.mats.A * xs + eng.mats.B * zs;
    for (int i = 0; i < n; ++i)
      dy.segment<3>(3 * (n + i)) +=
          gravity(scenario.env, scenario.params, st.r(i)) /
          scenario.params.mass;
    dy.tail(3 * eng.mats.l) = eng.zeta_rate(t, xs, zs, dy.head(6 * n));
    return dy;
  };

  const long steps = std::lround(eng.horizon() / T);
  const AdaptiveOptions aopt = eng.step_options(T / 10.0);
  double hcur = aopt.initial_step;
  Eigen::VectorXd y(6 * n + 3 * eng.mats.l);
  y << x, zeta;
  {
    const auto [lo, hi] = eng.allocate_all(x, zeta);
    eng.log_sample(&log, 0.0, x, zeta, lo, hi);
  }
  for (long k = 0; k < steps; ++k) {
    y = rk4_adaptive_advance(rhs, k * T, (k + 1) * T, y, aopt, &hcur);
    const double t = (k + 1) * T;
    x = y.head(6 * n);
    zeta = y.tail(3 * eng.mats.l);
    const auto [lo, hi] = eng.allocate_all(x, zeta);
    eng.log_sample(&log, t, x, zeta, lo, hi);
  }
  return log;
}

TrajectoryLog run_full(const Scenario& scenario, const RunOptions& opts) {
  const Engine eng(scenario, opts);
  const int n = scenario.n;
  const double T = scenario.period;

  Eigen::VectorXd x = scenario.initial_state();
  Eigen::VectorXd zeta = Eigen::VectorXd::Zero(3 * eng.mats.l);
  eng.check_safe_start(x, zeta);

  TrajectoryLog log;
  log.n = n;
  log.l = eng.mats.l;

  AmplitudeSchedule sched{eng.table};
  auto rhs = [&](double t, const Eigen::VectorXd& y) {
    Eigen::VectorXd xs = y.head(6 * n);
    Eigen::VectorXd zs = y.tail(3 * eng.mats.l);
    InertialState st(n, xs);
    st.t = t;
    Eigen::VectorXd dy(y.size());
    dy.head(6 * n) = full_rhs(st, sched, scenario.env, scenario.params);
    dy.tail(3 * eng.mats.l) = eng.zeta_rate(t, xs, zs, dy.head(6 * n));
    return dy;
  };

  const long steps = std::lround(eng.horizon() / T);
  // The step cap resolves the fastest field alternation.
  const AdaptiveOptions aopt = eng.step_options(T / 200.0);
  double hcur = aopt.initial_step;
  Eigen::VectorXd y(6 * n + 3 * eng.mats.l);
  y << x, zeta;
  for (long k = 0; k <= steps; ++k) {
    const double t0 = k * T;
    x = y.head(6 * n);
    zeta = y.tail(3 * eng.mats.l);
    // Sample zeta(kT), realize it as sinusoid amplitudes, hold for one
    // period.
    const auto [lo, hi] = eng.allocate_all(x, zeta);
    sched.period_index = k;
    sched.p_low = lo;
    sched.p_high = hi;
    eng.log_sample(&log, t0, x, zeta, lo, hi);
    if (k == steps) break;
    y = rk4_adaptive_advance(rhs, t0, t0 + T, y, aopt, &hcur);
  }
  return log;
}

ConstraintReport monitor(const TrajectoryLog& log, const Scenario& scenario) {
  if (log.t.empty()) throw Error("empty_log", "no samples to monitor");
  ConstraintReport rep;
  rep.min_distance = log.dist.front().minCoeff();
  rep.max_speed = 0.0;
  rep.max_power = 0.0;
  rep.min_h = log.h.front();

  const PairTable table(scenario.n);
  auto note_violation = [&](size_t k, const std::string& what) {
    if (rep.violation_time < 0.0) {
      rep.violation_time = log.t[k];
      rep.violation_what = what;
    }
  };
  for (size_t k = 0; k < log.t.size(); ++k) {
    rep.min_distance = std::min(rep.min_distance, log.dist[k].minCoeff());
    rep.max_speed = std::max(rep.max_speed, log.speed[k].maxCoeff());
    rep.max_power = std::max(rep.max_power, log.power[k].maxCoeff());
    rep.min_h = std::min(rep.min_h, log.h[k]);
    for (int p = 0; p < log.l; ++p) {
      const auto [i, j] = table.pair(p);
      const std::string pair_name =
          std::to_string(i + 1) + "_" + std::to_string(j + 1);
      if (log.dist[k][p] < scenario.config.r_min)
        note_violation(k, "distance " + pair_name);
      if (log.speed[k][p] > scenario.config.s_max)
        note_violation(k, "speed " + pair_name);
    }
    for (int i = 0; i < log.n; ++i)
      if (log.power[k][i] > scenario.config.q_max)
        note_violation(k, "power " + std::to_string(i + 1));
  }
  rep.distance_ok = rep.min_distance >= scenario.config.r_min;
  rep.speed_ok = rep.max_speed <= scenario.config.s_max;
  rep.power_ok = rep.max_power <= scenario.config.q_max;

  bool active = false;
  for (size_t k = 0; k < log.t.size(); ++k) {
    if (log.lambda[k] > 0.0) {
      if (!active) {
        rep.lambda_active.push_back({log.t[k], log.t[k]});
        active = true;
      } else {
        rep.lambda_active.back().t1 = log.t[k];
      }
    } else {
      active = false;
    }
  }

  const size_t last = log.t.size() - 1;
  InertialState st(scenario.n, log.x[last]);
  st.t = log.t[last];
  const DesiredSignals sig = desired_signals(scenario, st, log.t[last]);
  for (int j = 1; j < scenario.n; ++j) {
    const double err =
        (st.r_rel(0, j) - sig.d.segment<3>(3 * (j - 1))).norm();
    rep.terminal_formation_error = std::max(rep.terminal_formation_error, err);
  }
  return rep;
}

}  // namespace emff
