#include "emff/control.hpp"

#include <cmath>

#include "emff/error.hpp"

namespace emff {

namespace {

// kron(M, I3) for small dense M.
Eigen::MatrixXd kron_i3(const Eigen::MatrixXd& M) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(3 * M.rows(), 3 * M.cols());
  for (Eigen::Index i = 0; i < M.rows(); ++i)
    for (Eigen::Index j = 0; j < M.cols(); ++j)
      if (M(i, j) != 0.0)
        out.block<3, 3>(3 * i, 3 * j) =
            M(i, j) * Eigen::Matrix3d::Identity();
  return out;
}

}  // namespace

double coil_impedance(const SatelliteParams& params, double omega) {
  return std::hypot(params.coil_resistance, omega * params.coil_inductance);
}

void attach_coil_model(ControllerConfig* config, const SatelliteParams& params,
                       const PairTable& table) {
  const double ns = params.turns * params.coil_area;
  config->power_norm = 1.0 / (ns * ns);
  config->impedance.resize(table.count());
  for (int p = 0; p < table.count(); ++p)
    config->impedance[p] = coil_impedance(params, table.omega(p));
}

SystemMatrices build_matrices(const PairTable& table, double mass,
                              const ControllerConfig& config) {
  const int n = table.n();
  const int l = table.count();
  SystemMatrices m;
  m.n = n;
  m.l = l;
  m.accel_gain = kDipoleConstant / (2.0 * mass);

  // B0 sign pattern: column p = pair (i,j) has +1 at i, -1 at j.
  Eigen::MatrixXd pattern = Eigen::MatrixXd::Zero(n, l);
  for (int p = 0; p < l; ++p) {
    const auto [i, j] = table.pair(p);
    pattern(i, p) = 1.0;
    pattern(j, p) = -1.0;
  }
  m.B0 = m.accel_gain * pattern;

  m.A = Eigen::MatrixXd::Zero(6 * n, 6 * n);
  m.A.topRightCorner(3 * n, 3 * n).setIdentity();
  m.B = Eigen::MatrixXd::Zero(6 * n, 3 * l);
  m.B.bottomRows(3 * n) = kron_i3(m.B0);

  // z = T x with z the (1,j) relative coordinates.
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(n - 1, n);
  S.col(0).setOnes();
  S.rightCols(n - 1) = -Eigen::MatrixXd::Identity(n - 1, n - 1);
  Eigen::MatrixXd Tblk = Eigen::MatrixXd::Zero(2 * (n - 1), 2 * n);
  Tblk.topLeftCorner(n - 1, n) = S;
  Tblk.bottomRightCorner(n - 1, n) = S;
  m.T_red = kron_i3(Tblk);

  Eigen::MatrixXd Fblk = Eigen::MatrixXd::Zero(2 * (n - 1), 2 * (n - 1));
  Fblk.topRightCorner(n - 1, n - 1).setIdentity();
  m.F = kron_i3(Fblk);

  m.G0 = S * m.B0;
  m.G = Eigen::MatrixXd::Zero(6 * (n - 1), 3 * l);
  m.G.bottomRows(3 * (n - 1)) = kron_i3(m.G0);

  m.Ac = config.ac_scale * Eigen::MatrixXd::Identity(3 * l, 3 * l);
  m.Bc = Eigen::MatrixXd::Identity(3 * l, 3 * l);
  m.Bc_inv = Eigen::MatrixXd::Identity(3 * l, 3 * l);

  const int nz = 6 * (n - 1);
  m.Ftilde = Eigen::MatrixXd::Zero(nz + 3 * l, nz + 3 * l);
  m.Ftilde.topLeftCorner(nz, nz) = m.F;
  m.Ftilde.topRightCorner(nz, 3 * l) = m.G;
  m.Ftilde.bottomRightCorner(3 * l, 3 * l) = m.Ac;
  m.Gtilde = Eigen::MatrixXd::Zero(nz + 3 * l, 3 * l);
  m.Gtilde.bottomRows(3 * l) = m.Bc;

  // Pair coupling: vdot_i - vdot_j = accel_gain * (D.row(q) x I3) zeta.
  m.D = Eigen::MatrixXd::Zero(l, l);
  for (int q = 0; q < l; ++q) {
    const auto [i, j] = table.pair(q);
    m.D.row(q) = pattern.row(i) - pattern.row(j);
  }
  return m;
}

Eigen::MatrixXd lqr_state_weight(const SystemMatrices& mats,
                                 const ControllerConfig& config) {
  const int nz = 6 * (mats.n - 1);
  const int nc = 3 * mats.l;
  Eigen::MatrixXd Wz = Eigen::MatrixXd::Zero(nz + nc, nz + nc);
  Wz.diagonal().head(nz / 2).setConstant(config.wz_pos);
  Wz.diagonal().segment(nz / 2, nz / 2).setConstant(config.wz_vel);
  Wz.diagonal().tail(nc).setConstant(config.wz_zeta);
  return Wz;
}

Eigen::MatrixXd lqr_input_weight(const SystemMatrices& mats,
                                 const ControllerConfig& config) {
  return config.wmu * Eigen::MatrixXd::Identity(3 * mats.l, 3 * mats.l);
}

DesiredSignals DesiredSignals::zero(int n) {
  DesiredSignals s;
  s.d = Eigen::VectorXd::Zero(3 * (n - 1));
  s.d_dot = s.d;
  s.d_ddot = s.d;
  s.d_dddot = s.d;
  return s;
}

Eigen::VectorXd zeta_desired(const SystemMatrices& mats,
                             const Eigen::VectorXd& d_ddot) {
  const int n = mats.n;
  if (d_ddot.size() != 3 * (n - 1))
    throw Error("bad_formation_spec", "desired signal has wrong size");
  const Eigen::MatrixXd M = mats.G0 * mats.G0.transpose();
  Eigen::Map<const Eigen::Matrix<double, 3, Eigen::Dynamic>> blocks(
      d_ddot.data(), 3, n - 1);
  const Eigen::MatrixXd y = blocks * M.ldlt().solve(
      Eigen::MatrixXd::Identity(n - 1, n - 1));
  const Eigen::MatrixXd z3 = y * mats.G0;  // 3 x l
  Eigen::VectorXd zeta(3 * mats.l);
  for (int p = 0; p < mats.l; ++p) zeta.segment<3>(3 * p) = z3.col(p);
  return zeta;
}

Eigen::VectorXd mu_desired(const Eigen::VectorXd& x,
                           const Eigen::VectorXd& zeta,
                           const DesiredSignals& sig, const CareSolution& care,
                           const SystemMatrices& mats) {
  const int nz = 6 * (mats.n - 1);
  if (x.size() != 6 * mats.n || zeta.size() != 3 * mats.l ||
      sig.d.size() != 3 * (mats.n - 1))
    throw Error("bad_formation_spec", "dimension mismatch in mu_desired");
  Eigen::VectorXd ztilde(nz + 3 * mats.l);
  ztilde.head(nz) = mats.T_red * x;
  ztilde.tail(3 * mats.l) = zeta;

  const Eigen::VectorXd zeta_d = zeta_desired(mats, sig.d_ddot);
  const Eigen::VectorXd zeta_d_dot = zeta_desired(mats, sig.d_dddot);
  Eigen::VectorXd ztilde_d(nz + 3 * mats.l);
  ztilde_d.head(nz / 2) = sig.d;
  ztilde_d.segment(nz / 2, nz / 2) = sig.d_dot;
  ztilde_d.tail(3 * mats.l) = zeta_d;

  return care.gain * (ztilde - ztilde_d) -
         mats.Bc_inv * (zeta_d_dot - mats.Ac * zeta_d);
}

namespace {

struct PairKinematics {
  std::vector<Eigen::Vector3d> r, v, a;  // relative position/velocity and
                                         // commanded relative acceleration
};

PairKinematics pair_kinematics(const Eigen::VectorXd& x,
                               const Eigen::VectorXd& zeta,
                               const SystemMatrices& mats,
                               const PairTable& table) {
  PairKinematics k;
  const int n = mats.n;
  k.r.resize(mats.l);
  k.v.resize(mats.l);
  k.a.assign(mats.l, Eigen::Vector3d::Zero());
  for (int q = 0; q < mats.l; ++q) {
    const auto [i, j] = table.pair(q);
    k.r[q] = x.segment<3>(3 * i) - x.segment<3>(3 * j);
    k.v[q] = x.segment<3>(3 * (n + i)) - x.segment<3>(3 * (n + j));
    for (int p = 0; p < mats.l; ++p)
      if (mats.D(q, p) != 0.0)
        k.a[q] += mats.accel_gain * mats.D(q, p) * zeta.segment<3>(3 * p);
  }
  return k;
}

}  // namespace

CbfValues cbf_values(const Eigen::VectorXd& x, const Eigen::VectorXd& zeta,
                     const ControllerConfig& config, const SystemMatrices& mats,
                     const PairTable& table) {
  const PairKinematics k = pair_kinematics(x, zeta, mats, table);
  const int l = mats.l;
  CbfValues out;
  out.R.resize(l);
  out.R1.resize(l);
  out.R2.resize(l);
  out.V.resize(l);
  out.V1.resize(l);
  out.Q = Eigen::VectorXd::Constant(mats.n, config.q_max);
  for (int q = 0; q < l; ++q) {
    const double rv = k.r[q].dot(k.v[q]);
    out.R[q] = 0.5 * (k.r[q].squaredNorm() - config.r_min * config.r_min);
    out.R1[q] = rv + config.alpha0 * out.R[q];
    out.R2[q] = k.v[q].squaredNorm() + k.r[q].dot(k.a[q]) +
                config.alpha0 * rv + config.alpha1 * out.R1[q];
    out.V[q] = 0.5 * (config.s_max * config.s_max - k.v[q].squaredNorm());
    out.V1[q] = -k.v[q].dot(k.a[q]) + config.alphav * out.V[q];
    const double load = config.power_norm * config.impedance[q] *
                        psi(k.r[q], zeta.segment<3>(3 * q), config.psi_params);
    const auto [i, j] = table.pair(q);
    out.Q[i] -= load;
    out.Q[j] -= load;
  }
  return out;
}

double soft_min(const Eigen::VectorXd& values, double rho) {
  if (values.size() == 0) throw Error("empty_softmin", "no arguments");
  const double zmin = values.minCoeff();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < values.size(); ++i)
    acc += std::exp(-rho * (values[i] - zmin));
  return zmin - std::log(acc) / rho;
}

Eigen::VectorXd soft_min_weights(const Eigen::VectorXd& values, double rho) {
  if (values.size() == 0) throw Error("empty_softmin", "no arguments");
  const double zmin = values.minCoeff();
  Eigen::VectorXd w(values.size());
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    w[i] = std::exp(-rho * (values[i] - zmin));
    if (w[i] < 1e-300) w[i] = 0.0;
  }
  return w / w.sum();
}

BarrierEvaluation barrier_h(const Eigen::VectorXd& x,
                            const Eigen::VectorXd& zeta,
                            const ControllerConfig& config,
                            const SystemMatrices& mats,
                            const PairTable& table) {
  const int n = mats.n;
  const int l = mats.l;
  const PairKinematics k = pair_kinematics(x, zeta, mats, table);

  BarrierEvaluation eval;
  eval.values = cbf_values(x, zeta, config, mats, table);
  eval.args.resize(2 * l + n);
  eval.args << eval.values.R2, eval.values.V1, eval.values.Q;
  for (Eigen::Index i = 0; i < eval.args.size(); ++i)
    if (!std::isfinite(eval.args[i]))
      throw Error("barrier_nonfinite",
                  "barrier argument " + std::to_string(i) + " is not finite");
  eval.h = soft_min(eval.args, config.rho);
  eval.weights = soft_min_weights(eval.args, config.rho);

  eval.grad_x = Eigen::VectorXd::Zero(6 * n);
  eval.grad_zeta = Eigen::VectorXd::Zero(3 * l);
  auto r_blk = [&](int i) { return eval.grad_x.segment<3>(3 * i); };
  auto v_blk = [&](int i) { return eval.grad_x.segment<3>(3 * (n + i)); };

  const double k0 = config.alpha0, k1 = config.alpha1, kv = config.alphav;
  for (int q = 0; q < l; ++q) {
    const auto [i, j] = table.pair(q);
    // R_q2 argument.
    double w = eval.weights[q];
    if (w > 0.0) {
      const Eigen::Vector3d gr =
          w * (k.a[q] + (k0 + k1) * k.v[q] + k0 * k1 * k.r[q]);
      const Eigen::Vector3d gv = w * (2.0 * k.v[q] + (k0 + k1) * k.r[q]);
      r_blk(i) += gr;
      r_blk(j) -= gr;
      v_blk(i) += gv;
      v_blk(j) -= gv;
      for (int p = 0; p < l; ++p)
        if (mats.D(q, p) != 0.0)
          eval.grad_zeta.segment<3>(3 * p) +=
              w * mats.accel_gain * mats.D(q, p) * k.r[q];
    }
    // V_q1 argument.
    w = eval.weights[l + q];
    if (w > 0.0) {
      const Eigen::Vector3d gv = w * (-k.a[q] - kv * k.v[q]);
      v_blk(i) += gv;
      v_blk(j) -= gv;
      for (int p = 0; p < l; ++p)
        if (mats.D(q, p) != 0.0)
          eval.grad_zeta.segment<3>(3 * p) -=
              w * mats.accel_gain * mats.D(q, p) * k.v[q];
    }
    // psi terms of Q_i and Q_j share the pair's gradient.
    const double wq = eval.weights[2 * l + i] + eval.weights[2 * l + j];
    if (wq > 0.0) {
      Eigen::Vector3d dpsi_dr, dpsi_dz;
      psi_gradients(k.r[q], zeta.segment<3>(3 * q), config.psi_params,
                    &dpsi_dr, &dpsi_dz);
      const double c = -wq * config.power_norm * config.impedance[q];
      r_blk(i) += c * dpsi_dr;
      r_blk(j) -= c * dpsi_dr;
      eval.grad_zeta.segment<3>(3 * q) += c * dpsi_dz;
    }
  }
  return eval;
}

double constraint_b(const Eigen::VectorXd& x, const Eigen::VectorXd& zeta,
                    const Eigen::VectorXd& mu_hat, double eta_hat,
                    const BarrierEvaluation& eval,
                    const ControllerConfig& config,
                    const SystemMatrices& mats) {
  const Eigen::VectorXd drift = mats.A * x + mats.B * zeta;
  return eval.grad_x.dot(drift) +
         eval.grad_zeta.dot(mats.Ac * zeta + mats.Bc * mu_hat) +
         config.alpha * eval.h + eta_hat * eval.h;
}

ControlDecision optimal_control(const Eigen::VectorXd& x,
                                const Eigen::VectorXd& zeta,
                                const Eigen::VectorXd& mu_d,
                                const BarrierEvaluation& eval,
                                const ControllerConfig& config,
                                const SystemMatrices& mats) {
  ControlDecision dec;
  dec.mu_d = mu_d;
  dec.b_at_mud = constraint_b(x, zeta, mu_d, 0.0, eval, config, mats);
  const Eigen::VectorXd dir = mats.Bc.transpose() * eval.grad_zeta;
  const double dir2 = dir.squaredNorm();
  // The slack term h^2/gamma makes the surface h = 0 repel trajectories from
  // below: an arbitrarily small negative h lets the slack absorb the
  // constraint and the correction collapse, even though the exact flow can
  // never reach h < 0 from a safe state. Where the slack term is dominated by
  // the gradient term anyway (it changes lambda by at most 1%) it is dropped,
  // which restores hdot = -alpha h near the surface and makes the pinned
  // barrier numerically stable without visibly changing the control.
  double relax = eval.h * eval.h / config.gamma;
  if (relax < 0.01 * dir2) relax = 0.0;
  const double denom = dir2 + relax;
  if (dec.b_at_mud >= 0.0) {
    dec.mu = mu_d;
    return dec;
  }
  if (denom < 1e-300)
    throw Error("degenerate_filter",
                "barrier gradient in zeta vanished on the constraint");
  dec.lambda = -dec.b_at_mud / denom;
  dec.mu = mu_d + dec.lambda * dir;
  dec.eta = eval.h * dec.lambda / config.gamma;
  return dec;
}

}  // namespace emff
