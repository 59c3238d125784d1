#pragma once

#include <Eigen/Dense>
#include <vector>

#include "emff/allocation.hpp"
#include "emff/care.hpp"
#include "emff/dipole.hpp"
#include "emff/pairs.hpp"

namespace emff {

// Weights, constraint bounds, and barrier parameters for one scenario.
struct ControllerConfig {
  double rho = 20.0;       // soft-min sharpness
  double gamma = 1e40;     // slack weight (large disables the slack)
  double ac_scale = -0.1;  // Ac = ac_scale * I
  // Linear class-K slopes.
  double alpha0 = 0.5;
  double alpha1 = 1.0;
  double alphav = 1.0;
  double alpha = 0.03;
  // LQR weights: Wz = diag(wz_pos I, wz_vel I, wz_zeta I), Wmu = wmu I.
  double wz_pos = 1e6;
  double wz_vel = 1.0;
  double wz_zeta = 0.01;
  double wmu = 1.0;
  PsiParams psi_params;
  double r_min = 1.0;   // m
  double s_max = 0.025; // m/s
  double q_max = 1e4;   // W
  double power_norm = 0.0;        // 1/(N^2 sigma^2)
  std::vector<double> impedance;  // Z per pair, Ohm
};

// Series-RL impedance magnitude of one coil at the pair frequency.
double coil_impedance(const SatelliteParams& params, double omega);

// Fills power_norm and the per-pair impedances from the coil parameters.
void attach_coil_model(ControllerConfig* config, const SatelliteParams& params,
                       const PairTable& table);

// Stacked linear model, reduced relative dynamics, and the controller cascade.
struct SystemMatrices {
  int n = 0;
  int l = 0;
  double accel_gain = 0.0;  // c0 / (2m)
  Eigen::MatrixXd A;        // 6n x 6n
  Eigen::MatrixXd B;        // 6n x 3l
  Eigen::MatrixXd B0;       // n x l
  Eigen::MatrixXd T_red;    // 6(n-1) x 6n, z = T_red x
  Eigen::MatrixXd F;        // 6(n-1) square
  Eigen::MatrixXd G;        // 6(n-1) x 3l
  Eigen::MatrixXd G0;       // (n-1) x l
  Eigen::MatrixXd Ftilde;   // cascade [[F, G], [0, Ac]]
  Eigen::MatrixXd Gtilde;   // cascade [[0], [Bc]]
  Eigen::MatrixXd Ac;       // 3l x 3l
  Eigen::MatrixXd Bc;       // 3l x 3l, invertible
  Eigen::MatrixXd Bc_inv;
  Eigen::MatrixXd D;  // l x l pair coupling: vdot_i - vdot_j = gain (D_q x I3) zeta
};

SystemMatrices build_matrices(const PairTable& table, double mass,
                              const ControllerConfig& config);

// Diagonal LQR weights for the cascade state (positions, velocities, zeta)
// and input.
Eigen::MatrixXd lqr_state_weight(const SystemMatrices& mats,
                                 const ControllerConfig& config);
Eigen::MatrixXd lqr_input_weight(const SystemMatrices& mats,
                                 const ControllerConfig& config);

// Desired relative trajectory stacked over pairs (1,2)...(1,n), with enough
// derivatives for the feedforward terms.
struct DesiredSignals {
  Eigen::VectorXd d;        // 3(n-1)
  Eigen::VectorXd d_dot;
  Eigen::VectorXd d_ddot;
  Eigen::VectorXd d_dddot;

  static DesiredSignals zero(int n);
};

// zeta_d = (G0^T (G0 G0^T)^-1 x I3) d_ddot.
Eigen::VectorXd zeta_desired(const SystemMatrices& mats,
                             const Eigen::VectorXd& d_ddot);

// LQR tracking control for the cascade:
// mu_d = K (ztilde - ztilde_d) - Bc^-1 (zetadot_d - Ac zeta_d).
Eigen::VectorXd mu_desired(const Eigen::VectorXd& x,
                           const Eigen::VectorXd& zeta,
                           const DesiredSignals& sig, const CareSolution& care,
                           const SystemMatrices& mats);

// All candidate barrier values, including the lower-order ones that define
// the safe start set.
struct CbfValues {
  Eigen::VectorXd R;   // l: collision barriers
  Eigen::VectorXd R1;  // l
  Eigen::VectorXd R2;  // l
  Eigen::VectorXd V;   // l: speed barriers
  Eigen::VectorXd V1;  // l
  Eigen::VectorXd Q;   // n: power barriers
};

CbfValues cbf_values(const Eigen::VectorXd& x, const Eigen::VectorXd& zeta,
                     const ControllerConfig& config, const SystemMatrices& mats,
                     const PairTable& table);

// Log-sum-exponential soft minimum, max-shifted for overflow safety.
double soft_min(const Eigen::VectorXd& values, double rho);
Eigen::VectorXd soft_min_weights(const Eigen::VectorXd& values, double rho);

struct BarrierEvaluation {
  double h = 0.0;
  Eigen::VectorXd grad_x;     // 6n
  Eigen::VectorXd grad_zeta;  // 3l
  Eigen::VectorXd args;       // [R2 (l); V1 (l); Q (n)]
  Eigen::VectorXd weights;    // soft-min convex weights per argument
  CbfValues values;
};

// Composite soft-minimum barrier with analytic gradients.
BarrierEvaluation barrier_h(const Eigen::VectorXd& x,
                            const Eigen::VectorXd& zeta,
                            const ControllerConfig& config,
                            const SystemMatrices& mats, const PairTable& table);

// b(x, zeta, mu, eta) = grad_x . (Ax + B zeta) + grad_zeta . (Ac zeta + Bc mu)
//                      + alpha(h) + eta h.
double constraint_b(const Eigen::VectorXd& x, const Eigen::VectorXd& zeta,
                    const Eigen::VectorXd& mu_hat, double eta_hat,
                    const BarrierEvaluation& eval,
                    const ControllerConfig& config, const SystemMatrices& mats);

struct ControlDecision {
  Eigen::VectorXd mu;
  Eigen::VectorXd mu_d;
  double lambda = 0.0;
  double eta = 0.0;
  double b_at_mud = 0.0;
};

// Closed-form minimizer of 1/2 |mu - mu_d|^2 + gamma/2 eta^2 subject to
// b >= 0.
ControlDecision optimal_control(const Eigen::VectorXd& x,
                                const Eigen::VectorXd& zeta,
                                const Eigen::VectorXd& mu_d,
                                const BarrierEvaluation& eval,
                                const ControllerConfig& config,
                                const SystemMatrices& mats);

}  // namespace emff
