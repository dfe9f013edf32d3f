#ifndef KSHC_SOURCETERM_HPP
#define KSHC_SOURCETERM_HPP

#include <cstdint>
#include <functional>
#include <vector>

#include "kshc/control.hpp"
#include "kshc/sde.hpp"
#include "kshc/weights.hpp"

namespace kshc {

/// Deterministic modal source F(t); the zero function when empty.
using SourceFn = std::function<Eigen::VectorXd(double t)>;

struct SourceTermOptions {
  double dt = 2e-4;
  int n_paths = 50;
  int workers = 1;
  std::uint64_t seed = 1;
  double eps0 = 1e-6;
  double eps_ratio = 0.2;
  /// Block loop stops at the first T_K with rho0(T_K)/rho0(0) below this.
  double rho0_floor = 1e-12;
  int min_steps_per_block = 40;
  RiccatiOptions riccati;
};

/**
 * Deterministic data shared by every path and every fixed-point iteration:
 * the geometric grid T_k, the per-block full-band LQ gains, and the step
 * layout. Gains act on the controlled part X - X1, where X1 restarts from
 * zero at each T_k and carries the source only.
 */
struct SourceTermPlan {
  SourceWeightParams wp;
  int K = 0;                     // controlled blocks 0..K-1
  std::vector<double> Tk;        // T_0..T_K
  std::vector<int> k_step;       // step index of each T_k; k_step[0] = 0
  double dt = 0;
  int n_steps = 0;               // full horizon [0, T]
  std::vector<double> eps_block;
  ControlPolicy gains;           // per-step, active on [0, k_step[K])
  std::vector<double> log_w_rho0;  // per step: log(rho0(0)/rho0(t)), t <= T_K
  std::vector<double> log_rho_t;   // per step: log rho(t), t <= T_K
};

SourceTermPlan build_source_term_plan(const SourceWeightParams& wp,
                                      const SpectralBasis& basis,
                                      const SystemCoefficients& coeffs,
                                      const ControlOperator& ctrl_op,
                                      const SourceTermOptions& opts);

/// Per-path outcome of one source-term rollout.
struct PathSourceResult {
  std::vector<double> block_cost;
  std::vector<double> block_data_norm2;  // |X(T_k)|^2 entering block k
  std::vector<double> block_a_norm2;     // |X1(T_{k+1})|^2, the inherited data
  std::vector<double> block_resid2;      // |X(T_{k+1}) - X1(T_{k+1})|^2
  double sup_y_w = 0;   // sup_t |y(t)|^2 (rho0(0)/rho0(t))^2 over [0, T_K]
  double sup_z_w = 0;
  double cost_w = 0;    // int |h|^2 (rho0(0)/rho0(t))^2
  double final_norm2 = 0;
  double final_y_norm2 = 0;
};

/**
 * Rolls one path through the block structure: X carries data, source and
 * control; X1 restarts at zero per block and carries the source only, so the
 * feedback target is the homogeneous part X - X1. Optionally records states,
 * the rho_hat-weighted running X_t value, and the applied controls.
 */
void run_source_path(const SourceTermPlan& plan, const ModalState& x0,
                     const std::vector<Eigen::VectorXd>* source,
                     const BrownianPath& path, const SpectralBasis& basis,
                     const SystemCoefficients& coeffs,
                     const ControlOperator& ctrl_op, PathSourceResult& out,
                     std::vector<ModalState>* record_states = nullptr,
                     std::vector<double>* record_xt = nullptr,
                     std::vector<Eigen::VectorXd>* record_controls = nullptr);

struct BlockSummary {
  int k = 0;
  double t0 = 0, t1 = 0;
  double epsilon = 0;
  double e_data_norm2 = 0;
  double e_a_norm2 = 0;
  double e_resid2 = 0;
  double cost = 0;
  double cost_bound = 0;  // gamma^2(t1 - t0) * e_data_norm2
};

struct SourceTermReport {
  SourceWeightParams wp;
  int K = 0;
  std::vector<double> Tk;
  std::vector<BlockSummary> blocks;
  // weighted quantities of the controlled range [0, T_K]; weights carry the
  // normalization rho0(0), so absolute values are  value * exp(-2 log_rho0_0)
  double e_sup_y_w = 0, e_sup_z_w = 0, e_cost_w = 0;
  double log_rho0_0 = 0;
  double rhs_plain = 0;      // E(|y0|^2 + |z0|^2) + int ||F/rho||^2
  double log_ct_ratio = 0;   // log of (weighted lhs) / rhs
  double e_final_norm2 = 0;  // at t = T, unweighted
  double e_final_y_norm2 = 0;
  double source_scale = 0;   // sup_t |F(t)|
  double dt = 0;
  int paths = 0;
};

SourceTermReport source_term_control(const ModalState& x0, const SourceFn& F,
                                     const SourceWeightParams& wp,
                                     const SpectralBasis& basis,
                                     const SystemCoefficients& coeffs,
                                     const ControlOperator& ctrl_op,
                                     const SourceTermOptions& opts);

/// Materialize a deterministic source on the plan grid (active range only).
std::vector<Eigen::VectorXd> materialize_source(const SourceFn& F,
                                                const SourceTermPlan& plan,
                                                int n_modes);

struct RegularityReport {
  double sup_y_h2_w = 0, sup_z_h1_w = 0;  // rho_hat-weighted, normalized
  double int_y_h4_w = 0, int_z_h2_w = 0;  // by rho_hat(0)
  double log_rho_hat_0 = 0;
  double rhs_plain = 0;
  double log_ratio = 0;
};

/// The four rho_hat-weighted trajectory quantities against the H2 x H1 data
/// and source norms, over the controlled range of the plan grid.
RegularityReport regular_trajectory_report(
    const std::vector<ModalState>& states, const ModalState& x0,
    const std::vector<Eigen::VectorXd>* source, const SourceTermPlan& plan,
    const SpectralBasis& basis);

}  // namespace kshc

#endif
