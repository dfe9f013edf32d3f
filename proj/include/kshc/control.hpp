#ifndef KSHC_CONTROL_HPP
#define KSHC_CONTROL_HPP

#include <cstdint>
#include <vector>

#include "kshc/riccati.hpp"
#include "kshc/sde.hpp"

namespace kshc {

/// One dyadic stage: interval (t_start, t_end) of length tau_j = T/2^j with
/// cut frequency r_j = beta^2 (2^j)^4 and its penalty epsilon_j.
struct LRScheduleEntry {
  int j = 0;
  double t_start = 0, t_end = 0;
  double tau = 0;
  double r = 0;
  double epsilon = 0;
};

struct LRSchedule {
  double T = 0;
  double beta = 0;
  std::vector<LRScheduleEntry> entries;
};

/// Dyadic schedule truncated at the first stage whose band covers all
/// retained modes. epsilon_j = eps0 * eps_ratio^j.
LRSchedule lr_schedule(double T, double beta, int n_modes, double eps0 = 1e-5,
                       double eps_ratio = 0.25);

struct IntervalSummary {
  int j = 0;
  double r = 0, tau = 0, epsilon = 0;
  double e_norm2_start = 0;
  double e_norm2_mid = 0;   // after the control half
  double e_norm2_end = 0;   // after the free half
  double e_band2_mid = 0;   // E |Pi_{r_j} X(mid)|^2
  double cost = 0;          // E int_{D0} |h|^2 over the interval
};

struct LRSynthesisReport {
  LRSchedule schedule;
  double beta_used = 0;
  int beta_doublings = 0;
  bool contracting = false;
  std::vector<IntervalSummary> intervals;
  double initial_norm2 = 0;
  double final_norm2 = 0;   // at t = T, after the free tail
  double total_cost = 0;    // sum of interval costs plus the (zero) tail
  std::vector<double> cost_ledger;  // E cost increment per step
  std::vector<int> k_start, k_mid, k_end;  // step markers per interval
  double dt = 0;
  int n_steps = 0;
  int paths = 0;
  std::uint64_t seed = 0;
  ControlPolicy policy;  // glued per-step feedback gains
};

struct LRSynthesisOptions {
  int n_paths = 100;
  int workers = 1;
  std::uint64_t seed = 1;
  double dt = 1e-4;  // refined automatically against the last interval
  double eps0 = 1e-5;
  double eps_ratio = 0.25;
  int max_beta_doublings = 6;
  int min_steps_per_half = 40;
  RiccatiOptions riccati;
};

/**
 * Dyadic Lebeau-Robbiano loop: on each stage, penalized LQ feedback kills the
 * stage band over the first half interval, then the system evolves freely.
 * beta doubles (up to a cap) until the per-interval E-norms contract.
 */
LRSynthesisReport lebeau_robbiano_synthesize(const ModalState& x0, double T,
                                             double beta0,
                                             const SpectralBasis& basis,
                                             const SystemCoefficients& coeffs,
                                             const ControlOperator& ctrl_op,
                                             const LRSynthesisOptions& opts = {});

struct PartialControlEnsemble {
  double e_norm2_start = 0;
  double e_band2_mid = 0;
  double e_band2_end = 0;
  double e_norm2_mid = 0;
  double e_norm2_end = 0;
  double e_cost = 0;
};

/// One stage in isolation, ensemble statistics.
PartialControlEnsemble partial_spectral_control(
    const ModalState& x0, double r, double tau, double epsilon,
    const SpectralBasis& basis, const SystemCoefficients& coeffs,
    const ControlOperator& ctrl_op, int n_paths, std::uint64_t seed, double dt,
    int workers, const RiccatiOptions& ropts = {});

struct PartialControlPath {
  ControlPolicy policy;
  ModalState mid_state;
  ModalState end_state;
  double cost = 0;
};

/// One stage driven by a given sample path; returns the policy for replay.
PartialControlPath partial_spectral_control_path(
    const ModalState& x0, double r, double tau, double epsilon,
    const SpectralBasis& basis, const SystemCoefficients& coeffs,
    const ControlOperator& ctrl_op, const BrownianPath& path,
    const RiccatiOptions& ropts = {});

struct CostCurvePoint {
  double T = 0;
  double total_cost = 0;
  double beta_used = 0;
  bool ok = false;
};

struct CostCurveReport {
  std::vector<CostCurvePoint> points;
  double c_hat = 0;      // slope of log(cost) against 1/T
  double intercept = 0;
  double r_squared = 0;
  bool all_ok = false;
};

/// Runs the synthesis across horizons and fits log(total cost) ~ C/T.
CostCurveReport cost_curve(const std::vector<double>& T_values,
                           const ModalState& x0, const SpectralBasis& basis,
                           const SystemCoefficients& coeffs,
                           const ControlOperator& ctrl_op,
                           const LRSynthesisOptions& base_opts,
                           double beta_base = 1.0);

}  // namespace kshc

#endif
