#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>

#include <Eigen/Dense>

#include "bayeslista/classic_solvers.hpp"
#include "bayeslista/distributions.hpp"
#include "bayeslista/propagation.hpp"

namespace bayeslista {

/// EP site approximations of the weight prior factors N(w; 0, 1/eta).
/// Each site holds Gaussian natural parameters for its weight and a gamma
/// contribution (shape, rate increments) to q(eta).
struct PriorSites {
  Eigen::MatrixXd w_prec, w_shift, w_shape, w_rate;
  Eigen::MatrixXd s_prec, s_shift, s_shape, s_rate;
};

/// Factorised posterior approximation over W, S, the output noise precision
/// gamma and the weight precision eta.
struct PbpState {
  GaussianMat W;  // D x K
  GaussianMat S;  // D x D
  GammaParams gamma{6.0, 6.0};
  GammaParams eta{6.0, 6.0};
  double lambda = 0.1;
  int layers = 1;
  PriorSites sites;

  Eigen::Index dim() const { return W.rows(); }
  Eigen::Index obs_dim() const { return W.cols(); }
};

// What happens when the moment update drives a weight variance to or below zero.
enum class VarianceGuard {
  kClamp,        // set it to the floor, keep the mean update
  kRejectEntry,  // keep that weight's previous mean and variance
  kRejectPoint,  // keep the whole previous state for this data point
};

struct PbpOptions {
  MomentMode mode = MomentMode::kPrinted;
  VarianceGuard guard = VarianceGuard::kRejectEntry;
  bool priors = true;
  double var_floor = 1e-12;
  double gamma_floor = 1e-6;
};

// Event counts accumulated over updates.
struct PbpCounters {
  std::size_t updates = 0;
  std::size_t skipped = 0;        // likelihood updates dropped on non-finite log Z
  std::size_t skipped_variance = 0;  // updates dropped by VarianceGuard::kRejectPoint
  std::size_t var_clamps = 0;     // weight variances that hit the guard
  std::size_t gamma_rejects = 0;  // gamma moment matches that produced invalid params
  std::size_t prior_skips = 0;    // prior sites left unchanged (invalid cavity)
};

/// Initial state: weight means N(0, 1/K) for W and N(0, 1/D) for S, weight
/// variances 1/K and 1/D, both gamma factors at shape 6, rate 6, and empty
/// prior sites.
PbpState pbp_init(Eigen::Index dim, Eigen::Index obs_dim, double lambda, int layers,
                  std::uint64_t seed);

/// Warm start: weight means at the ISTA weights, weight variances
/// var_scale / K for W and var_scale / D for S, gamma factors as in pbp_init.
PbpState pbp_init_from_ista(const IstaWeights& w, double lambda, int layers,
                            double var_scale = 0.01);

/// log Z for one training pair, with the output belief of the network and
/// the noise precision integrated out:
///   sum_d log[ w_d T(beta_d; 0, b/a, 2a) + (1 - w_d) N(beta_d; m_d, b/(a-1) + v_d) ].
/// Requires gamma.shape > 1.
double log_z(const PbpState& q, const Eigen::VectorXd& y, const Eigen::VectorXd& beta,
             MomentMode mode = MomentMode::kPrinted);

// log Z given the network output and an explicit noise-precision factor.
double output_log_z(const SpikeSlabVec& out, const Eigen::VectorXd& beta, GammaParams gamma,
                    OutputGradient* grad = nullptr);

struct LogZGradient {
  double log_z = 0.0;
  WeightGradient grad;
};

LogZGradient grad_log_z(const PbpState& q, const Eigen::VectorXd& y,
                        const Eigen::VectorXd& beta, MomentMode mode = MomentMode::kPrinted);

/// Gaussian moment update from the derivatives of log Z with respect to the
/// mean and variance of the factor being refined:
///   m' = m + v dm,  v' = v - v^2 (dm^2 - 2 dv).
Moments gaussian_moment_update(double mean, double var, double dlogz_dmean, double dlogz_dvar);

/// Gamma moment match of the tilted distribution Gam(x; a, b) f(x) / Z(a, b),
/// given log Z evaluated at shapes a, a + 1 and a + 2 (same rate). Returns
/// nothing when the matched variance is not positive or the result is not
/// finite.
std::optional<GammaParams> gamma_moment_match(GammaParams current, double log_z0, double log_z1,
                                              double log_z2);

// log Z of a single output component (one term of output_log_z).
double component_log_z(double omega, double mean, double var, double beta, GammaParams gamma);

/// Gamma moment match of the noise precision against the likelihood terms of
/// one pair, one output component at a time. Invalid matches leave gamma
/// unchanged and are counted.
void update_noise_precision(GammaParams& gamma, const SpikeSlabVec& out,
                            const Eigen::VectorXd& beta, const PbpOptions& options,
                            PbpCounters& counters);

/// ADF incorporation of one likelihood factor. Returns false, leaving q
/// unchanged, when log Z or its gradient is not finite.
bool adf_update_likelihood(PbpState& q, const Eigen::VectorXd& y, const Eigen::VectorXd& beta,
                           const PbpOptions& options, PbpCounters& counters);

/// One EP sweep over the weight prior factors. No-op when options.priors is
/// false.
void ep_update_priors(PbpState& q, const PbpOptions& options, PbpCounters& counters);

// Throws a numeric error if any variance or gamma parameter is not positive.
void check_state(const PbpState& q);

struct PbpTrainOptions {
  int epochs = 50;
  std::uint64_t seed = 0;
  PbpOptions pbp;
  std::function<void(int, const PbpState&, const PbpCounters&)> on_epoch;
};

/// Per epoch: shuffle, ADF over every pair, then one EP sweep over the priors.
/// Throws a numeric error if more than half the pairs of an epoch are skipped.
PbpState pbp_train(const Eigen::MatrixXd& Y, const Eigen::MatrixXd& B, PbpState q,
                   const PbpTrainOptions& options, PbpCounters* counters = nullptr);

// Predictive moments of the network output under q.
PredictiveMoments pbp_predict(const PbpState& q, const Eigen::VectorXd& y,
                              MomentMode mode = MomentMode::kPrinted);

}  // namespace bayeslista
