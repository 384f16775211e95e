#pragma once

#include <vector>

#include <Eigen/Dense>

#include "bayeslista/distributions.hpp"

namespace bayeslista {

// How the moments of S * beta are formed when S is Gaussian and beta is
// spike-and-slab.
enum class MomentMode {
  // Variance sum_j [M^2 p^2 v + p^2 m^2 V + V p^2 v] with p = 1 - omega.
  kPrinted,
  // Exact product variance (M^2 + V) p (v + m^2) - M^2 p^2 m^2.
  kExact,
};

/// Elementwise independent Gaussian matrix.
struct GaussianMat {
  Eigen::MatrixXd mean;
  Eigen::MatrixXd var;

  Eigen::Index rows() const { return mean.rows(); }
  Eigen::Index cols() const { return mean.cols(); }

  static GaussianMat deterministic(const Eigen::MatrixXd& m) {
    return {m, Eigen::MatrixXd::Zero(m.rows(), m.cols())};
  }
};

struct GaussVec {
  Eigen::VectorXd mean;
  Eigen::VectorXd var;

  Eigen::Index size() const { return mean.size(); }
};

/// Componentwise omega_d * delta_0 + (1 - omega_d) * N(mean_d, var_d).
struct SpikeSlabVec {
  Eigen::VectorXd omega;
  Eigen::VectorXd mean;
  Eigen::VectorXd var;

  Eigen::Index size() const { return omega.size(); }
  SpikeSlab1 at(Eigen::Index i) const { return {omega[i], mean[i], var[i]}; }
};

struct PredictiveMoments {
  Eigen::VectorXd mean;
  Eigen::VectorXd var;
};

// b = W y with W Gaussian and y fixed.
GaussVec input_layer(const GaussianMat& W, const Eigen::VectorXd& y);

/// Moments of e = S beta, treated as Gaussian. Components with slab mass
/// below kSpikeTolerance are exact spikes and contribute nothing.
GaussVec spike_slab_matvec(const GaussianMat& S, const SpikeSlabVec& beta,
                           MomentMode mode = MomentMode::kPrinted);

// Sum of independent Gaussian vectors.
GaussVec add_gauss(const GaussVec& b, const GaussVec& e);

SpikeSlabVec threshold_layer(const GaussVec& c, double lambda);

/// Runs the unrolled network over distributions and returns the belief over
/// the final layer output.
SpikeSlabVec bayeslista_forward(const GaussianMat& W, const GaussianMat& S,
                                const Eigen::VectorXd& y, double lambda, int layers,
                                MomentMode mode = MomentMode::kPrinted);

// Componentwise mean and variance of a spike-and-slab vector.
PredictiveMoments predictive_mean_var(const SpikeSlabVec& out);

// Derivatives of the soft-threshold moment map, one entry per component.
struct ThresholdJacobians {
  Eigen::VectorXd omega_mean, omega_var;
  Eigen::VectorXd mean_mean, mean_var;
  Eigen::VectorXd var_mean, var_var;
};

/// Intermediate quantities of one forward pass, kept for the reverse pass.
/// Index 0 is the input layer; pre[0] is b itself.
struct ForwardTrace {
  std::vector<GaussVec> pre;
  std::vector<SpikeSlabVec> out;
  std::vector<ThresholdJacobians> jac;
  Eigen::MatrixXd s_mean_sq;  // elementwise square of S.mean
  MomentMode mode = MomentMode::kPrinted;
  double lambda = 0.0;

  const SpikeSlabVec& output() const { return out.back(); }
};

ForwardTrace forward_trace(const GaussianMat& W, const GaussianMat& S,
                           const Eigen::VectorXd& y, double lambda, int layers,
                           MomentMode mode = MomentMode::kPrinted);

// Gradient of a scalar objective with respect to the network output belief.
struct OutputGradient {
  Eigen::VectorXd omega;
  Eigen::VectorXd mean;
  Eigen::VectorXd var;
};

struct WeightGradient {
  Eigen::MatrixXd w_mean, w_var;
  Eigen::MatrixXd s_mean, s_var;
};

/// Reverse pass through the moment propagation: maps the gradient with
/// respect to the output (omega, mean, var) to gradients with respect to
/// every weight mean and variance.
WeightGradient backpropagate(const ForwardTrace& trace, const GaussianMat& S,
                             const Eigen::VectorXd& y, const OutputGradient& grad);

}  // namespace bayeslista
