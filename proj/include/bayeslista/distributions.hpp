#pragma once

namespace bayeslista {

// Slab mass below this is treated as an exact spike at zero.
inline constexpr double kSpikeTolerance = 1e-12;

struct Gauss1 {
  double mean = 0.0;
  double var = 0.0;  // 0 denotes a point mass
};

/// omega * delta_0 + (1 - omega) * N(mean, var).
struct SpikeSlab1 {
  double omega = 1.0;
  double mean = 0.0;
  double var = 0.0;
};

struct GammaParams {
  double shape = 1.0;
  double rate = 1.0;
};

struct Moments {
  double mean = 0.0;
  double var = 0.0;
};

/// Partial derivatives of the soft-threshold moment map with respect to the
/// input mean and variance.
struct ThresholdJacobian {
  double omega_mean = 0.0, omega_var = 0.0;
  double mean_mean = 0.0, mean_var = 0.0;
  double var_mean = 0.0, var_var = 0.0;
};

double soft_threshold(double x, double lambda);

double std_normal_pdf(double x);
double std_normal_cdf(double x);

// phi(t) / (1 - Phi(t)), the hazard of the standard normal.
double upper_mills_ratio(double t);

// Variance of Z - t given Z > t, for standard normal Z.
double upper_tail_variance_factor(double t);

double normal_logpdf(double x, double mean, double var);

/// Log density of the location-scale Student-t with squared scale `scale2`
/// and `dof` degrees of freedom. Throws on non-positive scale2 or dof.
double student_t_logpdf(double x, double loc, double scale2, double dof);

/// Distribution of h_lambda(x) for x ~ N(in.mean, in.var), projected onto a
/// spike-and-slab law.
///
/// The spike weight is the mass of [-lambda, lambda]. The slab is the
/// single-Gaussian moment match of the two shifted tails: (x + lambda | x <
/// -lambda) and (x - lambda | x > lambda), mixed by their masses. A slab mass
/// below kSpikeTolerance returns the canonical spike (1, 0, 0).
///
/// If `jac` is non-null it receives the derivatives of (omega, mean, var)
/// with respect to (in.mean, in.var). They are zero at a canonical spike.
SpikeSlab1 soft_threshold_gauss(Gauss1 in, double lambda,
                                ThresholdJacobian* jac = nullptr);

// Mean and variance of a spike-and-slab variable.
Moments spike_slab_mean_var(SpikeSlab1 d);

}  // namespace bayeslista
