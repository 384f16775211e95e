#include "bayeslista/classic_solvers.hpp"

#include <cmath>
#include <string>

#include "bayeslista/distributions.hpp"
#include "bayeslista/error.hpp"
#include "bayeslista/rng.hpp"

namespace bayeslista {
namespace {

constexpr int kPowerIterations = 1000;
constexpr double kPowerTolerance = 1e-8;

Eigen::VectorXd shrink(const Eigen::VectorXd& x, double theta) {
  return x.unaryExpr([theta](double v) { return soft_threshold(v, theta); });
}

void check_observation(const IstaWeights& w, const Eigen::VectorXd& y) {
  if (y.size() != w.W.cols()) {
    throw invalid_argument("ista: observation has length " + std::to_string(y.size()) +
                           ", expected " + std::to_string(w.W.cols()));
  }
}

}  // namespace

double gram_spectral_norm(const Eigen::MatrixXd& X) {
  if (X.size() == 0 || X.isZero(0.0)) {
    throw invalid_argument("ista_weights: design matrix is all zero");
  }
  Rng rng(derive_seed(0, Stream::kPowerIteration));
  Eigen::VectorXd v(X.cols());
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = rng.normal();
  v.normalize();

  double nu = 0.0;
  for (int it = 0; it < kPowerIterations; ++it) {
    Eigen::VectorXd next = X.transpose() * (X * v);
    const double estimate = v.dot(next);
    const double norm = next.norm();
    if (norm == 0.0) break;
    v = next / norm;
    if (it > 0 && std::abs(estimate - nu) <= kPowerTolerance * std::abs(estimate)) {
      nu = estimate;
      break;
    }
    nu = estimate;
  }
  // Rayleigh quotient at the final iterate.
  return std::max(nu, v.dot(X.transpose() * (X * v)));
}

IstaWeights ista_weights(const Eigen::MatrixXd& X, double lambda) {
  if (!(lambda >= 0.0)) throw invalid_argument("ista_weights: lambda must be >= 0");
  IstaWeights w;
  w.nu = gram_spectral_norm(X);
  w.W = X.transpose() / w.nu;
  w.S = Eigen::MatrixXd::Identity(X.cols(), X.cols()) - X.transpose() * X / w.nu;
  w.theta = lambda;
  return w;
}

double lasso_objective(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                       const Eigen::VectorXd& beta, double alpha) {
  return (X * beta - y).squaredNorm() + alpha * beta.lpNorm<1>();
}

double ista_equivalent_alpha(const IstaWeights& w) { return 2.0 * w.theta * w.nu; }

Eigen::VectorXd ista_solve(const IstaWeights& w, const Eigen::VectorXd& y, int layers) {
  check_observation(w, y);
  const Eigen::VectorXd b = w.W * y;
  Eigen::VectorXd beta = shrink(b, w.theta);
  for (int l = 1; l <= layers; ++l) beta = shrink(b + w.S * beta, w.theta);
  return beta;
}

Eigen::VectorXd fista_solve(const IstaWeights& w, const Eigen::VectorXd& y, int layers) {
  check_observation(w, y);
  const Eigen::VectorXd b = w.W * y;
  Eigen::VectorXd prev = shrink(b, w.theta);
  Eigen::VectorXd point = prev;  // extrapolated point fed to the next step
  double t = 1.0;
  for (int l = 1; l <= layers; ++l) {
    Eigen::VectorXd next = shrink(b + w.S * point, w.theta);
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    point = next + ((t - 1.0) / t_next) * (next - prev);
    prev = std::move(next);
    t = t_next;
  }
  return prev;
}

Eigen::VectorXd ista_solve(const Problem& p, const Eigen::VectorXd& y) {
  return ista_solve(ista_weights(p.X, p.lambda), y, p.layers);
}

Eigen::VectorXd fista_solve(const Problem& p, const Eigen::VectorXd& y) {
  return fista_solve(ista_weights(p.X, p.lambda), y, p.layers);
}

}  // namespace bayeslista
