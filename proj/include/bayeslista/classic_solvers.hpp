#pragma once

#include <Eigen/Dense>

namespace bayeslista {

struct Problem {
  Eigen::MatrixXd X;  // K x D design
  double lambda = 0.1;
  int layers = 1;
};

/// Fixed ISTA weights: W = X^T / nu, S = I - X^T X / nu, threshold = lambda,
/// where nu is the largest eigenvalue of X^T X.
struct IstaWeights {
  Eigen::MatrixXd W;  // D x K
  Eigen::MatrixXd S;  // D x D
  double theta = 0.0;
  double nu = 0.0;
};

/// Largest eigenvalue of X^T X by power iteration from a fixed-seed start
/// vector (at most 1000 sweeps, relative tolerance 1e-8).
double gram_spectral_norm(const Eigen::MatrixXd& X);

IstaWeights ista_weights(const Eigen::MatrixXd& X, double lambda);

// ||X beta - y||^2 + alpha ||beta||_1
double lasso_objective(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                       const Eigen::VectorXd& beta, double alpha);

// The l1 weight for which ISTA with these weights is proximal gradient on
// lasso_objective: alpha = 2 * theta * nu.
double ista_equivalent_alpha(const IstaWeights& w);

Eigen::VectorXd ista_solve(const IstaWeights& w, const Eigen::VectorXd& y, int layers);
Eigen::VectorXd fista_solve(const IstaWeights& w, const Eigen::VectorXd& y, int layers);

Eigen::VectorXd ista_solve(const Problem& p, const Eigen::VectorXd& y);
Eigen::VectorXd fista_solve(const Problem& p, const Eigen::VectorXd& y);

}  // namespace bayeslista
