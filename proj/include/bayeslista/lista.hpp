#pragma once

#include <cstdint>
#include <functional>

#include <Eigen/Dense>

#include "bayeslista/classic_solvers.hpp"

namespace bayeslista {

/// Unrolled ISTA with tied, learnable W (D x K) and S (D x D).
struct ListaModel {
  Eigen::MatrixXd W;
  Eigen::MatrixXd S;
  double lambda = 0.1;
  int layers = 0;  // 0: output is h(Wy)

  Eigen::Index dim() const { return W.rows(); }
  Eigen::Index obs_dim() const { return W.cols(); }
};

ListaModel lista_from_ista(const IstaWeights& w, int layers);

// W ~ N(0, 1/K), S ~ N(0, 1/D) entrywise.
ListaModel lista_random_init(Eigen::Index dim, Eigen::Index obs_dim, double lambda,
                             int layers, std::uint64_t seed);

Eigen::VectorXd lista_forward(const ListaModel& m, const Eigen::VectorXd& y);

struct ListaGradient {
  double loss = 0.0;  // ||f(y) - beta||^2
  Eigen::MatrixXd dW;
  Eigen::MatrixXd dS;
};

// Reverse-mode gradient of the squared error; the threshold derivative is 0
// on [-lambda, lambda] and 1 outside.
ListaGradient lista_loss_gradient(const ListaModel& m, const Eigen::VectorXd& y,
                                  const Eigen::VectorXd& beta);

struct ListaTrainOptions {
  int epochs = 50;
  double step = 1e-3;
  std::uint64_t seed = 0;
  // Called after every epoch with (epoch index from 1, mean training loss).
  std::function<void(int, double, const ListaModel&)> on_epoch;
};

/// Plain SGD, minibatch 1, data order reshuffled each epoch.
/// Rows of Y (N x K) and B (N x D) are the training pairs.
/// Throws a numeric error if the loss becomes non-finite.
ListaModel lista_train(const Eigen::MatrixXd& Y, const Eigen::MatrixXd& B, ListaModel init,
                       const ListaTrainOptions& options);

}  // namespace bayeslista
