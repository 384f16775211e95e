#include "bayeslista/lista.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "bayeslista/distributions.hpp"
#include "bayeslista/error.hpp"
#include "bayeslista/rng.hpp"

namespace bayeslista {
namespace {

Eigen::VectorXd shrink(const Eigen::VectorXd& x, double lambda) {
  return x.unaryExpr([lambda](double v) { return soft_threshold(v, lambda); });
}

void check_shapes(const ListaModel& m, Eigen::Index y_size) {
  if (m.S.rows() != m.dim() || m.S.cols() != m.dim()) {
    throw invalid_argument("lista: S must be D x D");
  }
  if (y_size != m.obs_dim()) {
    throw invalid_argument("lista: observation has length " + std::to_string(y_size) +
                           ", expected " + std::to_string(m.obs_dim()));
  }
}

}  // namespace

ListaModel lista_from_ista(const IstaWeights& w, int layers) {
  return {w.W, w.S, w.theta, layers};
}

ListaModel lista_random_init(Eigen::Index dim, Eigen::Index obs_dim, double lambda,
                             int layers, std::uint64_t seed) {
  Rng rng(seed);
  ListaModel m{Eigen::MatrixXd(dim, obs_dim), Eigen::MatrixXd(dim, dim), lambda, layers};
  const double sw = 1.0 / std::sqrt(double(obs_dim));
  const double ss = 1.0 / std::sqrt(double(dim));
  for (Eigen::Index i = 0; i < m.W.size(); ++i) m.W.data()[i] = sw * rng.normal();
  for (Eigen::Index i = 0; i < m.S.size(); ++i) m.S.data()[i] = ss * rng.normal();
  return m;
}

Eigen::VectorXd lista_forward(const ListaModel& m, const Eigen::VectorXd& y) {
  check_shapes(m, y.size());
  const Eigen::VectorXd b = m.W * y;
  Eigen::VectorXd beta = shrink(b, m.lambda);
  for (int l = 1; l <= m.layers; ++l) beta = shrink(b + m.S * beta, m.lambda);
  return beta;
}

ListaGradient lista_loss_gradient(const ListaModel& m, const Eigen::VectorXd& y,
                                  const Eigen::VectorXd& beta) {
  check_shapes(m, y.size());
  if (beta.size() != m.dim()) throw invalid_argument("lista: target has wrong length");

  // Pre-activations c[0] = b, c[l] = b + S beta[l-1].
  std::vector<Eigen::VectorXd> pre(m.layers + 1), out(m.layers + 1);
  pre[0] = m.W * y;
  out[0] = shrink(pre[0], m.lambda);
  for (int l = 1; l <= m.layers; ++l) {
    pre[l] = pre[0] + m.S * out[l - 1];
    out[l] = shrink(pre[l], m.lambda);
  }

  ListaGradient g;
  const Eigen::VectorXd residual = out[m.layers] - beta;
  g.loss = residual.squaredNorm();
  g.dS = Eigen::MatrixXd::Zero(m.dim(), m.dim());

  const double lambda = m.lambda;
  auto gate = [lambda](const Eigen::VectorXd& c, const Eigen::VectorXd& grad) {
    Eigen::VectorXd r(grad.size());
    for (Eigen::Index i = 0; i < r.size(); ++i) r[i] = std::abs(c[i]) > lambda ? grad[i] : 0.0;
    return r;
  };

  Eigen::VectorXd g_out = 2.0 * residual;
  Eigen::VectorXd g_b = Eigen::VectorXd::Zero(m.dim());
  for (int l = m.layers; l >= 1; --l) {
    const Eigen::VectorXd g_pre = gate(pre[l], g_out);
    g_b += g_pre;
    g.dS.noalias() += g_pre * out[l - 1].transpose();
    g_out = m.S.transpose() * g_pre;
  }
  g_b += gate(pre[0], g_out);
  g.dW = g_b * y.transpose();
  return g;
}

ListaModel lista_train(const Eigen::MatrixXd& Y, const Eigen::MatrixXd& B, ListaModel model,
                       const ListaTrainOptions& options) {
  if (Y.rows() != B.rows()) throw invalid_argument("lista_train: Y and B row counts differ");
  if (Y.rows() < 1) throw invalid_argument("lista_train: no training pairs");
  check_shapes(model, Y.cols());

  std::vector<Eigen::Index> order(Y.rows());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(options.seed);

  for (int epoch = 1; epoch <= options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng.engine());
    double total = 0.0;
    for (Eigen::Index n : order) {
      const ListaGradient g = lista_loss_gradient(model, Y.row(n).transpose(), B.row(n).transpose());
      if (!std::isfinite(g.loss)) {
        throw numeric_error("lista_train: non-finite loss at epoch " + std::to_string(epoch) +
                            " (try a smaller --step)");
      }
      total += g.loss;
      model.W -= options.step * g.dW;
      model.S -= options.step * g.dS;
    }
    if (options.on_epoch) options.on_epoch(epoch, total / double(Y.rows()), model);
  }
  return model;
}

}  // namespace bayeslista
