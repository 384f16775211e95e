#include <cmath>

#include <doctest.h>

#include "bayeslista/classic_solvers.hpp"
#include "bayeslista/data.hpp"
#include "bayeslista/error.hpp"
#include "bayeslista/lista.hpp"

using namespace bayeslista;

namespace {

struct Toy {
  Eigen::MatrixXd X, Y, B;
};

Toy toy(int n, std::uint64_t seed) {
  Toy t;
  t.X = gen_design(6, 10, seed);
  t.B = gen_sparse_targets(n, 10, 0.7, 0.1, seed + 1);
  t.Y = gen_observations(t.X, t.B, 0.1, seed + 2);
  return t;
}

double mean_loss(const ListaModel& m, const Toy& t) {
  double s = 0.0;
  for (Eigen::Index n = 0; n < t.Y.rows(); ++n) {
    s += (lista_forward(m, t.Y.row(n).transpose()) - t.B.row(n).transpose()).squaredNorm();
  }
  return s / double(t.Y.rows());
}

}  // namespace

TEST_CASE("LISTA with ISTA weights is ISTA") {
  const Toy t = toy(3, 0);
  const IstaWeights w = ista_weights(t.X, 0.1);
  for (int layers : {0, 1, 4, 16}) {
    const ListaModel m = lista_from_ista(w, layers);
    for (Eigen::Index n = 0; n < 3; ++n) {
      const Eigen::VectorXd y = t.Y.row(n).transpose();
      CHECK((lista_forward(m, y) - ista_solve(w, y, layers)).lpNorm<Eigen::Infinity>() <= 1e-12);
    }
  }
}

TEST_CASE("loss gradient matches central differences") {
  const Toy t = toy(4, 7);
  for (int layers : {0, 1, 3}) {
    const ListaModel m = lista_random_init(10, 6, 0.05, layers, 100 + layers);
    const Eigen::VectorXd y = t.Y.row(1).transpose();
    const Eigen::VectorXd beta = t.B.row(1).transpose();
    const ListaGradient g = lista_loss_gradient(m, y, beta);
    CHECK(g.loss == doctest::Approx((lista_forward(m, y) - beta).squaredNorm()));
    const double h = 1e-6;
    auto loss_at = [&](const ListaModel& p) { return (lista_forward(p, y) - beta).squaredNorm(); };
    for (Eigen::Index i = 0; i < m.W.size(); i += 7) {
      ListaModel p = m, q = m;
      p.W.data()[i] += h;
      q.W.data()[i] -= h;
      CHECK(g.dW.data()[i] == doctest::Approx((loss_at(p) - loss_at(q)) / (2 * h)).epsilon(1e-5).scale(1.0));
    }
    for (Eigen::Index i = 0; i < m.S.size(); i += 9) {
      ListaModel p = m, q = m;
      p.S.data()[i] += h;
      q.S.data()[i] -= h;
      CHECK(g.dS.data()[i] == doctest::Approx((loss_at(p) - loss_at(q)) / (2 * h)).epsilon(1e-5).scale(1.0));
    }
  }
}

TEST_CASE("training reduces the loss and is reproducible") {
  const Toy t = toy(60, 3);
  const ListaModel init = lista_from_ista(ista_weights(t.X, 0.1), 3);
  ListaTrainOptions opt;
  opt.epochs = 20;
  opt.step = 1e-3;
  opt.seed = 9;
  int calls = 0;
  opt.on_epoch = [&](int epoch, double loss, const ListaModel&) {
    ++calls;
    CHECK(epoch == calls);
    CHECK(std::isfinite(loss));
  };
  const ListaModel a = lista_train(t.Y, t.B, init, opt);
  CHECK(calls == 20);
  CHECK(mean_loss(a, t) < mean_loss(init, t));
  opt.on_epoch = nullptr;
  const ListaModel b = lista_train(t.Y, t.B, init, opt);
  CHECK(a.W == b.W);
  CHECK(a.S == b.S);
}

TEST_CASE("zero epochs returns the initial model") {
  const Toy t = toy(5, 1);
  const ListaModel init = lista_random_init(10, 6, 0.1, 2, 4);
  ListaTrainOptions opt;
  opt.epochs = 0;
  const ListaModel m = lista_train(t.Y, t.B, init, opt);
  CHECK(m.W == init.W);
  CHECK(m.S == init.S);
}

TEST_CASE("divergence is reported as a numeric error") {
  const Toy t = toy(30, 2);
  ListaTrainOptions opt;
  opt.epochs = 50;
  opt.step = 50.0;
  try {
    lista_train(t.Y, t.B, lista_random_init(10, 6, 0.1, 4, 1), opt);
    FAIL("expected divergence");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kNumeric);
  }
}

TEST_CASE("shape checks") {
  const ListaModel m = lista_random_init(10, 6, 0.1, 1, 0);
  CHECK_THROWS_AS(lista_forward(m, Eigen::VectorXd::Zero(5)), Error);
  CHECK_THROWS_AS(lista_loss_gradient(m, Eigen::VectorXd::Zero(6), Eigen::VectorXd::Zero(9)), Error);
  CHECK_THROWS_AS(lista_train(Eigen::MatrixXd::Zero(3, 6), Eigen::MatrixXd::Zero(2, 10), m, {}), Error);
}
