#include <cmath>

#include <doctest.h>

#include "bayeslista/classic_solvers.hpp"
#include "bayeslista/data.hpp"
#include "bayeslista/error.hpp"
#include "bayeslista/lista.hpp"
#include "bayeslista/propagation.hpp"
#include "bayeslista/rng.hpp"

using namespace bayeslista;

namespace {

GaussianMat random_gaussian_mat(Eigen::Index r, Eigen::Index c, Rng& rng, double var_scale) {
  GaussianMat g{Eigen::MatrixXd(r, c), Eigen::MatrixXd(r, c)};
  for (Eigen::Index i = 0; i < g.mean.size(); ++i) {
    g.mean.data()[i] = rng.normal();
    g.var.data()[i] = var_scale * rng.uniform();
  }
  return g;
}

SpikeSlabVec random_spike_slab(Eigen::Index n, Rng& rng) {
  SpikeSlabVec s{Eigen::VectorXd(n), Eigen::VectorXd(n), Eigen::VectorXd(n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    s.omega[i] = rng.uniform();
    s.mean[i] = 2.0 * rng.normal();
    s.var[i] = rng.uniform();
  }
  return s;
}

}  // namespace

TEST_CASE("matvec moments follow the printed formula term by term") {
  Rng rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::Index d = 1 + rng.below(5);
    const GaussianMat S = random_gaussian_mat(d, d, rng, 1.0);
    const SpikeSlabVec beta = random_spike_slab(d, rng);
    const GaussVec e = spike_slab_matvec(S, beta);
    for (Eigen::Index i = 0; i < d; ++i) {
      double mean = 0.0, var = 0.0;
      for (Eigen::Index j = 0; j < d; ++j) {
        const double M = S.mean(i, j), V = S.var(i, j);
        const double p = 1.0 - beta.omega[j], m = beta.mean[j], v = beta.var[j];
        mean += M * p * m;
        var += M * M * p * p * v + p * p * m * m * V + V * p * p * v;
      }
      CHECK(std::abs(e.mean[i] - mean) <= 1e-12 * (1.0 + std::abs(mean)));
      CHECK(std::abs(e.var[i] - var) <= 1e-12 * (1.0 + var));
    }
  }
}

TEST_CASE("exact product moments match sampling") {
  Rng rng(8);
  const double M = 0.8, V = 0.3;
  const SpikeSlab1 xi{0.4, -1.2, 0.5};
  const SpikeSlabVec beta{Eigen::VectorXd::Constant(1, xi.omega), Eigen::VectorXd::Constant(1, xi.mean),
                          Eigen::VectorXd::Constant(1, xi.var)};
  const GaussianMat S{Eigen::MatrixXd::Constant(1, 1, M), Eigen::MatrixXd::Constant(1, 1, V)};
  const GaussVec e = spike_slab_matvec(S, beta, MomentMode::kExact);
  const int n = 400000;
  double s1 = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double s = M + std::sqrt(V) * rng.normal();
    const double x = rng.uniform() < xi.omega ? 0.0 : xi.mean + std::sqrt(xi.var) * rng.normal();
    s1 += s * x;
    s2 += s * s * x * x;
  }
  const double mean = s1 / n, var = s2 / n - mean * mean;
  CHECK(std::abs(e.mean[0] - mean) < 4.0 * std::sqrt(var / n));
  CHECK(e.var[0] == doctest::Approx(var).epsilon(0.02));
}

TEST_CASE("exact spikes contribute nothing") {
  const GaussianMat S{Eigen::MatrixXd::Ones(2, 2), Eigen::MatrixXd::Ones(2, 2)};
  const SpikeSlabVec beta{Eigen::Vector2d(1.0, 1.0), Eigen::Vector2d(5.0, -3.0), Eigen::Vector2d(2.0, 2.0)};
  for (MomentMode mode : {MomentMode::kPrinted, MomentMode::kExact}) {
    const GaussVec e = spike_slab_matvec(S, beta, mode);
    CHECK(e.mean.isZero(0.0));
    CHECK(e.var.isZero(0.0));
  }
}

TEST_CASE("zero-variance network reduces to LISTA") {
  const Eigen::MatrixXd X = gen_design(5, 8, 2);
  const ListaModel m = lista_random_init(8, 5, 0.1, 3, 6);
  const Eigen::MatrixXd Y = gen_observations(X, gen_sparse_targets(4, 8, 0.6, 0.1, 1), 0.2, 3);
  for (Eigen::Index n = 0; n < Y.rows(); ++n) {
    const Eigen::VectorXd y = Y.row(n).transpose();
    const SpikeSlabVec out = bayeslista_forward(GaussianMat::deterministic(m.W), GaussianMat::deterministic(m.S), y, m.lambda, m.layers);
    const Eigen::VectorXd ref = lista_forward(m, y);
    CHECK((predictive_mean_var(out).mean - ref).lpNorm<Eigen::Infinity>() <= 1e-10);
    CHECK(out.var.isZero(0.0));
    for (Eigen::Index i = 0; i < ref.size(); ++i) {
      CHECK(out.omega[i] == (ref[i] == 0.0 ? 1.0 : 0.0));
      if (ref[i] != 0.0) CHECK(std::abs(out.mean[i] - ref[i]) <= 1e-10);
    }
  }
}

TEST_CASE("zero observation gives spikes everywhere") {
  Rng rng(1);
  const GaussianMat W = random_gaussian_mat(6, 4, rng, 0.5);
  const GaussianMat S = random_gaussian_mat(6, 6, rng, 0.5);
  const SpikeSlabVec out = bayeslista_forward(W, S, Eigen::VectorXd::Zero(4), 0.1, 5);
  CHECK((out.omega.array() == 1.0).all());
  CHECK(out.mean.isZero(0.0));
}

TEST_CASE("trace agrees with the plain forward pass") {
  Rng rng(4);
  const GaussianMat W = random_gaussian_mat(5, 3, rng, 0.1);
  const GaussianMat S = random_gaussian_mat(5, 5, rng, 0.1);
  const Eigen::VectorXd y = Eigen::Vector3d(0.5, -1.0, 2.0);
  for (MomentMode mode : {MomentMode::kPrinted, MomentMode::kExact}) {
    const ForwardTrace t = forward_trace(W, S, y, 0.2, 3, mode);
    const SpikeSlabVec f = bayeslista_forward(W, S, y, 0.2, 3, mode);
    CHECK(t.out.size() == 4);
    CHECK(t.output().omega == f.omega);
    CHECK(t.output().mean == f.mean);
    CHECK(t.output().var == f.var);
  }
}

TEST_CASE("reverse pass matches central differences") {
  Rng rng(30);
  for (MomentMode mode : {MomentMode::kPrinted, MomentMode::kExact}) {
    GaussianMat W = random_gaussian_mat(4, 3, rng, 0.2);
    GaussianMat S = random_gaussian_mat(4, 4, rng, 0.2);
    S.mean *= 0.4;
    const Eigen::VectorXd y = Eigen::Vector3d(0.7, -0.4, 1.1);
    const double lambda = 0.15;
    const int layers = 2;
    OutputGradient og{Eigen::VectorXd::Random(4), Eigen::VectorXd::Random(4), Eigen::VectorXd::Random(4)};
    auto objective = [&](const GaussianMat& w, const GaussianMat& s) {
      const SpikeSlabVec o = bayeslista_forward(w, s, y, lambda, layers, mode);
      return og.omega.dot(o.omega) + og.mean.dot(o.mean) + og.var.dot(o.var);
    };
    const WeightGradient g = backpropagate(forward_trace(W, S, y, lambda, layers, mode), S, y, og);
    const double h = 1e-6;
    auto check_entries = [&](Eigen::MatrixXd& target, const Eigen::MatrixXd& analytic) {
      for (Eigen::Index i = 0; i < target.size(); ++i) {
        const double keep = target.data()[i];
        target.data()[i] = keep + h;
        const double up = objective(W, S);
        target.data()[i] = keep - h;
        const double down = objective(W, S);
        target.data()[i] = keep;
        const double numeric = (up - down) / (2 * h);
        CHECK(std::abs(analytic.data()[i] - numeric) <= 1e-5 * (1.0 + std::abs(numeric)));
      }
    };
    check_entries(W.mean, g.w_mean);
    check_entries(W.var, g.w_var);
    check_entries(S.mean, g.s_mean);
    check_entries(S.var, g.s_var);
  }
}

TEST_CASE("shape checks") {
  Rng rng(2);
  const GaussianMat W = random_gaussian_mat(4, 3, rng, 0.1);
  const GaussianMat S = random_gaussian_mat(3, 3, rng, 0.1);
  CHECK_THROWS_AS(bayeslista_forward(W, S, Eigen::VectorXd::Zero(3), 0.1, 1), Error);
  CHECK_THROWS_AS(input_layer(W, Eigen::VectorXd::Zero(4)), Error);
  CHECK_THROWS_AS(spike_slab_matvec(S, random_spike_slab(4, rng)), Error);
}
