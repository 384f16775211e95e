#include "bayeslista/propagation.hpp"

#include <string>

#include "bayeslista/error.hpp"

namespace bayeslista {
namespace {

void check_square(const GaussianMat& S, Eigen::Index dim) {
  if (S.rows() != dim || S.cols() != dim || S.var.rows() != dim || S.var.cols() != dim) {
    throw invalid_argument("S must be " + std::to_string(dim) + " x " + std::to_string(dim));
  }
}

// Slab weight with near-total spikes snapped to zero.
Eigen::VectorXd keep_weight(const Eigen::VectorXd& omega) {
  return omega.unaryExpr([](double w) {
    const double keep = 1.0 - w;
    return keep < kSpikeTolerance ? 0.0 : keep;
  });
}

// Per-column coefficients of the product moments:
//   e.mean = M * mean_coef,  e.var = (M o M) * sq_coef + V * var_coef.
struct ProductCoefficients {
  Eigen::VectorXd keep, mean_coef, sq_coef, var_coef;
};

ProductCoefficients product_coefficients(const SpikeSlabVec& beta, MomentMode mode) {
  ProductCoefficients pc;
  pc.keep = keep_weight(beta.omega);
  const Eigen::ArrayXd p = pc.keep.array();
  const Eigen::ArrayXd m = beta.mean.array();
  const Eigen::ArrayXd v = beta.var.array();
  pc.mean_coef = (p * m).matrix();
  if (mode == MomentMode::kPrinted) {
    pc.sq_coef = (p * p * v).matrix();
    pc.var_coef = (p * p * (m * m + v)).matrix();
  } else {
    pc.sq_coef = (p * (v + m * m) - p * p * m * m).matrix();
    pc.var_coef = (p * (v + m * m)).matrix();
  }
  return pc;
}

GaussVec matvec_with(const GaussianMat& S, const Eigen::MatrixXd& mean_sq,
                     const ProductCoefficients& pc) {
  GaussVec e;
  e.mean = S.mean * pc.mean_coef;
  e.var = mean_sq * pc.sq_coef + S.var * pc.var_coef;
  e.var = e.var.cwiseMax(0.0);
  return e;
}

SpikeSlabVec threshold_with_jacobian(const GaussVec& c, double lambda, ThresholdJacobians* jac) {
  const Eigen::Index n = c.size();
  SpikeSlabVec out{Eigen::VectorXd(n), Eigen::VectorXd(n), Eigen::VectorXd(n)};
  if (jac) {
    for (auto* v : {&jac->omega_mean, &jac->omega_var, &jac->mean_mean, &jac->mean_var,
                    &jac->var_mean, &jac->var_var}) {
      v->resize(n);
    }
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    ThresholdJacobian j;
    const SpikeSlab1 s = soft_threshold_gauss({c.mean[i], c.var[i]}, lambda, jac ? &j : nullptr);
    out.omega[i] = s.omega;
    out.mean[i] = s.mean;
    out.var[i] = s.var;
    if (jac) {
      jac->omega_mean[i] = j.omega_mean;
      jac->omega_var[i] = j.omega_var;
      jac->mean_mean[i] = j.mean_mean;
      jac->mean_var[i] = j.mean_var;
      jac->var_mean[i] = j.var_mean;
      jac->var_var[i] = j.var_var;
    }
  }
  return out;
}

void check_weights(const GaussianMat& W, const GaussianMat& S, Eigen::Index y_size) {
  if (W.var.rows() != W.rows() || W.var.cols() != W.cols()) {
    throw invalid_argument("W mean and variance shapes differ");
  }
  if (W.cols() != y_size) {
    throw invalid_argument("observation has length " + std::to_string(y_size) + ", expected " +
                           std::to_string(W.cols()));
  }
  check_square(S, W.rows());
}

}  // namespace

GaussVec input_layer(const GaussianMat& W, const Eigen::VectorXd& y) {
  if (W.cols() != y.size() || W.var.rows() != W.rows() || W.var.cols() != W.cols()) {
    throw invalid_argument("input_layer: W is " + std::to_string(W.rows()) + " x " +
                           std::to_string(W.cols()) + " but y has length " +
                           std::to_string(y.size()));
  }
  return {W.mean * y, W.var * y.cwiseProduct(y)};
}

GaussVec spike_slab_matvec(const GaussianMat& S, const SpikeSlabVec& beta, MomentMode mode) {
  check_square(S, beta.size());
  return matvec_with(S, S.mean.cwiseProduct(S.mean), product_coefficients(beta, mode));
}

GaussVec add_gauss(const GaussVec& b, const GaussVec& e) {
  if (b.size() != e.size()) throw invalid_argument("add_gauss: length mismatch");
  return {b.mean + e.mean, b.var + e.var};
}

SpikeSlabVec threshold_layer(const GaussVec& c, double lambda) {
  return threshold_with_jacobian(c, lambda, nullptr);
}

SpikeSlabVec bayeslista_forward(const GaussianMat& W, const GaussianMat& S,
                                const Eigen::VectorXd& y, double lambda, int layers,
                                MomentMode mode) {
  check_weights(W, S, y.size());
  const GaussVec b = input_layer(W, y);
  const Eigen::MatrixXd mean_sq = S.mean.cwiseProduct(S.mean);
  SpikeSlabVec beta = threshold_layer(b, lambda);
  for (int l = 1; l <= layers; ++l) {
    const GaussVec e = matvec_with(S, mean_sq, product_coefficients(beta, mode));
    beta = threshold_layer(add_gauss(b, e), lambda);
  }
  return beta;
}

PredictiveMoments predictive_mean_var(const SpikeSlabVec& out) {
  PredictiveMoments r{Eigen::VectorXd(out.size()), Eigen::VectorXd(out.size())};
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    const Moments mv = spike_slab_mean_var(out.at(i));
    r.mean[i] = mv.mean;
    r.var[i] = mv.var;
  }
  return r;
}

ForwardTrace forward_trace(const GaussianMat& W, const GaussianMat& S,
                           const Eigen::VectorXd& y, double lambda, int layers,
                           MomentMode mode) {
  check_weights(W, S, y.size());
  ForwardTrace t;
  t.mode = mode;
  t.lambda = lambda;
  t.s_mean_sq = S.mean.cwiseProduct(S.mean);
  t.pre.reserve(layers + 1);
  t.out.reserve(layers + 1);
  t.jac.resize(layers + 1);

  t.pre.push_back(input_layer(W, y));
  t.out.push_back(threshold_with_jacobian(t.pre[0], lambda, &t.jac[0]));
  for (int l = 1; l <= layers; ++l) {
    const GaussVec e = matvec_with(S, t.s_mean_sq, product_coefficients(t.out[l - 1], mode));
    t.pre.push_back(add_gauss(t.pre[0], e));
    t.out.push_back(threshold_with_jacobian(t.pre[l], lambda, &t.jac[l]));
  }
  return t;
}

WeightGradient backpropagate(const ForwardTrace& trace, const GaussianMat& S,
                             const Eigen::VectorXd& y, const OutputGradient& grad) {
  const Eigen::Index dim = S.rows();
  const int layers = static_cast<int>(trace.out.size()) - 1;

  WeightGradient wg;
  wg.s_mean = Eigen::MatrixXd::Zero(dim, dim);
  wg.s_var = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::VectorXd gb_mean = Eigen::VectorXd::Zero(dim);
  Eigen::VectorXd gb_var = Eigen::VectorXd::Zero(dim);

  Eigen::VectorXd g_omega = grad.omega, g_mean = grad.mean, g_var = grad.var;
  for (int l = layers; l >= 0; --l) {
    // Through the threshold: gradient w.r.t. pre-activation mean/var.
    const ThresholdJacobians& j = trace.jac[l];
    Eigen::VectorXd gc_mean(dim), gc_var(dim);
    for (Eigen::Index i = 0; i < dim; ++i) {
      const bool spike = trace.out[l].omega[i] == 1.0;
      gc_mean[i] = spike ? 0.0
                         : j.omega_mean[i] * g_omega[i] + j.mean_mean[i] * g_mean[i] +
                               j.var_mean[i] * g_var[i];
      gc_var[i] = spike ? 0.0
                        : j.omega_var[i] * g_omega[i] + j.mean_var[i] * g_mean[i] +
                              j.var_var[i] * g_var[i];
    }
    gb_mean += gc_mean;
    gb_var += gc_var;
    if (l == 0) break;

    // c_l = b + S beta_{l-1}: gradient into S and into beta_{l-1}.
    const SpikeSlabVec& prev = trace.out[l - 1];
    const ProductCoefficients pc = product_coefficients(prev, trace.mode);
    wg.s_mean.noalias() += gc_mean * pc.mean_coef.transpose();
    wg.s_mean.array() += 2.0 * S.mean.array() * (gc_var * pc.sq_coef.transpose()).array();
    wg.s_var.noalias() += gc_var * pc.var_coef.transpose();

    const Eigen::ArrayXd G = (S.mean.transpose() * gc_mean).array();
    const Eigen::ArrayXd A = (trace.s_mean_sq.transpose() * gc_var).array();
    const Eigen::ArrayXd C = (S.var.transpose() * gc_var).array();
    const Eigen::ArrayXd p = pc.keep.array();
    const Eigen::ArrayXd m = prev.mean.array();
    const Eigen::ArrayXd v = prev.var.array();

    Eigen::ArrayXd g_keep, gm, gv;
    if (trace.mode == MomentMode::kPrinted) {
      g_keep = G * m + A * 2.0 * p * v + C * 2.0 * p * (m * m + v);
      gm = G * p + C * 2.0 * p * p * m;
      gv = (A + C) * p * p;
    } else {
      g_keep = G * m + A * ((v + m * m) - 2.0 * p * m * m) + C * (v + m * m);
      gm = G * p + A * (2.0 * p * m - 2.0 * p * p * m) + C * 2.0 * p * m;
      gv = (A + C) * p;
    }
    g_omega = (-g_keep).matrix();
    g_mean = gm.matrix();
    g_var = gv.matrix();
    for (Eigen::Index i = 0; i < dim; ++i) {
      if (pc.keep[i] == 0.0) g_omega[i] = g_mean[i] = g_var[i] = 0.0;
    }
  }

  wg.w_mean = gb_mean * y.transpose();
  wg.w_var = gb_var * y.cwiseProduct(y).transpose();
  return wg;
}

}  // namespace bayeslista
