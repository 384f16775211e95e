#include "bayeslista/pbp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "bayeslista/error.hpp"
#include "bayeslista/rng.hpp"

namespace bayeslista {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

bool all_finite(const Eigen::MatrixXd& m) { return m.allFinite(); }

void fill_normal(Eigen::MatrixXd& m, double sd, Rng& rng) {
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = sd * rng.normal();
}

PriorSites empty_sites(Eigen::Index dim, Eigen::Index obs_dim) {
  const auto zw = Eigen::MatrixXd::Zero(dim, obs_dim);
  const auto zs = Eigen::MatrixXd::Zero(dim, dim);
  return {zw, zw, zw, zw, zs, zs, zs, zs};
}

// Moment update applied to every entry of a Gaussian matrix. Entries whose
// variance would drop below the floor are handled per the guard; returns the
// number of such entries.
std::size_t update_matrix(GaussianMat& g, const Eigen::MatrixXd& d_mean,
                          const Eigen::MatrixXd& d_var, const PbpOptions& options) {
  const auto v = g.var.array();
  const auto dm = d_mean.array();
  const Eigen::ArrayXXd next_v = v - v * v * (dm * dm - 2.0 * d_var.array());
  const Eigen::ArrayXXd next_m = g.mean.array() + v * dm;
  const auto low = (next_v < options.var_floor);
  const auto hits = static_cast<std::size_t>(low.count());
  if (options.guard == VarianceGuard::kRejectEntry) {
    g.mean = low.select(g.mean.array(), next_m).matrix();
    g.var = low.select(g.var.array(), next_v).matrix();
  } else {
    g.mean = next_m.matrix();
    g.var = low.select(options.var_floor, next_v).matrix();
  }
  return hits;
}

struct SiteRefs {
  double& mean;
  double& var;
  double& prec;
  double& shift;
  double& shape;
  double& rate;
};

// EP refinement of one weight prior site; returns false if the cavity is
// not a valid distribution.
bool refine_prior_site(SiteRefs s, GammaParams& eta, const PbpOptions& options,
                       PbpCounters& counters) {
  const double cav_prec = 1.0 / s.var - s.prec;
  const GammaParams cav_eta{eta.shape - s.shape, eta.rate - s.rate};
  if (!(cav_prec > 0.0) || !(cav_eta.shape > 1.0) || !(cav_eta.rate > 0.0)) return false;
  const double cav_var = 1.0 / cav_prec;
  const double cav_mean = cav_var * (s.mean / s.var - s.shift);

  // Z(a) = N(0; cavity mean, cavity var + b / (a - 1)).
  auto lz = [&](double shape) {
    return normal_logpdf(0.0, cav_mean, cav_var + cav_eta.rate / (shape - 1.0));
  };
  const double total = cav_var + cav_eta.rate / (cav_eta.shape - 1.0);
  const double dm = -cav_mean / total;
  const double dv = 0.5 * (cav_mean * cav_mean / (total * total) - 1.0 / total);
  Moments next = gaussian_moment_update(cav_mean, cav_var, dm, dv);
  if (!std::isfinite(next.mean) || !std::isfinite(next.var)) return false;
  if (next.var < options.var_floor) {
    next.var = options.var_floor;
    ++counters.var_clamps;
  }

  const auto matched = gamma_moment_match(cav_eta, lz(cav_eta.shape), lz(cav_eta.shape + 1.0),
                                          lz(cav_eta.shape + 2.0));
  GammaParams next_eta = eta;
  if (matched && matched->shape > 1.0 && matched->rate >= options.gamma_floor) {
    next_eta = *matched;
  } else {
    ++counters.gamma_rejects;
  }

  s.prec = 1.0 / next.var - cav_prec;
  s.shift = next.mean / next.var - cav_mean / cav_var;
  s.shape = next_eta.shape - cav_eta.shape;
  s.rate = next_eta.rate - cav_eta.rate;
  s.mean = next.mean;
  s.var = next.var;
  eta = next_eta;
  return true;
}

void refine_matrix_sites(GaussianMat& g, Eigen::MatrixXd& prec, Eigen::MatrixXd& shift,
                         Eigen::MatrixXd& shape, Eigen::MatrixXd& rate, GammaParams& eta,
                         const PbpOptions& options, PbpCounters& counters) {
  for (Eigen::Index i = 0; i < g.mean.size(); ++i) {
    SiteRefs s{g.mean.data()[i], g.var.data()[i], prec.data()[i],
               shift.data()[i],  shape.data()[i], rate.data()[i]};
    if (!refine_prior_site(s, eta, options, counters)) ++counters.prior_skips;
  }
}

}  // namespace

PbpState pbp_init(Eigen::Index dim, Eigen::Index obs_dim, double lambda, int layers,
                  std::uint64_t seed) {
  if (dim < 1 || obs_dim < 1) throw invalid_argument("pbp_init: dimensions must be >= 1");
  if (!(lambda >= 0.0)) throw invalid_argument("pbp_init: lambda must be >= 0");
  if (layers < 0) throw invalid_argument("pbp_init: layers must be >= 0");
  Rng rng(seed);
  PbpState q;
  q.lambda = lambda;
  q.layers = layers;
  const double wv = 1.0 / double(obs_dim);
  const double sv = 1.0 / double(dim);
  q.W.mean.resize(dim, obs_dim);
  q.S.mean.resize(dim, dim);
  fill_normal(q.W.mean, std::sqrt(wv), rng);
  fill_normal(q.S.mean, std::sqrt(sv), rng);
  q.W.var = Eigen::MatrixXd::Constant(dim, obs_dim, wv);
  q.S.var = Eigen::MatrixXd::Constant(dim, dim, sv);
  q.sites = empty_sites(dim, obs_dim);
  return q;
}

PbpState pbp_init_from_ista(const IstaWeights& w, double lambda, int layers, double var_scale) {
  if (!(var_scale > 0.0)) throw invalid_argument("pbp_init_from_ista: var_scale must be > 0");
  if (!(lambda >= 0.0)) throw invalid_argument("pbp_init_from_ista: lambda must be >= 0");
  if (layers < 0) throw invalid_argument("pbp_init_from_ista: layers must be >= 0");
  const Eigen::Index dim = w.W.rows(), obs_dim = w.W.cols();
  PbpState q;
  q.lambda = lambda;
  q.layers = layers;
  q.W = {w.W, Eigen::MatrixXd::Constant(dim, obs_dim, var_scale / double(obs_dim))};
  q.S = {w.S, Eigen::MatrixXd::Constant(dim, dim, var_scale / double(dim))};
  q.sites = empty_sites(dim, obs_dim);
  return q;
}

double component_log_z(double omega, double mean, double var, double beta, GammaParams gamma) {
  const double lt = student_t_logpdf(beta, 0.0, gamma.rate / gamma.shape, 2.0 * gamma.shape);
  const double ln = normal_logpdf(beta, mean, gamma.rate / (gamma.shape - 1.0) + var);
  const double a = omega > 0.0 ? std::log(omega) + lt : kNegInf;
  const double b = omega < 1.0 ? std::log1p(-omega) + ln : kNegInf;
  return log_add(a, b);
}

double output_log_z(const SpikeSlabVec& out, const Eigen::VectorXd& beta, GammaParams gamma,
                    OutputGradient* grad) {
  if (beta.size() != out.size()) throw invalid_argument("log_z: target has wrong length");
  if (!(gamma.shape > 1.0) || !(gamma.rate > 0.0)) {
    throw invalid_argument("log_z: noise factor needs shape > 1 and rate > 0");
  }
  const double spike_scale2 = gamma.rate / gamma.shape;
  const double dof = 2.0 * gamma.shape;
  const double noise_var = gamma.rate / (gamma.shape - 1.0);
  if (grad) {
    grad->omega.resize(out.size());
    grad->mean.resize(out.size());
    grad->var.resize(out.size());
  }

  double total = 0.0;
  for (Eigen::Index d = 0; d < out.size(); ++d) {
    const double omega = out.omega[d];
    const double keep = 1.0 - omega;
    const double slab_var = noise_var + out.var[d];
    const double r = beta[d] - out.mean[d];
    const double lt = student_t_logpdf(beta[d], 0.0, spike_scale2, dof);
    const double ln = normal_logpdf(beta[d], out.mean[d], slab_var);
    const double a = omega > 0.0 ? std::log(omega) + lt : kNegInf;
    const double b = keep > 0.0 ? std::log(keep) + ln : kNegInf;
    const double lz = log_add(a, b);
    total += lz;
    if (grad) {
      const double slab_resp = b == kNegInf ? 0.0 : std::exp(b - lz);
      // d/d omega is irrelevant at an exact spike and may overflow there.
      grad->omega[d] = keep > 0.0 ? std::exp(lt - lz) - std::exp(ln - lz) : 0.0;
      grad->mean[d] = slab_resp * r / slab_var;
      grad->var[d] = slab_resp * 0.5 * (r * r / (slab_var * slab_var) - 1.0 / slab_var);
    }
  }
  return total;
}

double log_z(const PbpState& q, const Eigen::VectorXd& y, const Eigen::VectorXd& beta,
             MomentMode mode) {
  const SpikeSlabVec out = bayeslista_forward(q.W, q.S, y, q.lambda, q.layers, mode);
  return output_log_z(out, beta, q.gamma);
}

LogZGradient grad_log_z(const PbpState& q, const Eigen::VectorXd& y,
                        const Eigen::VectorXd& beta, MomentMode mode) {
  const ForwardTrace trace = forward_trace(q.W, q.S, y, q.lambda, q.layers, mode);
  OutputGradient og;
  LogZGradient r;
  r.log_z = output_log_z(trace.output(), beta, q.gamma, &og);
  r.grad = backpropagate(trace, q.S, y, og);
  return r;
}

Moments gaussian_moment_update(double mean, double var, double dlogz_dmean, double dlogz_dvar) {
  return {mean + var * dlogz_dmean,
          var - var * var * (dlogz_dmean * dlogz_dmean - 2.0 * dlogz_dvar)};
}

std::optional<GammaParams> gamma_moment_match(GammaParams current, double log_z0, double log_z1,
                                              double log_z2) {
  const double a = current.shape;
  const double b = current.rate;
  // E[x] = a/b * Z(a+1)/Z(a),  E[x^2] = a(a+1)/b^2 * Z(a+2)/Z(a).
  const double mean = a / b * std::exp(log_z1 - log_z0);
  const double excess = (a + 1.0) / a * std::exp(log_z2 - 2.0 * log_z1 + log_z0) - 1.0;
  if (!(excess > 0.0) || !std::isfinite(excess) || !std::isfinite(mean) || !(mean > 0.0)) {
    return std::nullopt;
  }
  const double shape = 1.0 / excess;
  const double rate = shape / mean;
  if (!std::isfinite(shape) || !std::isfinite(rate)) return std::nullopt;
  return GammaParams{shape, rate};
}

void update_noise_precision(GammaParams& gamma, const SpikeSlabVec& out,
                            const Eigen::VectorXd& beta, const PbpOptions& options,
                            PbpCounters& counters) {
  // Each output component is its own likelihood factor once gamma is
  // integrated out, so the three-point match is applied per component, in
  // order, with the network output held fixed.
  for (Eigen::Index d = 0; d < out.size(); ++d) {
    auto lz = [&](double shape) {
      return component_log_z(out.omega[d], out.mean[d], out.var[d], beta[d], {shape, gamma.rate});
    };
    const auto matched =
        gamma_moment_match(gamma, lz(gamma.shape), lz(gamma.shape + 1.0), lz(gamma.shape + 2.0));
    if (matched && matched->shape > 1.0 && matched->rate >= options.gamma_floor) {
      gamma = *matched;
    } else {
      ++counters.gamma_rejects;
    }
  }
}

bool adf_update_likelihood(PbpState& q, const Eigen::VectorXd& y, const Eigen::VectorXd& beta,
                           const PbpOptions& options, PbpCounters& counters) {
  const ForwardTrace trace = forward_trace(q.W, q.S, y, q.lambda, q.layers, options.mode);
  OutputGradient og;
  const double lz0 = output_log_z(trace.output(), beta, q.gamma, &og);
  if (!std::isfinite(lz0) || !og.omega.allFinite() || !og.mean.allFinite() ||
      !og.var.allFinite()) {
    ++counters.skipped;
    return false;
  }
  const WeightGradient g = backpropagate(trace, q.S, y, og);
  if (!all_finite(g.w_mean) || !all_finite(g.w_var) || !all_finite(g.s_mean) ||
      !all_finite(g.s_var)) {
    ++counters.skipped;
    return false;
  }

  if (options.guard == VarianceGuard::kRejectPoint) {
    GaussianMat w = q.W, s = q.S;
    const std::size_t hits = update_matrix(w, g.w_mean, g.w_var, options) +
                             update_matrix(s, g.s_mean, g.s_var, options);
    if (hits > 0) {
      counters.var_clamps += hits;
      ++counters.skipped_variance;
      return false;
    }
    q.W = std::move(w);
    q.S = std::move(s);
  } else {
    counters.var_clamps += update_matrix(q.W, g.w_mean, g.w_var, options);
    counters.var_clamps += update_matrix(q.S, g.s_mean, g.s_var, options);
  }

  update_noise_precision(q.gamma, trace.output(), beta, options, counters);
  ++counters.updates;
  return true;
}

void ep_update_priors(PbpState& q, const PbpOptions& options, PbpCounters& counters) {
  if (!options.priors) return;
  PriorSites& s = q.sites;
  refine_matrix_sites(q.W, s.w_prec, s.w_shift, s.w_shape, s.w_rate, q.eta, options, counters);
  refine_matrix_sites(q.S, s.s_prec, s.s_shift, s.s_shape, s.s_rate, q.eta, options, counters);
}

void check_state(const PbpState& q) {
  const bool ok = (q.W.var.array() > 0.0).all() && (q.S.var.array() > 0.0).all() &&
                  q.W.mean.allFinite() && q.S.mean.allFinite() && q.gamma.shape > 0.0 &&
                  q.gamma.rate > 0.0 && q.eta.shape > 0.0 && q.eta.rate > 0.0;
  if (!ok) throw numeric_error("pbp: posterior approximation left the valid region");
}

PbpState pbp_train(const Eigen::MatrixXd& Y, const Eigen::MatrixXd& B, PbpState q,
                   const PbpTrainOptions& options, PbpCounters* counters) {
  if (Y.rows() != B.rows()) throw invalid_argument("pbp_train: Y and B row counts differ");
  if (Y.rows() < 1) throw invalid_argument("pbp_train: no training pairs");
  if (Y.cols() != q.obs_dim() || B.cols() != q.dim()) {
    throw invalid_argument("pbp_train: data shape does not match the network");
  }

  PbpCounters local;
  PbpCounters& c = counters ? *counters : local;
  std::vector<Eigen::Index> order(Y.rows());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(options.seed);

  for (int epoch = 1; epoch <= options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng.engine());
    const std::size_t skipped_before = c.skipped;
    for (Eigen::Index n : order) {
      adf_update_likelihood(q, Y.row(n).transpose(), B.row(n).transpose(), options.pbp, c);
      check_state(q);
    }
    const std::size_t skipped = c.skipped - skipped_before;
    if (2 * skipped > order.size()) {
      throw numeric_error("pbp_train: " + std::to_string(skipped) + " of " +
                          std::to_string(order.size()) + " points skipped in epoch " +
                          std::to_string(epoch));
    }
    ep_update_priors(q, options.pbp, c);
    check_state(q);
    if (options.on_epoch) options.on_epoch(epoch, q, c);
  }
  return q;
}

PredictiveMoments pbp_predict(const PbpState& q, const Eigen::VectorXd& y, MomentMode mode) {
  return predictive_mean_var(bayeslista_forward(q.W, q.S, y, q.lambda, q.layers, mode));
}

}  // namespace bayeslista
