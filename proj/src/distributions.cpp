#include "bayeslista/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <type_traits>

#include "bayeslista/error.hpp"

namespace bayeslista {
namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

// Below this cut the Mills ratio is evaluated as pdf/cdf directly; above it
// the continued fraction converges to full precision within kFractionDepth.
constexpr double kFractionFrom = 3.0;
constexpr int kFractionDepth = 60;

// Forward-mode scalar carrying derivatives with respect to two seeds.
struct Dual {
  double v = 0.0;
  double d0 = 0.0;
  double d1 = 0.0;

  Dual() = default;
  Dual(double value) : v(value) {}  // NOLINT: implicit lift of constants
  Dual(double value, double g0, double g1) : v(value), d0(g0), d1(g1) {}
};

Dual operator+(const Dual& a, const Dual& b) { return {a.v + b.v, a.d0 + b.d0, a.d1 + b.d1}; }
Dual operator-(const Dual& a, const Dual& b) { return {a.v - b.v, a.d0 - b.d0, a.d1 - b.d1}; }
Dual operator-(const Dual& a) { return {-a.v, -a.d0, -a.d1}; }
Dual operator*(const Dual& a, const Dual& b) {
  return {a.v * b.v, a.d0 * b.v + a.v * b.d0, a.d1 * b.v + a.v * b.d1};
}
Dual operator/(const Dual& a, const Dual& b) {
  const double q = a.v / b.v;
  return {q, (a.d0 - q * b.d0) / b.v, (a.d1 - q * b.d1) / b.v};
}

double value(double x) { return x; }
double value(const Dual& x) { return x.v; }

double sqrt_of(double x) { return std::sqrt(x); }
Dual sqrt_of(const Dual& x) {
  const double r = std::sqrt(x.v);
  return {r, 0.5 * x.d0 / r, 0.5 * x.d1 / r};
}

double pdf(double x) { return std_normal_pdf(x); }
Dual pdf(const Dual& x) {
  const double p = std_normal_pdf(x.v);
  return {p, -x.v * p * x.d0, -x.v * p * x.d1};
}

double cdf(double x) { return std_normal_cdf(x); }
Dual cdf(const Dual& x) {
  const double p = std_normal_pdf(x.v);
  return {std_normal_cdf(x.v), p * x.d0, p * x.d1};
}

template <class T>
T clamp_value(T x, double lo, double hi) {
  if constexpr (std::is_same_v<T, double>) {
    return std::clamp(x, lo, hi);
  } else {
    x.v = std::clamp(x.v, lo, hi);
    return x;
  }
}

// Tail of the Mills-ratio continued fraction 1/(t + 1/(t + 2/(t + 3/...))):
// z = 3/(t + 4/(t + ...)) and w = 2/(t + z).
template <class T>
void fraction_tail(const T& t, T& z, T& w) {
  z = T(0.0);
  for (int k = kFractionDepth; k >= 3; --k) z = T(double(k)) / (t + z);
  w = T(2.0) / (t + z);
}

template <class T>
T mills(const T& t) {
  if (value(t) < kFractionFrom) return pdf(t) / cdf(-t);
  T z, w;
  fraction_tail(t, z, w);
  return t + T(1.0) / (t + w);
}

// 1 - h(h - t), rewritten for large t so that no cancellation occurs.
template <class T>
T tail_var_factor(const T& t) {
  if (value(t) < kFractionFrom) {
    const T h = mills(t);
    return T(1.0) - h * (h - t);
  }
  T z, w;
  fraction_tail(t, z, w);
  const T tw = t + w;
  return (t + T(2.0) * w - z) / ((t + z) * tw * tw);
}

template <class T>
struct Thresholded {
  T omega, mean, var;
  bool spike = false;
};

template <class T>
Thresholded<T> threshold_moments(const T& mu, const T& var, double lambda) {
  const T sigma = sqrt_of(var);
  const T lo_cut = (T(-lambda) - mu) / sigma;
  const T hi_cut = (T(lambda) - mu) / sigma;
  const T p_lo = cdf(lo_cut);
  const T p_hi = cdf(-hi_cut);
  const T slab = p_lo + p_hi;

  Thresholded<T> out;
  if (value(slab) < kSpikeTolerance) {
    out.omega = T(1.0);
    out.mean = T(0.0);
    out.var = T(0.0);
    out.spike = true;
    return out;
  }

  // Take the difference of the two smallest tail masses available.
  if (value(hi_cut) <= 0.0) {
    out.omega = cdf(hi_cut) - cdf(lo_cut);
  } else if (value(lo_cut) >= 0.0) {
    out.omega = cdf(-lo_cut) - cdf(-hi_cut);
  } else {
    out.omega = T(1.0) - slab;
  }
  out.omega = clamp_value(out.omega, 0.0, 1.0);

  const bool has_lo = value(p_lo) > 0.0;
  const bool has_hi = value(p_hi) > 0.0;
  T m_lo(0.0), v_lo(0.0), m_hi(0.0), v_hi(0.0);
  if (has_lo) {
    m_lo = mu + T(lambda) - sigma * mills(-lo_cut);
    v_lo = var * tail_var_factor(-lo_cut);
  }
  if (has_hi) {
    m_hi = mu - T(lambda) + sigma * mills(hi_cut);
    v_hi = var * tail_var_factor(hi_cut);
  }

  if (has_lo && has_hi) {
    const T w_lo = p_lo / slab;
    const T w_hi = p_hi / slab;
    const T gap = m_hi - m_lo;
    out.mean = w_lo * m_lo + w_hi * m_hi;
    out.var = w_lo * v_lo + w_hi * v_hi + w_lo * w_hi * gap * gap;
  } else if (has_lo) {
    out.mean = m_lo;
    out.var = v_lo;
  } else {
    out.mean = m_hi;
    out.var = v_hi;
  }
  if (value(out.var) < 0.0) out.var = clamp_value(out.var, 0.0, 0.0);
  return out;
}

}  // namespace

double soft_threshold(double x, double lambda) {
  if (x > lambda) return x - lambda;
  if (x < -lambda) return x + lambda;
  return 0.0;
}

double std_normal_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

// erfc keeps full relative precision in the lower tail.
double std_normal_cdf(double x) { return 0.5 * std::erfc(-x * kInvSqrt2); }

double upper_mills_ratio(double t) { return mills(t); }

double upper_tail_variance_factor(double t) { return tail_var_factor(t); }

double normal_logpdf(double x, double mean, double var) {
  const double r = x - mean;
  return -0.5 * std::log(2.0 * std::numbers::pi * var) - 0.5 * r * r / var;
}

double student_t_logpdf(double x, double loc, double scale2, double dof) {
  if (!(scale2 > 0.0) || !(dof > 0.0)) {
    throw invalid_argument("student_t_logpdf: scale2 and dof must be positive");
  }
  const double r = x - loc;
  return std::lgamma(0.5 * (dof + 1.0)) - std::lgamma(0.5 * dof) -
         0.5 * std::log(dof * std::numbers::pi * scale2) -
         0.5 * (dof + 1.0) * std::log1p(r * r / (dof * scale2));
}

SpikeSlab1 soft_threshold_gauss(Gauss1 in, double lambda, ThresholdJacobian* jac) {
  if (!(lambda >= 0.0)) throw invalid_argument("soft_threshold_gauss: lambda must be >= 0");
  if (!(in.var >= 0.0)) throw invalid_argument("soft_threshold_gauss: variance must be >= 0");
  if (!std::isfinite(in.mean) || !std::isfinite(in.var)) {
    throw numeric_error("soft_threshold_gauss: non-finite input");
  }
  if (jac) *jac = ThresholdJacobian{};

  if (lambda == 0.0) {
    if (jac) {
      jac->mean_mean = 1.0;
      jac->var_var = 1.0;
    }
    return {0.0, in.mean, in.var};
  }

  if (in.var == 0.0) {
    if (std::abs(in.mean) <= lambda) return {1.0, 0.0, 0.0};
    if (jac) {
      jac->mean_mean = 1.0;
      jac->var_var = 1.0;
    }
    return {0.0, soft_threshold(in.mean, lambda), 0.0};
  }

  if (!jac) {
    const auto r = threshold_moments<double>(in.mean, in.var, lambda);
    return {r.omega, r.mean, r.var};
  }

  const auto r = threshold_moments<Dual>(Dual(in.mean, 1.0, 0.0), Dual(in.var, 0.0, 1.0), lambda);
  if (!r.spike) {
    *jac = {r.omega.d0, r.omega.d1, r.mean.d0, r.mean.d1, r.var.d0, r.var.d1};
  }
  return {r.omega.v, r.mean.v, r.var.v};
}

Moments spike_slab_mean_var(SpikeSlab1 d) {
  const double keep = 1.0 - d.omega;
  return {keep * d.mean, std::max(0.0, keep * (d.var + d.omega * d.mean * d.mean))};
}

}  // namespace bayeslista
