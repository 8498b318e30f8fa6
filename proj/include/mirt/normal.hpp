#pragma once

// Gaussian distribution toolbox: pdf/cdf/quantile, stable log-CDF and hazard,
// bivariate CDF, and truncated draws. Everything downstream (probit
// likelihoods, tilting solves, truncated-normal sampling) routes through
// these so tail behaviour is handled in one place.

#include <algorithm>
#include <cmath>
#include <limits>

#include "mirt/common.hpp"

namespace mirt {

inline constexpr double kSqrt2 = 1.4142135623730950488;
inline constexpr double kInvSqrt2Pi = 0.3989422804014326779;
inline constexpr double kLogSqrt2Pi = 0.9189385332046727418;

inline double normal_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

inline double normal_log_pdf(double x) { return -0.5 * x * x - kLogSqrt2Pi; }

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / kSqrt2); }

// Survival function 1 - Phi(x), accurate far into the right tail.
inline double normal_sf(double x) { return 0.5 * std::erfc(x / kSqrt2); }

inline double log_normal_cdf(double x) {
  if (x > 6.0) return std::log1p(-normal_sf(x));
  if (x > -37.0) return std::log(normal_cdf(x));
  // Asymptotic expansion of the left tail.
  const double x2 = x * x;
  const double corr = -1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2);
  return -0.5 * x2 - std::log(-x) - kLogSqrt2Pi + std::log1p(corr);
}

// Wichura's AS 241 (PPND16): inverse of the standard normal CDF.
inline double normal_inv_cdf(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0) return -kPosInf;
    if (p == 1.0) return kPosInf;
    throw ConfigError("normal_inv_cdf: p outside [0,1]");
  }
  const double q = p - 0.5;
  if (std::abs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    const double num =
        q * (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
                  6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r +
                1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r +
              1.3314166789178437745e2) * r + 3.3871328727963666080e0);
    const double den =
        (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
              3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r +
            5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r +
          4.2313330701600911252e1) * r + 1.0);
    return num / den;
  }
  double r = (q < 0.0) ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double x;
  if (r <= 5.0) {
    r -= 1.6;
    const double num =
        (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
              2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r +
            3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
          4.63033784615654529590e0) * r + 1.42343711074968357734e0);
    const double den =
        (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
              1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
            6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
          2.05319162663775882187e0) * r + 1.0);
    x = num / den;
  } else {
    r -= 5.0;
    const double num =
        (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
              1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
            2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
          5.46378491116411436990e0) * r + 6.65790464350110377720e0);
    const double den =
        (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
              1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
            1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
          5.99832206555887937690e-1) * r + 1.0);
    x = num / den;
  }
  return (q < 0.0) ? -x : x;
}

// Hazard phi(t) / (1 - Phi(t)); Mills continued fraction in the right tail.
inline double normal_hazard(double t) {
  if (t == -kPosInf) return 0.0;
  if (t < 6.0) {
    const double sf = normal_sf(t);
    return normal_pdf(t) / sf;
  }
  double cf = 0.0;
  for (int k = 40; k >= 1; --k) cf = static_cast<double>(k) / (t + cf);
  return t + cf;  // 1 / Mills(t)
}

// P(a <= Z <= b) for standard normal, stable in both tails.
inline double normal_interval_prob(double a, double b) {
  if (b < a) throw ConfigError("normal_interval_prob: b < a");
  double p;
  if (a >= 0.0) {
    p = normal_sf(a) - normal_sf(b);
  } else if (b <= 0.0) {
    p = normal_cdf(b) - normal_cdf(a);
  } else {
    p = normal_cdf(b) - normal_cdf(a);
  }
  return std::max(0.0, p);
}

// Bivariate standard normal CDF P(X <= h, Y <= k) with correlation rho.
// Gauss-Legendre scheme of Drezner & Wesolowsky as refined by Genz; the
// |rho| -> 1 limits are returned exactly.
inline double bvn_cdf(double h, double k, double rho) {
  if (rho >= 1.0 - 1e-14) return normal_cdf(std::min(h, k));
  if (rho <= -1.0 + 1e-14) return std::max(0.0, normal_cdf(h) + normal_cdf(k) - 1.0);

  static const double gl_x[10] = {0.04691007703066800, 0.23076534494715845,
                                  0.44840395196977757, 0.64234933944034022,
                                  0.80157809073330991, 0.91759839922297796,
                                  0.97666392145951751, 0.99555696979049809,
                                  0.99930504173577214, 0.0};
  // Genz's three precision tiers, expressed with 20-point nodes throughout.
  static const double x20[10] = {0.0765265211334973, 0.2277858511416451,
                                 0.3737060887154196, 0.5108670019508271,
                                 0.6360536807265150, 0.7463319064601508,
                                 0.8391169718222188, 0.9122344282513259,
                                 0.9639719272779138, 0.9931285991850949};
  static const double w20[10] = {0.1527533871307258, 0.1491729864726037,
                                 0.1420961093183820, 0.1316886384491766,
                                 0.1181945319615184, 0.1019301198172404,
                                 0.0832767415767048, 0.0626720483341091,
                                 0.0406014298003869, 0.0176140071391521};
  (void)gl_x;

  const double H = -h;  // switch to P(X > -h', ...) convention internally
  const double K = -k;
  double bvn = 0.0;
  if (std::abs(rho) <= 0.925) {
    const double hs = 0.5 * (H * H + K * K);
    const double asr = std::asin(rho);
    for (int i = 0; i < 10; ++i) {
      for (int sgn = -1; sgn <= 1; sgn += 2) {
        const double sn = std::sin(asr * (1.0 + sgn * x20[i]) / 2.0);
        bvn += w20[i] * std::exp((sn * H * K - hs) / (1.0 - sn * sn));
      }
    }
    bvn = bvn * asr / (4.0 * M_PI) + normal_cdf(-H) * normal_cdf(-K);
  } else {
    double hk = H * K;
    double Hl = H, Kl = K;
    if (rho < 0.0) {
      Kl = -Kl;
      hk = -hk;
    }
    if (std::abs(rho) < 1.0) {
      const double as = (1.0 - rho) * (1.0 + rho);
      double a = std::sqrt(as);
      const double bs = (Hl - Kl) * (Hl - Kl);
      const double c = (4.0 - hk) / 8.0;
      const double d = (12.0 - hk) / 16.0;
      const double asq = -(bs / as + hk) / 2.0;
      if (asq > -100.0) {
        bvn = a * std::exp(asq) *
              (1.0 - c * (bs - as) * (1.0 - d * bs / 5.0) / 3.0 + c * d * as * as / 5.0);
      }
      if (-hk < 100.0) {
        const double b = std::sqrt(bs);
        bvn -= std::exp(-hk / 2.0) * std::sqrt(2.0 * M_PI) * normal_cdf(-b / a) * b *
               (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
      }
      a /= 2.0;
      for (int i = 0; i < 10; ++i) {
        for (int sgn = -1; sgn <= 1; sgn += 2) {
          const double xs = a * (1.0 + sgn * x20[i]);
          const double xs2 = xs * xs;
          const double rs = std::sqrt(1.0 - xs2);
          const double asq2 = -(bs / xs2 + hk) / 2.0;
          if (asq2 > -100.0) {
            bvn += a * w20[i] * std::exp(asq2) *
                   (std::exp(-hk * (1.0 - rs) / (2.0 * (1.0 + rs))) / rs -
                    (1.0 + c * xs2 * (1.0 + d * xs2)));
          }
        }
      }
      bvn = -bvn / (2.0 * M_PI);
    }
    if (rho > 0.0) {
      bvn += normal_cdf(-std::max(Hl, Kl));
    } else {
      bvn = -bvn;
      if (Kl > Hl) bvn += normal_cdf(Kl) - normal_cdf(Hl);
    }
  }
  return std::min(1.0, std::max(0.0, bvn));
}

// Draw from the standard normal conditioned on X >= a.
template <class RngT>
inline double truncated_std_normal_lower(double a, RngT& rng) {
  if (a == -kPosInf) return rng.normal();
  if (a < 37.0) {
    const double q0 = normal_sf(a);
    double tail = q0 * rng.uniform();
    tail = std::max(tail, std::numeric_limits<double>::min());
    const double x = -normal_inv_cdf(tail);
    return std::max(x, a);
  }
  // Extreme tail: shifted-exponential rejection (Robert 1995).
  const double lambda = 0.5 * (a + std::sqrt(a * a + 4.0));
  for (;;) {
    const double x = a + rng.exponential() / lambda;
    const double diff = x - lambda;
    if (std::log(rng.uniform()) <= -0.5 * diff * diff) return x;
  }
}

// Draw from the standard normal conditioned on a <= X <= b.
template <class RngT>
inline double truncated_std_normal_interval(double a, double b, RngT& rng) {
  if (a == -kPosInf && b == kPosInf) return rng.normal();
  if (b == kPosInf) return truncated_std_normal_lower(a, rng);
  if (a == -kPosInf) return -truncated_std_normal_lower(-b, rng);
  if (a > 0.0) return -truncated_std_normal_interval(-b, -a, rng);
  const double pa = normal_cdf(a);
  const double pb = normal_cdf(b);
  if (pb - pa < 1e-300) return 0.5 * (a + b);
  const double x = normal_inv_cdf(pa + rng.uniform() * (pb - pa));
  return std::min(std::max(x, a), b);
}

}  // namespace mirt
