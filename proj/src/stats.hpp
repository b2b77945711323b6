#ifndef EXCOMP_STATS_HPP
#define EXCOMP_STATS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"

namespace excomp {

inline double expit(double z) {
  if (z >= 0.0) {
    return 1.0 / (1.0 + std::exp(-z));
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow
inline double log1pexp(double z) {
  if (z > 0.0) return z + std::log1p(std::exp(-z));
  return std::log1p(std::exp(z));
}

inline double mean(const Eigen::VectorXd& v) {
  if (v.size() == 0) throw InvalidInput("mean of empty vector");
  return v.mean();
}

// sample variance with n-1 denominator; 0 for a single value
inline double sample_variance(const Eigen::VectorXd& v) {
  const Eigen::Index n = v.size();
  if (n == 0) throw InvalidInput("variance of empty vector");
  if (n == 1) return 0.0;
  const double m = v.mean();
  return (v.array() - m).square().sum() / static_cast<double>(n - 1);
}

inline double sample_sd(const Eigen::VectorXd& v) { return std::sqrt(sample_variance(v)); }

inline double sample_covariance(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size() || a.size() < 2) throw InvalidInput("covariance needs two equal-length vectors of size >= 2");
  const double ma = a.mean();
  const double mb = b.mean();
  return ((a.array() - ma) * (b.array() - mb)).sum() / static_cast<double>(a.size() - 1);
}

// Type-7 quantile (linear interpolation of order statistics), on a copy.
inline double quantile_type7(std::vector<double> v, double q) {
  if (v.empty()) throw InvalidInput("quantile of empty sample");
  std::sort(v.begin(), v.end());
  if (q <= 0.0) return v.front();
  if (q >= 1.0) return v.back();
  const double h = static_cast<double>(v.size() - 1) * q;
  const std::size_t lo = static_cast<std::size_t>(h);
  if (lo + 1 >= v.size()) return v.back();
  return v[lo] + (h - static_cast<double>(lo)) * (v[lo + 1] - v[lo]);
}

// Standard normal quantile, Wichura's AS 241 (PPND16), |error| < 1e-15.
inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw InvalidInput("normal quantile requires p in (0,1)");
  const double q = p - 0.5;
  double r;
  if (std::abs(q) <= 0.425) {
    r = 0.180625 - q * q;
    return q *
           (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r + 6.7265770927008700853e4) * r +
                 4.5921953931549871457e4) *
                    r +
                1.3731693765509461125e4) *
                   r +
               1.9715909503065514427e3) *
                  r +
              1.3314166789178437745e2) *
                 r +
             3.3871328727963666080e0) /
           (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r + 3.9307895800092710610e4) * r +
                 2.1213794301586595867e4) *
                    r +
                5.3941960214247511077e3) *
                   r +
               6.8718700749205790830e2) *
                  r +
              4.2313330701600911252e1) *
                 r +
             1.0);
  }
  r = (q < 0.0) ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    val = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r + 2.41780725177450611770e-1) * r +
               1.27045825245236838258e0) *
                  r +
              3.64784832476320460504e0) *
                 r +
             5.76949722146069140550e0) *
                r +
            4.63033784615654529590e0) *
               r +
           1.42343711074968357734e0) /
          (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r + 1.51986665636164571966e-2) * r +
               1.48103976427480074590e-1) *
                  r +
              6.89767334985100004550e-1) *
                 r +
             1.67638483018380384940e0) *
                r +
            2.05319162663775882187e0) *
               r +
           1.0);
  } else {
    r -= 5.0;
    val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r + 1.24266094738807843860e-3) * r +
               2.65321895265761230930e-2) *
                  r +
              2.96560571828504891230e-1) *
                 r +
             1.78482653991729133580e0) *
                r +
            5.46378491116411436990e0) *
               r +
           6.65790464350110377720e0) /
          (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r + 1.84631831751005468180e-5) * r +
               7.86869131145613259100e-4) *
                  r +
              1.48753612908506148525e-2) *
                 r +
             1.36929880922735805310e-1) *
                r +
            5.99832206555887937690e-1) *
               r +
           1.0);
  }
  return (q < 0.0) ? -val : val;
}

// two-sided p-value for a standard normal z statistic
inline double normal_two_sided_p(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

// Static-chunk parallel loop. Results written by index stay deterministic
// regardless of the thread count; the first worker exception is rethrown.
inline void parallel_for(long n, int threads, const std::function<void(long)>& body) {
  if (n <= 0) return;
  if (threads <= 1 || n == 1) {
    for (long i = 0; i < n; ++i) body(i);
    return;
  }
  const int used = static_cast<int>(std::min<long>(threads, n));
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(used));
  pool.reserve(static_cast<std::size_t>(used));
  for (int t = 0; t < used; ++t) {
    pool.emplace_back([&, t]() {
      try {
        for (long i = t; i < n; i += used) body(i);
      } catch (...) {
        errors[static_cast<std::size_t>(t)] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace excomp

#endif  // EXCOMP_STATS_HPP
