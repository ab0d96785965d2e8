#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstdlib>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace geoxray {

inline constexpr const char* version = "0.1.0";

using cd = std::complex<double>;

// Small real vectors/matrices live on the stack; chart dimension is capped at kMaxDim.
constexpr int kMaxDim = 8;
using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim, kMaxDim>;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;

enum class ErrorKind {
  Config,
  NotSPD,
  Trapped,
  DegenerateBoundary,
  StepTooLarge,
  SingularU,
  SingularGauge,
  NotStrictlyConvexLevels,
  NotConvexAt,
  CollarTooDeep,
  DegenerateDirectionSet,
  NoConvergence,
  LayerFailed,
  Numerical
};

inline const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::Config: return "ConfigError";
    case ErrorKind::NotSPD: return "NotSPD";
    case ErrorKind::Trapped: return "Trapped";
    case ErrorKind::DegenerateBoundary: return "DegenerateBoundary";
    case ErrorKind::StepTooLarge: return "StepTooLarge";
    case ErrorKind::SingularU: return "SingularU";
    case ErrorKind::SingularGauge: return "SingularGauge";
    case ErrorKind::NotStrictlyConvexLevels: return "NotStrictlyConvexLevels";
    case ErrorKind::NotConvexAt: return "NotConvexAt";
    case ErrorKind::CollarTooDeep: return "CollarTooDeep";
    case ErrorKind::DegenerateDirectionSet: return "DegenerateDirectionSet";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::LayerFailed: return "LayerFailed";
    case ErrorKind::Numerical: return "NumericalError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind k, const std::string& msg)
      : std::runtime_error(std::string(to_string(k)) + ": " + msg), kind_(k) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

// ---- worker pool knob -------------------------------------------------------

inline std::atomic<int>& thread_setting() {
  static std::atomic<int> n{0};
  return n;
}

inline void set_num_threads(int k) { thread_setting() = std::max(1, k); }

inline int num_threads() {
  int k = thread_setting().load();
  if (k > 0) return k;
  if (const char* env = std::getenv("GEOXRAY_THREADS")) {
    int e = std::atoi(env);
    if (e > 0) return e;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Static block partition, so results never depend on scheduling.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  int k = std::min<std::size_t>(num_threads(), std::max<std::size_t>(n, 1));
  if (k <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::exception_ptr err;
  std::atomic<bool> failed{false};
  for (int w = 0; w < k; ++w) {
    std::size_t b = n * w / k, e = n * (w + 1) / k;
    pool.emplace_back([&, b, e] {
      try {
        for (std::size_t i = b; i < e && !failed; ++i) fn(i);
      } catch (...) {
        if (!failed.exchange(true)) err = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

// ---- small numerics ---------------------------------------------------------

inline Vec make_vec(std::initializer_list<double> v) {
  Vec r(static_cast<int>(v.size()));
  int i = 0;
  for (double x : v) r[i++] = x;
  return r;
}

// Gauss-Legendre nodes/weights on [-1, 1] via Newton on P_n.
inline void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  if (n == 1) {
    w[0] = 2.0;
    return;
  }
  for (int i = 0; i < n; ++i) {
    double z = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = z;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      double dp = n * (z * p1 - p0) / (z * z - 1.0);
      double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-15) break;
    }
    double p0 = 1.0, p1 = z;
    for (int k = 2; k <= n; ++k) {
      double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    double dp = n * (z * p1 - p0) / (z * z - 1.0);
    x[i] = z;
    w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
  }
}

// Quadrature on S^{m} (m = 0: two points, m = 1: uniform circle, m >= 2: product rule
// in the polar angle times the recursive rule on S^{m-1}).
struct SphereRule {
  std::vector<Vec> nodes;
  std::vector<double> weights;
};

inline SphereRule sphere_rule(int m, int resolution) {
  SphereRule r;
  if (m == 0) {
    r.nodes = {make_vec({1.0}), make_vec({-1.0})};
    r.weights = {1.0, 1.0};
    return r;
  }
  if (m == 1) {
    int k = std::max(resolution, 3);
    for (int j = 0; j < k; ++j) {
      double th = 2.0 * M_PI * (j + 0.5) / k;
      r.nodes.push_back(make_vec({std::cos(th), std::sin(th)}));
      r.weights.push_back(2.0 * M_PI / k);
    }
    return r;
  }
  SphereRule sub = sphere_rule(m - 1, resolution);
  std::vector<double> gx, gw;
  int k = std::max(resolution / 2, 2);
  gauss_legendre(k, gx, gw);
  for (int i = 0; i < k; ++i) {
    double phi = 0.5 * M_PI * (gx[i] + 1.0);
    double s = std::sin(phi), c = std::cos(phi);
    double wphi = 0.5 * M_PI * gw[i] * std::pow(s, m - 1);
    for (std::size_t j = 0; j < sub.nodes.size(); ++j) {
      Vec nd(m + 1);
      nd[0] = c;
      nd.tail(m) = s * sub.nodes[j];
      r.nodes.push_back(nd);
      r.weights.push_back(wphi * sub.weights[j]);
    }
  }
  return r;
}

inline double sphere_area(int m) {
  // |S^m| = 2 pi^{(m+1)/2} / Gamma((m+1)/2)
  return 2.0 * std::pow(M_PI, 0.5 * (m + 1)) / std::tgamma(0.5 * (m + 1));
}

// Weights of the exact integral over [t[k], t[k+1]] of the cubic through four
// neighbouring nodes; fourth order on non-uniform meshes.
inline void interval_weights4(const std::vector<double>& t, std::size_t k, std::size_t& first,
                              double w[4], int& count) {
  std::size_t n = t.size();
  if (n < 4) {
    first = k;
    count = 2;
    double h = t[k + 1] - t[k];
    w[0] = w[1] = 0.5 * h;
    return;
  }
  std::size_t s = (k == 0) ? 0 : k - 1;
  if (s + 3 >= n) s = n - 4;
  first = s;
  count = 4;
  double a = t[k], b = t[k + 1];
  // 3-point Gauss on [a, b] of each Lagrange basis polynomial (exact for cubics).
  static const double gx[3] = {-std::sqrt(0.6), 0.0, std::sqrt(0.6)};
  static const double gw[3] = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
  for (int j = 0; j < 4; ++j) {
    double acc = 0.0;
    for (int q = 0; q < 3; ++q) {
      double tq = 0.5 * (a + b) + 0.5 * (b - a) * gx[q];
      double L = 1.0;
      for (int m = 0; m < 4; ++m)
        if (m != j) L *= (tq - t[s + m]) / (t[s + j] - t[s + m]);
      acc += gw[q] * L;
    }
    w[j] = 0.5 * (b - a) * acc;
  }
}

// Trapezoid weights on a sample grid.
inline std::vector<double> trapezoid_weights(const std::vector<double>& t) {
  std::vector<double> w(t.size(), 0.0);
  for (std::size_t k = 0; k + 1 < t.size(); ++k) {
    double h = t[k + 1] - t[k];
    w[k] += 0.5 * h;
    w[k + 1] += 0.5 * h;
  }
  return w;
}

inline double frob(const CMat& m) { return m.norm(); }

}  // namespace geoxray
