#pragma once

#include <random>

#include "core.hpp"

namespace geoxray {

// Multivariate polynomial: sum of c * prod x_i^e_i.
struct Polynomial {
  struct Term {
    double c = 0.0;
    std::vector<int> e;
  };
  std::vector<Term> terms;

  double operator()(const Vec& x) const {
    double s = 0.0;
    for (const auto& t : terms) {
      double m = t.c;
      for (std::size_t i = 0; i < t.e.size(); ++i)
        if (t.e[i]) m *= std::pow(x[i], t.e[i]);
      s += m;
    }
    return s;
  }
  Vec grad(const Vec& x) const {
    Vec g = Vec::Zero(x.size());
    for (const auto& t : terms) {
      for (std::size_t k = 0; k < t.e.size(); ++k) {
        if (t.e[k] == 0) continue;
        double m = t.c * t.e[k];
        for (std::size_t i = 0; i < t.e.size(); ++i) {
          int p = t.e[i] - (i == k ? 1 : 0);
          if (p) m *= std::pow(x[i], p);
        }
        g[k] += m;
      }
    }
    return g;
  }
};

struct ChartManifold {
  int dim = 3;
  Vec lo, hi;
  std::function<Mat(const Vec&)> metric;
  // dg[k] = d g / d x^k
  std::function<std::vector<Mat>(const Vec&)> metric_grad;
  std::function<double(const Vec&)> rho;
  std::function<Vec(const Vec&)> rho_grad;
  bool flat = false;
  std::string name;
  double h_step = 0.0;
  double t_max = 0.0;
  double tol_exit = 1e-10;

  double diameter() const { return (hi - lo).maxCoeff(); }
  double step() const { return h_step > 0 ? h_step : 1e-3 * diameter(); }
  double max_length() const { return t_max > 0 ? t_max : 50.0 * diameter(); }
  double fd() const { return 1e-4 * diameter(); }
};

inline Mat metric_raw(const ChartManifold& M, const Vec& x) {
  Mat g = M.metric(x);
  return 0.5 * (g + g.transpose());
}

inline Mat metric_at(const ChartManifold& M, const Vec& x) {
  Mat g = metric_raw(M, x);
  Eigen::SelfAdjointEigenSolver<Mat> es(g, Eigen::EigenvaluesOnly);
  if (!(es.eigenvalues()[0] > 0.0)) throw Error(ErrorKind::NotSPD, "metric not positive definite");
  return g;
}

inline std::vector<Mat> metric_derivs(const ChartManifold& M, const Vec& x) {
  if (M.metric_grad) return M.metric_grad(x);
  int n = M.dim;
  double d = M.fd();
  std::vector<Mat> dg(n);
  for (int k = 0; k < n; ++k) {
    Vec a = x, b = x;
    a[k] += d;
    b[k] -= d;
    dg[k] = (metric_raw(M, a) - metric_raw(M, b)) / (2.0 * d);
  }
  return dg;
}

inline double rho_at(const ChartManifold& M, const Vec& x) { return M.rho(x); }

inline Vec rho_gradient(const ChartManifold& M, const Vec& x) {
  if (M.rho_grad) return M.rho_grad(x);
  int n = M.dim;
  double d = M.fd();
  Vec g(n);
  for (int k = 0; k < n; ++k) {
    Vec a = x, b = x;
    a[k] += d;
    b[k] -= d;
    g[k] = (M.rho(a) - M.rho(b)) / (2.0 * d);
  }
  return g;
}

// Gamma[k](i, j) = Γ^k_ij
inline std::vector<Mat> christoffels_at(const ChartManifold& M, const Vec& x) {
  int n = M.dim;
  std::vector<Mat> G(n, Mat::Zero(n, n));
  if (M.flat) return G;
  Mat g = metric_at(M, x);
  Mat gi = g.inverse();
  auto dg = metric_derivs(M, x);
  // lowered: Γ_lij = ½(∂_i g_lj + ∂_j g_li − ∂_l g_ij)
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      Vec low(n);
      for (int l = 0; l < n; ++l) low[l] = 0.5 * (dg[i](l, j) + dg[j](l, i) - dg[l](i, j));
      Vec up = gi * low;
      for (int k = 0; k < n; ++k) G[k](i, j) = G[k](j, i) = up[k];
    }
  return G;
}

// -Γ^k_ij v^i v^j
inline Vec geodesic_accel(const ChartManifold& M, const Vec& x, const Vec& v) {
  int n = M.dim;
  if (M.flat) return Vec::Zero(n);
  Mat g = metric_raw(M, x);
  auto dg = metric_derivs(M, x);
  Vec rhs = Vec::Zero(n);
  for (int i = 0; i < n; ++i) rhs += v[i] * (dg[i] * v);
  for (int l = 0; l < n; ++l) rhs[l] -= 0.5 * v.dot(dg[l] * v);
  return -g.ldlt().solve(rhs);
}

inline double speed2(const ChartManifold& M, const Vec& x, const Vec& v) {
  return v.dot(metric_raw(M, x) * v);
}

inline Vec normalize_g(const ChartManifold& M, const Vec& x, const Vec& v) {
  return v / std::sqrt(speed2(M, x, v));
}

struct PhasePoint {
  Vec x, v;
};

struct PathSample {
  double t = 0.0;
  Vec x, v, a;
};

struct GeodesicPath {
  std::vector<PathSample> samples;
  double tau_plus = 0.0, tau_minus = 0.0;
  PhasePoint entry_point, exit_point;
  double step = 0.0;
  std::size_t origin_index = 0;

  double length() const { return samples.empty() ? 0.0 : samples.back().t - samples.front().t; }
  std::vector<double> times() const {
    std::vector<double> t(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) t[i] = samples[i].t;
    return t;
  }
};

enum class Direction { Forward, Backward, Both };

inline void rk4_geodesic_step(const ChartManifold& M, Vec& x, Vec& v, double h) {
  Vec k1x = v, k1v = geodesic_accel(M, x, v);
  Vec x2 = x + 0.5 * h * k1x, v2 = v + 0.5 * h * k1v;
  Vec k2x = v2, k2v = geodesic_accel(M, x2, v2);
  Vec x3 = x + 0.5 * h * k2x, v3 = v + 0.5 * h * k2v;
  Vec k3x = v3, k3v = geodesic_accel(M, x3, v3);
  Vec x4 = x + h * k3x, v4 = v + h * k3v;
  Vec k4x = v4, k4v = geodesic_accel(M, x4, v4);
  x += h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
  v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
}

// Integrate a distance s (sign allowed) with steps no larger than M.step().
inline PhasePoint flow(const ChartManifold& M, const PhasePoint& p, double s) {
  PhasePoint q = p;
  if (s == 0.0) return q;
  int k = std::max(1, static_cast<int>(std::ceil(std::abs(s) / M.step() - 1e-9)));
  double h = s / k;
  for (int i = 0; i < k; ++i) rk4_geodesic_step(M, q.x, q.v, h);
  return q;
}

// Quintic Hermite interpolation of (x, v) inside a step at fraction th in [0, 1].
inline void hermite_at(const PathSample& a, const PathSample& b, double th, Vec& x, Vec& v) {
  double h = b.t - a.t, t2 = th * th, t3 = t2 * th, t4 = t3 * th, t5 = t4 * th;
  double H0 = 1 - 10 * t3 + 15 * t4 - 6 * t5, H1 = th - 6 * t3 + 8 * t4 - 3 * t5;
  double H2 = 0.5 * t2 - 1.5 * t3 + 1.5 * t4 - 0.5 * t5, H3 = 0.5 * t3 - t4 + 0.5 * t5;
  double H4 = -4 * t3 + 7 * t4 - 3 * t5, H5 = 10 * t3 - 15 * t4 + 6 * t5;
  double D0 = -30 * t2 + 60 * t3 - 30 * t4, D1 = 1 - 18 * t2 + 32 * t3 - 15 * t4;
  double D2 = th - 4.5 * t2 + 6 * t3 - 2.5 * t4, D3 = 1.5 * t2 - 4 * t3 + 2.5 * t4;
  double D4 = -12 * t2 + 28 * t3 - 15 * t4, D5 = -D0;
  x = H0 * a.x + H1 * h * a.v + H2 * h * h * a.a + H3 * h * h * b.a + H4 * h * b.v + H5 * b.x;
  v = (D0 * a.x + D5 * b.x) / h + D1 * a.v + D2 * h * a.a + D3 * h * b.a + D4 * b.v;
}

namespace detail {

// March from p until rho < 0; last sample sits on the boundary.
inline std::vector<PathSample> march(const ChartManifold& M, const PhasePoint& p, double h) {
  std::vector<PathSample> out;
  Vec x = p.x, v = p.v;
  double t = 0.0, T = M.max_length(), tol = M.tol_exit;
  out.push_back({0.0, x, v, geodesic_accel(M, x, v)});
  if (M.rho(x) < -tol) throw Error(ErrorKind::Config, "trace start outside M");
  for (;;) {
    if (out.size() > 1 && M.rho(x) <= tol) return out;
    Vec xn = x, vn = v;
    rk4_geodesic_step(M, xn, vn, h);
    double r = M.rho(xn);
    if (r < 0.0) {
      double lo = 0.0, hi = h;
      Vec xe = xn, ve = vn;
      double se = h;
      if (std::abs(r) > tol) {
        // keep the accepted point on the inside so grazing starts collapse to s = 0
        for (int it = 0; it < 200; ++it) {
          double s = 0.5 * (lo + hi);
          Vec xs = x, vs = v;
          rk4_geodesic_step(M, xs, vs, s);
          double rs = M.rho(xs);
          if (rs >= 0.0) lo = s; else hi = s;
          if (rs >= 0.0 && rs <= tol) {
            xe = xs;
            ve = vs;
            se = s;
            break;
          }
          if (hi - lo < 1e-15 * h) {
            xe = x;
            ve = v;
            se = lo;
            if (lo > 0.0) rk4_geodesic_step(M, xe, ve, lo);
            break;
          }
        }
      }
      if (se <= 1e-14 * h && out.size() == 1) {
        // grazing: exit at the start point
        return out;
      }
      out.push_back({t + se, xe, ve, geodesic_accel(M, xe, ve)});
      return out;
    }
    x = xn;
    v = vn;
    t += h;
    out.push_back({t, x, v, geodesic_accel(M, x, v)});
    if (t >= T) throw Error(ErrorKind::Trapped, "geodesic length reached T_max");
  }
}

}  // namespace detail

inline GeodesicPath trace_geodesic(const ChartManifold& M, const PhasePoint& p,
                                   Direction dir = Direction::Forward) {
  GeodesicPath g;
  g.step = M.step();
  std::vector<PathSample> fwd, bwd;
  if (dir != Direction::Backward) fwd = detail::march(M, p, g.step);
  if (dir != Direction::Forward) bwd = detail::march(M, {p.x, -p.v}, g.step);
  if (dir == Direction::Forward) {
    g.samples = std::move(fwd);
    g.origin_index = 0;
  } else {
    double tm = bwd.back().t;
    for (auto it = bwd.rbegin(); it != bwd.rend(); ++it)
      g.samples.push_back({tm - it->t, it->x, -it->v, it->a});
    g.origin_index = g.samples.size() - 1;
    if (dir == Direction::Both)
      for (std::size_t i = 1; i < fwd.size(); ++i)
        g.samples.push_back({tm + fwd[i].t, fwd[i].x, fwd[i].v, fwd[i].a});
  }
  const auto& o = g.samples[g.origin_index];
  g.tau_minus = o.t - g.samples.front().t;
  g.tau_plus = g.samples.back().t - o.t;
  g.entry_point = {g.samples.front().x, g.samples.front().v};
  g.exit_point = {g.samples.back().x, g.samples.back().v};
  return g;
}

inline double exit_time(const ChartManifold& M, const PhasePoint& p) {
  return trace_geodesic(M, p, Direction::Forward).tau_plus;
}

// Outward unit normal (in g) at x.
inline Vec outward_normal(const ChartManifold& M, const Vec& x) {
  Vec dr = rho_gradient(M, x);
  Mat g = metric_at(M, x);
  Vec nu = -g.ldlt().solve(dr);
  double nn = std::sqrt(nu.dot(g * nu));
  if (!(nn > 1e-12)) throw Error(ErrorKind::DegenerateBoundary, "vanishing gradient of rho");
  return nu / nn;
}

// Newton-type march along -grad rho onto {rho = 0}.
inline Vec project_to_boundary(const ChartManifold& M, Vec x) {
  for (int it = 0; it < 100; ++it) {
    double r = M.rho(x);
    if (std::abs(r) <= 1e-13) return x;
    Vec d = rho_gradient(M, x);
    double dd = d.squaredNorm();
    if (dd < 1e-20) throw Error(ErrorKind::DegenerateBoundary, "vanishing gradient of rho");
    x -= r * d / dd;
  }
  if (std::abs(M.rho(x)) > 1e-10) throw Error(ErrorKind::DegenerateBoundary, "boundary march failed");
  return x;
}

// g-orthonormal frame (columns) via Cholesky.
inline Mat orthonormal_frame(const ChartManifold& M, const Vec& x) {
  Mat g = metric_at(M, x);
  Eigen::LLT<Mat> llt(g);
  Mat L = llt.matrixL();
  return L.transpose().inverse();
}

struct FanSpec {
  int n_base = 10;
  int n_dirs = 10;
  std::uint64_t seed = 1;
  std::vector<Vec> base_points;  // optional; overrides random bases
};

inline std::vector<PhasePoint> boundary_fan(const ChartManifold& M, const FanSpec& spec) {
  int n = M.dim;
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::normal_distribution<double> Nrm(0.0, 1.0);
  std::vector<Vec> bases = spec.base_points;
  while (static_cast<int>(bases.size()) < spec.n_base) {
    Vec x(n);
    for (int i = 0; i < n; ++i) x[i] = M.lo[i] + (M.hi[i] - M.lo[i]) * U(rng);
    if (M.rho(x) <= 0.0) continue;
    bases.push_back(x);
  }
  std::vector<PhasePoint> out;
  for (auto& b : bases) {
    Vec z = project_to_boundary(M, b);
    Vec dr = rho_gradient(M, z);
    if (dr.norm() < 1e-10) throw Error(ErrorKind::DegenerateBoundary, "vanishing gradient of rho");
    Mat E = orthonormal_frame(M, z);
    for (int k = 0; k < spec.n_dirs; ++k) {
      Vec w(n);
      for (int i = 0; i < n; ++i) w[i] = Nrm(rng);
      Vec v = E * (w / w.norm());
      if (v.dot(dr) < 0.0) v = -v;
      out.push_back({z, normalize_g(M, z, v)});
    }
  }
  return out;
}

// Basis (columns) of the g-orthogonal complement of u at x, g-orthonormal.
inline Mat complement_frame(const ChartManifold& M, const Vec& x, const Vec& u) {
  int n = M.dim;
  Mat g = metric_at(M, x);
  Vec un = u / std::sqrt(u.dot(g * u));
  Mat B(n, n - 1);
  int m = 0;
  std::vector<Vec> basis{un};
  for (int i = 0; i < n && m < n - 1; ++i) {
    Vec e = Vec::Zero(n);
    e[i] = 1.0;
    for (auto& b : basis) e -= b.dot(g * e) * b;
    double nr = std::sqrt(e.dot(g * e));
    if (nr < 1e-6) continue;
    e /= nr;
    basis.push_back(e);
    B.col(m++) = e;
  }
  return B;
}

// Second derivative of fn(γ(t)) at t = 0 by 5-point differences; also returns first derivative.
template <class Fn>
double second_derivative_along(const ChartManifold& M, const PhasePoint& p, Fn&& fn,
                               double* first = nullptr, double hd = 0.0) {
  if (hd <= 0.0) hd = 1e-2 * M.diameter();
  double f0 = fn(p.x);
  PhasePoint a1 = flow(M, p, hd), a2 = flow(M, a1, hd);
  PhasePoint b1 = flow(M, p, -hd), b2 = flow(M, b1, -hd);
  double fp1 = fn(a1.x), fp2 = fn(a2.x), fm1 = fn(b1.x), fm2 = fn(b2.x);
  if (first) *first = (-fp2 + 8.0 * fp1 - 8.0 * fm1 + fm2) / (12.0 * hd);
  return (-fp2 + 16.0 * fp1 - 30.0 * f0 + 16.0 * fm1 - fm2) / (12.0 * hd * hd);
}

// -½ (ρ∘γ)'' is a quadratic form in the tangential direction; assemble it on a
// g-orthonormal tangent frame and take its smallest eigenvalue.
inline double boundary_convexity_margin(const ChartManifold& M, const Vec& z, Vec* worst = nullptr) {
  if (std::abs(M.rho(z)) > 1e-8) throw Error(ErrorKind::Config, "margin point not on boundary");
  Vec nu = outward_normal(M, z);
  Mat B = complement_frame(M, z, nu);
  int m = M.dim - 1;
  double hd = 2e-3 * M.diameter();
  auto q = [&](const Vec& v) {
    return -0.5 * second_derivative_along(M, {z, v}, [&](const Vec& y) { return M.rho(y); }, nullptr, hd);
  };
  Mat Q(m, m);
  for (int i = 0; i < m; ++i) Q(i, i) = q(B.col(i));
  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j) {
      Vec u = (B.col(i) + B.col(j)) / std::sqrt(2.0), w = (B.col(i) - B.col(j)) / std::sqrt(2.0);
      Q(i, j) = Q(j, i) = 0.5 * (q(u) - q(w));
    }
  Eigen::SelfAdjointEigenSolver<Mat> es(Q);
  if (worst) *worst = B * es.eigenvectors().col(0);
  return es.eigenvalues()[0];
}

// ---- built-in charts ----------------------------------------------------------

inline ChartManifold euclidean_ball(int n, double radius = 1.0) {
  ChartManifold M;
  M.dim = n;
  M.name = "euclidean_ball";
  M.lo = Vec::Constant(n, -1.05 * radius);
  M.hi = Vec::Constant(n, 1.05 * radius);
  M.metric = [n](const Vec&) { return Mat(Mat::Identity(n, n)); };
  M.metric_grad = [n](const Vec&) { return std::vector<Mat>(n, Mat::Zero(n, n)); };
  M.rho = [radius](const Vec& x) { return radius - x.norm(); };
  M.rho_grad = [n](const Vec& x) {
    double r = x.norm();
    return r > 0 ? Vec(-x / r) : Vec(Vec::Zero(n));
  };
  M.flat = true;
  return M;
}

// Smooth-in-the-interior box; rho is the distance to the nearest face.
inline ChartManifold euclidean_box(const Vec& half) {
  int n = static_cast<int>(half.size());
  ChartManifold M;
  M.dim = n;
  M.name = "euclidean_box";
  M.lo = -1.05 * half;
  M.hi = 1.05 * half;
  M.metric = [n](const Vec&) { return Mat(Mat::Identity(n, n)); };
  M.metric_grad = [n](const Vec&) { return std::vector<Mat>(n, Mat::Zero(n, n)); };
  M.rho = [half](const Vec& x) { return (half - x.cwiseAbs()).minCoeff(); };
  M.flat = true;
  return M;
}

inline ChartManifold conformal_ball(int n, Polynomial phi, double radius = 1.0) {
  ChartManifold M = euclidean_ball(n, radius);
  M.name = "conformal";
  M.flat = false;
  M.metric = [n, phi](const Vec& x) { return Mat(std::exp(2.0 * phi(x)) * Mat::Identity(n, n)); };
  M.metric_grad = [n, phi](const Vec& x) {
    double e = std::exp(2.0 * phi(x));
    Vec d = phi.grad(x);
    std::vector<Mat> dg(n);
    for (int k = 0; k < n; ++k) dg[k] = 2.0 * d[k] * e * Mat::Identity(n, n);
    return dg;
  };
  return M;
}

inline ChartManifold diag_poly_ball(int n, std::vector<Polynomial> entries, double radius = 1.0) {
  ChartManifold M = euclidean_ball(n, radius);
  M.name = "diag_poly";
  M.flat = false;
  M.metric = [n, entries](const Vec& x) {
    Mat g = Mat::Zero(n, n);
    for (int i = 0; i < n; ++i) g(i, i) = entries[i](x);
    return g;
  };
  M.metric_grad = [n, entries](const Vec& x) {
    std::vector<Mat> dg(n, Mat::Zero(n, n));
    for (int i = 0; i < n; ++i) {
      Vec d = entries[i].grad(x);
      for (int k = 0; k < n; ++k) dg[k](i, i) = d[k];
    }
    return dg;
  };
  return M;
}

// Round sphere in stereographic coordinates, cap |x| < R.
inline ChartManifold sphere_cap(int n, double R) {
  ChartManifold M = euclidean_ball(n, R);
  M.name = "sphere_cap";
  M.flat = false;
  M.metric = [n](const Vec& x) {
    double s = 1.0 + x.squaredNorm();
    return Mat(4.0 / (s * s) * Mat::Identity(n, n));
  };
  M.metric_grad = [n](const Vec& x) {
    double s = 1.0 + x.squaredNorm();
    std::vector<Mat> dg(n);
    for (int k = 0; k < n; ++k) dg[k] = (-16.0 * x[k] / (s * s * s)) * Mat::Identity(n, n);
    return dg;
  };
  return M;
}

}  // namespace geoxray
