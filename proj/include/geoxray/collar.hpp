#pragma once

#include <limits>
#include <random>

#include "manifold.hpp"

namespace geoxray {

// Gaussian e^{-s²/(2σ²)} times a smooth flat-top bump vanishing for |s| ≥ 3σ.
struct Cutoff {
  double sigma = 1.0;
  bool truncate = true;

  double support() const { return truncate ? 3.0 * sigma : std::numeric_limits<double>::infinity(); }
  static double smooth_step(double t) {
    // 0 for t <= 0, 1 for t >= 1, C^inf in between
    if (t <= 0) return 0.0;
    if (t >= 1) return 1.0;
    double a = std::exp(-1.0 / t), b = std::exp(-1.0 / (1.0 - t));
    return a / (a + b);
  }
  double bump(double s) const {
    if (!truncate) return 1.0;
    double u = std::abs(s) / (3.0 * sigma);
    return 1.0 - smooth_step(2.0 * (u - 0.5));
  }
  double operator()(double s) const { return std::exp(-s * s / (2.0 * sigma * sigma)) * bump(s); }
};

struct CollarSpec {
  int n = 3;
  Vec p;
  double eps = 0, c = 0, F = 1.0;
  double x_floor = 1e-3;
  std::function<double(const Vec&)> x_fun;  // x = x̃ + c
  std::function<Vec(const Vec&)> x_grad;    // coordinate gradient of x
  Mat E;                                    // reference tangent basis, n × (n-1)
  double c0 = 0;                            // boundary margin at p
  double alpha_ref = 0.5;
  std::vector<double> alpha_samples;
  Cutoff chi;

  double x(const Vec& z) const { return x_fun(z); }
  Vec dx(const Vec& z) const { return x_grad(z); }
  Vec y_chart(const Vec& z) const { return E.transpose() * (z - p); }
};

// Scattering-adapted frame at z: ∂x with dx(∂x) = 1 and ∂x ⊥_g ker dx, plus a g-orthonormal
// basis e_j of ker dx from the projected reference basis.
struct DirectionFrame {
  Vec dxv;  // ∂x
  Mat e;    // n × (n-1)
  Vec dx;   // covector dx
};

inline DirectionFrame direction_frame(const ChartManifold& M, const CollarSpec& C, const Vec& z) {
  int n = M.dim;
  Mat g = metric_at(M, z);
  Mat gi = g.inverse();
  DirectionFrame fr;
  fr.dx = C.dx(z);
  Vec grad = gi * fr.dx;
  double nn = fr.dx.dot(grad);
  if (!(nn > 1e-24)) throw Error(ErrorKind::DegenerateBoundary, "dx vanishes");
  fr.dxv = grad / nn;
  fr.e = Mat(n, n - 1);
  std::vector<Vec> cand;
  for (int j = 0; j < C.E.cols(); ++j) cand.push_back(C.E.col(j));
  for (int j = 0; j < n; ++j) {
    Vec a = Vec::Zero(n);
    a[j] = 1;
    cand.push_back(a);
  }
  int m = 0;
  for (auto& c0 : cand) {
    if (m == n - 1) break;
    Vec e = c0 - fr.dx.dot(c0) * fr.dxv;
    for (int k = 0; k < m; ++k) e -= fr.e.col(k).dot(g * e) * fr.e.col(k);
    double nr = std::sqrt(e.dot(g * e));
    double ref = std::sqrt(c0.dot(g * c0));
    if (nr < 0.3 * ref) continue;
    fr.e.col(m++) = e / nr;
  }
  if (m < n - 1) throw Error(ErrorKind::DegenerateBoundary, "could not complete the level-set frame");
  return fr;
}

// α = ½ (x∘γ)''(0) for the geodesic with initial velocity w.
inline double collar_alpha(const ChartManifold& M, const CollarSpec& C, const Vec& z, const Vec& w) {
  return 0.5 * second_derivative_along(M, {z, w}, [&](const Vec& y) { return C.x(y); }, nullptr,
                                       2e-3 * M.diameter());
}

struct CollarOptions {
  double eps_init = 0;  // <= 0: 0.1 * c0
  double margin_fraction = 0.5;
  int max_halvings = 6;
  double F = 1.0;
  int n_samples = 64;
  int n_dirs = 8;
  std::uint64_t seed = 17;
  double x_floor = 1e-3;
};

// Random points of {x > 0, ρ ≥ 0}.
inline std::vector<Vec> collar_points(const ChartManifold& M, const CollarSpec& C, int count, std::uint64_t seed,
                                      double x_min = 0.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  int n = M.dim;
  std::vector<Vec> out;
  long tries = 0;
  while (static_cast<int>(out.size()) < count && tries++ < 2000000L) {
    Vec z(n);
    for (int i = 0; i < n; ++i) z[i] = M.lo[i] + (M.hi[i] - M.lo[i]) * U(rng);
    if (M.rho(z) >= 0 && C.x(z) > x_min) out.push_back(z);
  }
  return out;
}

inline void finish_collar(const ChartManifold& M, CollarSpec& C, const CollarOptions& o) {
  auto pts = collar_points(M, C, o.n_samples, o.seed);
  if (pts.empty()) throw Error(ErrorKind::CollarTooDeep, "empty collar");
  SphereRule sr = sphere_rule(M.dim - 2, o.n_dirs);
  C.alpha_samples.clear();
  for (auto& z : pts) {
    auto fr = direction_frame(M, C, z);
    for (auto& w : sr.nodes) C.alpha_samples.push_back(collar_alpha(M, C, z, fr.e * w));
  }
  auto s = C.alpha_samples;
  std::nth_element(s.begin(), s.begin() + s.size() / 2, s.end());
  C.alpha_ref = s[s.size() / 2];
  C.chi.sigma = std::sqrt(C.alpha_ref / C.F);
}

inline CollarSpec build_collar(const ChartManifold& M, const Vec& p, double target_c, const CollarOptions& o = {}) {
  int n = M.dim;
  Vec z = project_to_boundary(M, p);
  double c0 = boundary_convexity_margin(M, z);
  if (!(c0 > 1e-9)) throw Error(ErrorKind::NotConvexAt, "boundary margin " + std::to_string(c0));
  CollarSpec C;
  C.n = n;
  C.p = z;
  C.c = target_c;
  C.F = o.F;
  C.c0 = c0;
  C.x_floor = o.x_floor;
  C.E = complement_frame(M, z, outward_normal(M, z));
  double eps = o.eps_init > 0 ? o.eps_init : 0.1 * c0;
  auto rho = M.rho;
  for (int k = 0; k <= o.max_halvings; ++k, eps *= 0.5) {
    C.eps = eps;
    C.x_fun = [rho, z, eps, target_c](const Vec& q) { return -rho(q) - eps * (q - z).squaredNorm() + target_c; };
    C.x_grad = [M, z, eps](const Vec& q) { return Vec(-rho_gradient(M, q) - 2.0 * eps * (q - z)); };
    auto pts = collar_points(M, C, o.n_samples, o.seed);
    if (pts.empty()) continue;
    bool inside_box = true;
    for (auto& q : pts)
      for (int i = 0; i < n; ++i)
        if (q[i] <= M.lo[i] + 1e-9 || q[i] >= M.hi[i] - 1e-9) inside_box = false;
    if (!inside_box) continue;
    SphereRule sr = sphere_rule(n - 2, o.n_dirs);
    double amin = std::numeric_limits<double>::infinity();
    for (auto& q : pts) {
      auto fr = direction_frame(M, C, q);
      for (auto& w : sr.nodes) amin = std::min(amin, collar_alpha(M, C, q, fr.e * w));
    }
    if (amin >= o.margin_fraction * c0) {
      finish_collar(M, C, o);
      return C;
    }
  }
  throw Error(ErrorKind::CollarTooDeep, "no epsilon admits collar depth " + std::to_string(target_c));
}

// Shell collar {x = ρ_f(z) − r0 > 0} for a radial sweep function centered at `center`.
inline CollarSpec radial_collar(const ChartManifold& M, const Vec& center, double r0, const CollarOptions& o = {}) {
  int n = M.dim;
  CollarSpec C;
  C.n = n;
  C.p = center;
  C.c = 0;
  C.F = o.F;
  C.x_floor = o.x_floor;
  C.E = Mat::Zero(n, 0);
  C.x_fun = [center, r0](const Vec& q) { return (q - center).norm() - r0; };
  C.x_grad = [center, n](const Vec& q) {
    Vec d = q - center;
    double r = d.norm();
    return r > 0 ? Vec(d / r) : Vec(Vec::Zero(n));
  };
  finish_collar(M, C, o);
  return C;
}

// ---- grids ---------------------------------------------------------------------------

struct Grid {
  int n = 3;
  std::vector<int> dims;
  Vec lo, hi;

  std::size_t size() const {
    std::size_t s = 1;
    for (int d : dims) s *= d;
    return s;
  }
  double spacing(int k) const { return (hi[k] - lo[k]) / (dims[k] - 1); }
  double min_spacing() const {
    double s = std::numeric_limits<double>::infinity();
    for (int k = 0; k < n; ++k) s = std::min(s, spacing(k));
    return s;
  }
  // row-major: last axis fastest
  std::size_t index(const std::vector<int>& m) const {
    std::size_t id = 0;
    for (int k = 0; k < n; ++k) id = id * dims[k] + m[k];
    return id;
  }
  std::vector<int> multi(std::size_t id) const {
    std::vector<int> m(n);
    for (int k = n - 1; k >= 0; --k) {
      m[k] = static_cast<int>(id % dims[k]);
      id /= dims[k];
    }
    return m;
  }
  Vec point(std::size_t id) const {
    auto m = multi(id);
    Vec z(n);
    for (int k = 0; k < n; ++k) z[k] = lo[k] + spacing(k) * m[k];
    return z;
  }
  // Multilinear stencil; returns false outside the grid.
  bool stencil(const Vec& z, std::vector<std::pair<std::size_t, double>>& out) const {
    out.clear();
    std::vector<int> base(n);
    std::vector<double> fr(n);
    for (int k = 0; k < n; ++k) {
      double u = (z[k] - lo[k]) / spacing(k);
      if (u < 0 || u > dims[k] - 1) return false;
      int b = std::min(static_cast<int>(std::floor(u)), dims[k] - 2);
      base[k] = b;
      fr[k] = u - b;
    }
    for (int c = 0; c < (1 << n); ++c) {
      double w = 1;
      std::size_t id = 0;
      for (int k = 0; k < n; ++k) {
        int bit = (c >> (n - 1 - k)) & 1;
        w *= bit ? fr[k] : 1 - fr[k];
        id = id * dims[k] + base[k] + bit;
      }
      if (w != 0.0) out.push_back({id, w});
    }
    return true;
  }
};

inline Grid make_grid(const Vec& lo, const Vec& hi, const std::vector<int>& dims) {
  Grid g;
  g.n = static_cast<int>(lo.size());
  g.lo = lo;
  g.hi = hi;
  g.dims = dims;
  return g;
}

// Bounding box of {x > 0, ρ ≥ 0} from a lattice scan, padded slightly.
inline Grid collar_grid(const ChartManifold& M, const CollarSpec& C, const std::vector<int>& dims, int scan = 60) {
  int n = M.dim;
  Vec lo = Vec::Constant(n, std::numeric_limits<double>::infinity());
  Vec hi = Vec::Constant(n, -std::numeric_limits<double>::infinity());
  Grid s = make_grid(M.lo, M.hi, std::vector<int>(n, scan));
  for (std::size_t i = 0; i < s.size(); ++i) {
    Vec z = s.point(i);
    if (M.rho(z) >= 0 && C.x(z) > 0) {
      lo = lo.cwiseMin(z);
      hi = hi.cwiseMax(z);
    }
  }
  if (!(lo[0] < hi[0])) throw Error(ErrorKind::CollarTooDeep, "collar grid is empty");
  for (int k = 0; k < n; ++k) {
    double pad = s.spacing(k);
    lo[k] = std::max(M.lo[k], lo[k] - pad);
    hi[k] = std::min(M.hi[k], hi[k] + pad);
  }
  return make_grid(lo, hi, dims);
}

struct GridField {
  Grid grid;
  int comps = 1;  // complex entries per node
  CVec data;

  GridField() = default;
  GridField(const Grid& g, int c) : grid(g), comps(c), data(CVec::Zero(g.size() * c)) {}
  cd& at(std::size_t node, int c) { return data[node * comps + c]; }
  cd at(std::size_t node, int c) const { return data[node * comps + c]; }
};

}  // namespace geoxray
