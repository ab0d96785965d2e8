#pragma once

#include <limits>
#include <random>

#include "manifold.hpp"

namespace geoxray {

using ScalarField = std::function<double(const Vec&)>;

struct ConvexityReport {
  double min_hessian = std::numeric_limits<double>::infinity();
  int n_samples = 0;
  std::vector<PhasePoint> witnesses;
  std::vector<double> witness_values;
};

// (f∘γ)''(0) along the geodesic through p.
inline double hessian_along(const ChartManifold& M, const ScalarField& f, const PhasePoint& p) {
  return second_derivative_along(M, p, f, nullptr, 1e-3 * M.diameter());
}

// Random interior unit phase points satisfying keep(x).
inline std::vector<PhasePoint> sample_phase_points(const ChartManifold& M, int n_points, int n_dirs,
                                                   std::uint64_t seed,
                                                   const std::function<bool(const Vec&)>& keep = {}) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::normal_distribution<double> G(0.0, 1.0);
  int n = M.dim;
  std::vector<PhasePoint> out;
  int tries = 0;
  while (static_cast<int>(out.size()) < n_points * n_dirs) {
    if (++tries > 1000 * n_points) throw Error(ErrorKind::Config, "sampling region is empty");
    Vec x(n);
    for (int i = 0; i < n; ++i) x[i] = M.lo[i] + (M.hi[i] - M.lo[i]) * U(rng);
    if (M.rho(x) <= 0.0) continue;
    if (keep && !keep(x)) continue;
    Mat E = orthonormal_frame(M, x);
    for (int k = 0; k < n_dirs; ++k) {
      Vec w(n);
      for (int i = 0; i < n; ++i) w[i] = G(rng);
      out.push_back({x, E * (w / w.norm())});
    }
  }
  return out;
}

inline ConvexityReport hessian_min_along_geodesics(const ChartManifold& M, const ScalarField& f,
                                                   const std::vector<PhasePoint>& samples,
                                                   int n_witness = 5) {
  std::vector<double> val(samples.size());
  parallel_for(samples.size(), [&](std::size_t i) { val[i] = hessian_along(M, f, samples[i]); });
  ConvexityReport r;
  r.n_samples = static_cast<int>(samples.size());
  std::vector<std::size_t> idx(samples.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return val[a] < val[b]; });
  for (std::size_t k = 0; k < idx.size() && static_cast<int>(k) < n_witness; ++k) {
    r.witnesses.push_back(samples[idx[k]]);
    r.witness_values.push_back(val[idx[k]]);
  }
  if (!idx.empty()) r.min_hessian = val[idx[0]];
  return r;
}

// ---- Riccati comparison thresholds ---------------------------------------------

enum class Verdict { GlobalConvex, CollarOnly };

struct RiccatiClassification {
  double kappa = 0, lambda = 0, R = 0;
  Verdict verdict = Verdict::GlobalConvex;
  double collar_depth = std::numeric_limits<double>::quiet_NaN();
  double threshold = 0;
  std::string branch;  // coth / constant / tanh
  double blow_up_time = std::numeric_limits<double>::quiet_NaN();
};

inline RiccatiClassification riccati_classify(double kappa, double lambda, double R) {
  if (kappa < 0 || !(lambda > 0) || !(R > 0)) throw Error(ErrorKind::Config, "riccati_classify: bad input");
  RiccatiClassification c{kappa, lambda, R};
  double s = std::sqrt(kappa);
  if (s * R < 1e-4) {
    double z = kappa * R * R;
    c.threshold = kappa * R * (1.0 - z / 3.0 + 2.0 * z * z / 15.0);
  } else {
    c.threshold = s * std::tanh(s * R);
  }
  c.verdict = lambda > c.threshold ? Verdict::GlobalConvex : Verdict::CollarOnly;
  if (c.verdict == Verdict::CollarOnly) c.collar_depth = std::atanh(lambda / s) / s;
  if (lambda > s) {
    c.branch = "coth";
    if (s > 0) c.blow_up_time = std::atanh(s / lambda) / s;
    else c.blow_up_time = 1.0 / lambda;
  } else if (lambda == s) {
    c.branch = "constant";
  } else {
    c.branch = "tanh";
  }
  return c;
}

inline const char* to_string(Verdict v) { return v == Verdict::GlobalConvex ? "GlobalConvex" : "CollarOnly"; }

inline ScalarField collar_convex_function(ScalarField r, double R) {
  return [r = std::move(r), R](const Vec& x) {
    double d = r(x);
    return -d + d * d / (4.0 * R);
  };
}

// ---- foliation -------------------------------------------------------------------

// Riemannian Hessian ∂²f − Γ^k ∂_k f by central differences.
inline Mat riemannian_hessian(const ChartManifold& M, const ScalarField& f, const Vec& x, Vec* grad = nullptr) {
  int n = M.dim;
  double d = 1e-3 * M.diameter();
  Mat H(n, n);
  Vec g(n);
  double f0 = f(x);
  for (int i = 0; i < n; ++i) {
    Vec a = x, b = x;
    a[i] += d;
    b[i] -= d;
    double fa = f(a), fb = f(b);
    Vec a2 = x, b2 = x;
    a2[i] += 2 * d;
    b2[i] -= 2 * d;
    double fa2 = f(a2), fb2 = f(b2);
    g[i] = (-fa2 + 8 * fa - 8 * fb + fb2) / (12 * d);
    H(i, i) = (-fa2 + 16 * fa - 30 * f0 + 16 * fb - fb2) / (12 * d * d);
  }
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      auto at = [&](double si, double sj) {
        Vec y = x;
        y[i] += si * d;
        y[j] += sj * d;
        return f(y);
      };
      double hij = (at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1)) / (4 * d * d);
      H(i, j) = H(j, i) = hij;
    }
  if (!M.flat) {
    auto G = christoffels_at(M, x);
    for (int k = 0; k < n; ++k) H -= g[k] * G[k];
  }
  if (grad) *grad = g;
  return H;
}

struct LevelQuantities {
  double lambda1 = 0;  // min eigenvalue of Hess ρ on N^⊥
  double c = 0;        // |∇ρ|^{-2}[Hess(N,N) − 2/λ₁ |Hess(·,N)|_{N⊥}|²]
};

inline LevelQuantities level_quantities(const ChartManifold& M, const ScalarField& rho, const Vec& x) {
  Vec dr;
  Mat H = riemannian_hessian(M, rho, x, &dr);
  Mat g = metric_at(M, x);
  Vec grad = g.ldlt().solve(dr);  // ∇ρ
  double gn = std::sqrt(grad.dot(dr));
  if (!(gn > 1e-12)) throw Error(ErrorKind::NotStrictlyConvexLevels, "critical point of the sweep function");
  Vec N = grad / gn;
  Mat B = complement_frame(M, x, N);
  Mat Ht = B.transpose() * H * B;
  Eigen::SelfAdjointEigenSolver<Mat> es(Ht);
  LevelQuantities q;
  q.lambda1 = es.eigenvalues()[0];
  double hnn = N.dot(H * N);
  Vec hvn = B.transpose() * (H * N);
  if (q.lambda1 > 0) q.c = (hnn - 2.0 / q.lambda1 * hvn.squaredNorm()) / (gn * gn);
  return q;
}

struct FoliationOptions {
  int n_levels = 24;
  int points_per_level = 64;
  int dirs = 32;  // kept for reporting; the infimum over v is taken exactly
  int table_size = 2001;
  std::uint64_t seed = 3;
  std::function<double(double)> c_tilde_override;
};

struct FoliationFunction {
  ScalarField rho_fol;
  double a = 0, b = 0;
  std::vector<double> t, h, hp;         // table, ascending in t
  std::vector<double> level_t, level_c, level_lambda1;
  std::function<double(double)> c_tilde;
  double margin = 0.1;

  double h_of(double s) const {
    if (s >= b) return h.back() + hp.back() * (s - b);
    if (s <= t.front()) return h.front() + hp.front() * (s - t.front());
    double dt = t[1] - t[0];
    std::size_t k = std::min<std::size_t>(static_cast<std::size_t>((s - t.front()) / dt), t.size() - 2);
    double u = (s - t[k]) / dt;
    double h00 = (1 + 2 * u) * (1 - u) * (1 - u), h10 = u * (1 - u) * (1 - u);
    double h01 = u * u * (3 - 2 * u), h11 = u * u * (u - 1);
    return h00 * h[k] + h10 * dt * hp[k] + h01 * h[k + 1] + h11 * dt * hp[k + 1];
  }
  double operator()(const Vec& x) const { return h_of(rho_fol(x)); }
  ScalarField as_field() const {
    auto self = *this;
    return [self](const Vec& x) { return self(x); };
  }
  // max |h'' + c̃ h'| / max |h'| over interior nodes, h'' by 4th-order differences of h'.
  double ode_residual() const {
    double dt = t[1] - t[0], worst = 0, mx = 0;
    for (double v : hp) mx = std::max(mx, std::abs(v));
    for (std::size_t i = 2; i + 2 < t.size(); ++i) {
      double hpp = (-hp[i + 2] + 8 * hp[i + 1] - 8 * hp[i - 1] + hp[i - 2]) / (12 * dt);
      worst = std::max(worst, std::abs(hpp + c_tilde(t[i]) * hp[i]));
    }
    return worst / mx;
  }
};

// Points on {ρ_fol = t} obtained by Newton projection of random seeds.
inline std::vector<Vec> level_points(const ChartManifold& M, const ScalarField& rho, double t, int count,
                                     std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  int n = M.dim;
  std::vector<Vec> out;
  int tries = 0;
  double d = M.fd();
  while (static_cast<int>(out.size()) < count && tries++ < 200 * count) {
    Vec x(n);
    for (int i = 0; i < n; ++i) x[i] = M.lo[i] + (M.hi[i] - M.lo[i]) * U(rng);
    bool ok = false;
    for (int it = 0; it < 60; ++it) {
      double r = rho(x) - t;
      if (std::abs(r) < 1e-12) {
        ok = true;
        break;
      }
      Vec g(n);
      for (int k = 0; k < n; ++k) {
        Vec a = x, b = x;
        a[k] += d;
        b[k] -= d;
        g[k] = (rho(a) - rho(b)) / (2 * d);
      }
      if (g.squaredNorm() < 1e-20) break;
      x -= r * g / g.squaredNorm();
    }
    if (!ok) continue;
    bool inside = M.rho(x) >= 0.0;
    for (int i = 0; i < n; ++i) inside = inside && x[i] > M.lo[i] + 4 * d && x[i] < M.hi[i] - 4 * d;
    if (inside) out.push_back(x);
  }
  return out;
}

inline FoliationFunction foliation_from_levels(const ChartManifold& M, ScalarField rho_fol, double a, double b,
                                               double margin = 0.1, const FoliationOptions& opt = {}) {
  if (!(b > a)) throw Error(ErrorKind::Config, "foliation range must satisfy a < b");
  FoliationFunction F;
  F.rho_fol = rho_fol;
  F.a = a;
  F.b = b;
  F.margin = margin;
  std::mt19937_64 rng(opt.seed);
  int L = std::max(2, opt.n_levels);
  for (int l = 0; l < L; ++l) {
    double t = a + (b - a) * (l + 1.0) / L;
    auto pts = level_points(M, rho_fol, t, opt.points_per_level, rng);
    if (pts.empty()) throw Error(ErrorKind::Config, "no sample points on a level set");
    std::vector<LevelQuantities> q(pts.size());
    parallel_for(pts.size(), [&](std::size_t i) { q[i] = level_quantities(M, rho_fol, pts[i]); });
    double lam = std::numeric_limits<double>::infinity(), c = lam;
    for (auto& v : q) {
      lam = std::min(lam, v.lambda1);
      c = std::min(c, v.c);
    }
    if (!(lam > 1e-8)) throw Error(ErrorKind::NotStrictlyConvexLevels, "level t = " + std::to_string(t));
    F.level_t.push_back(t);
    F.level_c.push_back(c);
    F.level_lambda1.push_back(lam);
  }
  if (opt.c_tilde_override) {
    F.c_tilde = opt.c_tilde_override;
  } else {
    // smooth minorant: cubic through the sampled minima, shifted down
    auto lt = F.level_t, lc = F.level_c;
    double scale = 1.0 / (b - a);
    for (double v : lc) scale = std::max(scale, std::abs(v));
    double shift = margin * scale;
    F.c_tilde = [lt, lc, shift](double s) {
      std::size_t n = lt.size();
      std::size_t k = 0;
      while (k + 2 < n && s > lt[k + 1]) ++k;
      std::size_t st = (k == 0) ? 0 : std::min(k - 1, n >= 4 ? n - 4 : 0);
      std::size_t m = std::min<std::size_t>(4, n);
      double v = 0;
      for (std::size_t j = 0; j < m; ++j) {
        double Lj = 1;
        for (std::size_t i = 0; i < m; ++i)
          if (i != j) Lj *= (s - lt[st + i]) / (lt[st + j] - lt[st + i]);
        v += Lj * lc[st + j];
      }
      return v - shift;
    };
  }
  // h'' + c̃ h' = 0, h(b) = 0, h'(b) = 1, integrated from b down to a
  int T = std::max(opt.table_size, 8);
  double lo = a + 1e-9 * (b - a);
  double dt = (b - lo) / (T - 1);
  F.t.resize(T);
  F.h.resize(T);
  F.hp.resize(T);
  for (int i = 0; i < T; ++i) F.t[i] = lo + dt * i;
  F.t[T - 1] = b;
  double y0 = 0.0, y1 = 1.0;
  F.h[T - 1] = y0;
  F.hp[T - 1] = y1;
  auto& ct = F.c_tilde;
  for (int i = T - 1; i > 0; --i) {
    double s = F.t[i], hs = -dt;
    double k1a = y1, k1b = -ct(s) * y1;
    double k2a = y1 + 0.5 * hs * k1b, k2b = -ct(s + 0.5 * hs) * (y1 + 0.5 * hs * k1b);
    double k3a = y1 + 0.5 * hs * k2b, k3b = -ct(s + 0.5 * hs) * (y1 + 0.5 * hs * k2b);
    double k4a = y1 + hs * k3b, k4b = -ct(s + hs) * (y1 + hs * k3b);
    y0 += hs / 6 * (k1a + 2 * k2a + 2 * k3a + k4a);
    y1 += hs / 6 * (k1b + 2 * k2b + 2 * k3b + k4b);
    F.h[i - 1] = y0;
    F.hp[i - 1] = y1;
  }
  return F;
}

// ---- exhaustion / escape ------------------------------------------------------------

struct ExhaustionReport {
  int n_samples = 0;
  double min_grad = std::numeric_limits<double>::infinity();
  bool critical_point_found = false;
  Vec critical_point;
  double max_interior = -std::numeric_limits<double>::infinity();
  double max_boundary = -std::numeric_limits<double>::infinity();
  bool max_on_boundary_only = false;
  bool superlevels_bounded = true;
  std::vector<std::string> violations;
};

inline Vec fd_gradient(const ChartManifold& M, const ScalarField& f, const Vec& x) {
  int n = M.dim;
  double d = M.fd();
  Vec g(n);
  for (int k = 0; k < n; ++k) {
    Vec a = x, b = x;
    a[k] += d;
    b[k] -= d;
    g[k] = (f(a) - f(b)) / (2 * d);
  }
  return g;
}

// U is {x in M : in_U(x)}; the boundary part of U is sampled on ∂M.
inline ExhaustionReport exhaustion_check(const ChartManifold& M, const ScalarField& f,
                                         const std::function<bool(const Vec&)>& in_U, int n_samples = 2000,
                                         std::uint64_t seed = 5) {
  ExhaustionReport r;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  int n = M.dim;
  std::vector<Vec> pts;
  int tries = 0;
  while (static_cast<int>(pts.size()) < n_samples && tries++ < 100 * n_samples) {
    Vec x(n);
    for (int i = 0; i < n; ++i) x[i] = M.lo[i] + (M.hi[i] - M.lo[i]) * U(rng);
    if (M.rho(x) > 0 && in_U(x)) pts.push_back(x);
  }
  r.n_samples = static_cast<int>(pts.size());
  if (pts.empty()) {
    r.violations.push_back("empty sample set");
    return r;
  }
  std::size_t imin = 0;
  std::vector<double> fv(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    fv[i] = f(pts[i]);
    r.min_grad = std::min(r.min_grad, fd_gradient(M, f, pts[i]).norm());
    r.max_interior = std::max(r.max_interior, fv[i]);
    if (fv[i] < fv[imin]) imin = i;
  }
  // descend from the sampled minimum to see whether the infimum is attained at a critical point
  Vec x = pts[imin];
  double step = 1e-2 * M.diameter();
  for (int it = 0; it < 2000; ++it) {
    Vec g = fd_gradient(M, f, x);
    if (g.norm() < 1e-7) {
      r.critical_point_found = true;
      r.critical_point = x;
      break;
    }
    Vec y = x - step * g / g.norm();
    if (M.rho(y) <= 0 || !in_U(y) || f(y) >= f(x)) {
      step *= 0.5;
      if (step < 1e-12) break;
      continue;
    }
    x = y;
  }
  for (std::size_t i = 0; i < pts.size(); ++i) {
    Vec g = fd_gradient(M, f, pts[i]);
    if (g.norm() < 1e-8 && !(r.critical_point_found && (pts[i] - r.critical_point).norm() < 1e-3))
      r.violations.push_back("critical point away from the infimum");
  }
  FanSpec fs;
  fs.n_base = std::max(50, n_samples / 10);
  fs.n_dirs = 1;
  fs.seed = seed + 1;
  std::vector<PhasePoint> bd;
  {
    std::vector<Vec> bases;
    std::mt19937_64 r2(seed + 1);
    while (static_cast<int>(bases.size()) < fs.n_base && tries++ < 200 * n_samples) {
      Vec y(n);
      for (int i = 0; i < n; ++i) y[i] = M.lo[i] + (M.hi[i] - M.lo[i]) * U(r2);
      if (M.rho(y) <= 0) continue;
      Vec z = project_to_boundary(M, y);
      if (in_U(z)) bases.push_back(z);
    }
    for (auto& z : bases) r.max_boundary = std::max(r.max_boundary, f(z));
  }
  double tol = 1e-9 * std::max(1.0, std::abs(r.max_boundary));
  r.max_on_boundary_only = r.max_boundary >= r.max_interior - tol;
  if (!r.max_on_boundary_only) r.violations.push_back("interior sample exceeds boundary maximum");
  // superlevel sets {f >= c} for c above the infimum must stay inside the box and away from ∂U \ ∂M
  double inf = fv[imin];
  for (double q : {0.25, 0.5, 0.75}) {
    double c = inf + q * (r.max_interior - inf);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (fv[i] < c) continue;
      for (int k = 0; k < n; ++k)
        if (pts[i][k] <= M.lo[k] || pts[i][k] >= M.hi[k]) r.superlevels_bounded = false;
    }
  }
  if (!r.superlevels_bounded) r.violations.push_back("superlevel set leaves the box");
  if (r.min_grad < 1e-8 && !r.critical_point_found) r.violations.push_back("vanishing gradient");
  return r;
}

struct EscapeReport {
  int n_traced = 0;
  int n_violations = 0;
  int n_trapped = 0;
  double min_excess = std::numeric_limits<double>::infinity();
};

inline EscapeReport escape_check(const ChartManifold& M, const ScalarField& f, const std::vector<PhasePoint>& starts,
                                 double tol = 1e-9) {
  EscapeReport r;
  std::vector<double> excess(starts.size(), std::numeric_limits<double>::infinity());
  std::vector<int> state(starts.size(), 0);  // 0 skipped, 1 ok, 2 violation, 3 trapped
  parallel_for(starts.size(), [&](std::size_t i) {
    const auto& p = starts[i];
    double d1 = 0;
    second_derivative_along(M, p, f, &d1, 1e-3 * M.diameter());
    if (d1 < -1e-9) return;
    try {
      auto g = trace_geodesic(M, p);
      double f0 = f(p.x), m = std::numeric_limits<double>::infinity();
      for (auto& s : g.samples) m = std::min(m, f(s.x) - f0);
      excess[i] = m;
      state[i] = m >= -tol ? 1 : 2;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::Trapped) throw;
      state[i] = 3;
    }
  });
  for (std::size_t i = 0; i < starts.size(); ++i) {
    if (state[i] == 0) continue;
    ++r.n_traced;
    if (state[i] == 2) ++r.n_violations;
    if (state[i] == 3) {
      ++r.n_trapped;
      ++r.n_violations;
    }
    r.min_excess = std::min(r.min_excess, excess[i]);
  }
  return r;
}

}  // namespace geoxray
