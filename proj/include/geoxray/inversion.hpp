#pragma once

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>

#include "normal_op.hpp"

namespace geoxray {

struct LinearOp {
  std::size_t rows = 0, cols = 0;
  std::function<CVec(const CVec&)> apply, adjoint;
};

inline LinearOp as_linear_op(const RowMat& A) {
  LinearOp L;
  L.rows = A.rows();
  L.cols = A.cols();
  const RowMat* p = &A;
  L.apply = [p](const CVec& u) { return CVec(*p * u); };
  L.adjoint = [p](const CVec& u) { return CVec(p->adjoint() * u); };
  return L;
}

inline LinearOp as_linear_op(const NormalOperator& op) { return as_linear_op(op.A); }

struct SolverSpec {
  std::string method = "cgnr";  // or "landweber"
  int max_iters = 200;
  double tol = 1e-6;            // relative residual
  double min_reduction = 10;    // NoConvergence below this residual reduction
  double noise_level = 0;       // > 0: stop at 1.5 × noise_level (discrepancy principle)
};

struct SolveResult {
  CVec x;
  int iterations = 0;
  std::vector<double> history;  // relative residuals, starting with 1
  bool converged = false;
};

inline void check_reduction(const SolveResult& r, const SolverSpec& s) {
  if (r.history.size() > 1 && r.history.back() > 1.0 / s.min_reduction)
    throw Error(ErrorKind::NoConvergence,
                "residual reduced only to " + std::to_string(r.history.back()) + " in " + std::to_string(r.iterations) +
                    " iterations");
}

inline double stop_level(const SolverSpec& s) { return s.noise_level > 0 ? 1.5 * s.noise_level : s.tol; }

inline SolveResult cgnr(const LinearOp& A, const CVec& b, const SolverSpec& s) {
  SolveResult out;
  out.x = CVec::Zero(A.cols);
  double bn = b.norm();
  out.history.push_back(1.0);
  if (bn == 0) {
    out.converged = true;
    return out;
  }
  CVec r = b;
  CVec z = A.adjoint(r);
  CVec p = z;
  double zz = z.squaredNorm();
  double stop = stop_level(s);
  for (int k = 0; k < s.max_iters; ++k) {
    CVec w = A.apply(p);
    double ww = w.squaredNorm();
    if (ww == 0) break;
    double a = zz / ww;
    out.x += a * p;
    r -= a * w;
    out.iterations = k + 1;
    out.history.push_back(r.norm() / bn);
    if (out.history.back() <= stop) {
      out.converged = true;
      break;
    }
    z = A.adjoint(r);
    double zn = z.squaredNorm();
    if (zn == 0) break;
    p = z + (zn / zz) * p;
    zz = zn;
  }
  check_reduction(out, s);
  return out;
}

inline double power_norm2(const LinearOp& A, int iters = 50, std::uint64_t seed = 3) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> G(0, 1);
  CVec v(A.cols);
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = cd(G(rng), G(rng));
  v.normalize();
  double lam = 0;
  for (int k = 0; k < iters; ++k) {
    CVec w = A.adjoint(A.apply(v));
    lam = w.norm();
    if (lam == 0) return 0;
    v = w / lam;
  }
  return lam;
}

inline SolveResult landweber(const LinearOp& A, const CVec& b, const SolverSpec& s) {
  SolveResult out;
  out.x = CVec::Zero(A.cols);
  double bn = b.norm();
  out.history.push_back(1.0);
  if (bn == 0) {
    out.converged = true;
    return out;
  }
  double sig2 = power_norm2(A);
  double step = 0.9 / sig2;
  CVec r = b;
  double stop = stop_level(s);
  for (int k = 0; k < s.max_iters; ++k) {
    out.x += step * A.adjoint(r);
    r = b - A.apply(out.x);
    out.iterations = k + 1;
    out.history.push_back(r.norm() / bn);
    if (out.history.back() <= stop) {
      out.converged = true;
      break;
    }
  }
  check_reduction(out, s);
  return out;
}

inline SolveResult solve(const LinearOp& A, const CVec& b, const SolverSpec& s) {
  if (s.method == "cgnr") return cgnr(A, b, s);
  if (s.method == "landweber") return landweber(A, b, s);
  throw Error(ErrorKind::Config, "unknown solver " + s.method);
}

struct RecoveryReport {
  double rel_error_interior = 0;
  int iterations = 0;
  std::vector<double> residual_history;
  CVec solution;
  CVec gauge_p;
  double gauge_fit_residual = 0;
  std::size_t unknowns = 0;
};

inline CVec add_noise(const CVec& b, double level, std::uint64_t seed) {
  if (level <= 0) return b;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> G(0, 1);
  CVec e(b.size());
  for (Eigen::Index i = 0; i < e.size(); ++i) e[i] = cd(G(rng), G(rng));
  return b + level * b.norm() / e.norm() * e;
}

// Scalar mode: data = N_F f_true (optionally noisy), error on {x ≥ x_inner}.
inline RecoveryReport solve_local_scalar(const NormalOperator& op, const CVec& data, const CVec& f_true,
                                         const SolverSpec& s, double x_inner) {
  auto res = solve(as_linear_op(op), data, s);
  RecoveryReport rep;
  rep.iterations = res.iterations;
  rep.residual_history = res.history;
  rep.solution = res.x;
  rep.unknowns = op.size();
  auto mask = interior_mask(op, x_inner);
  double den = masked_norm(f_true, mask);
  rep.rel_error_interior = den > 0 ? masked_norm(res.x - f_true, mask) / den : masked_norm(res.x, mask);
  return rep;
}

// ---- discrete gauge ----------------------------------------------------------------------

struct GaugeOperator {
  Eigen::SparseMatrix<cd> D;       // p (free nodes × N) -> operator layout
  std::vector<std::size_t> pnodes;  // grid nodes carrying a free p value
  std::vector<long> pslot;
  int N = 1;
};

// d_{𝒜,F} p in frame components at the active nodes of a pair-mode operator; p is zero on
// nodes with ρ < pin_band and free elsewhere.
inline GaugeOperator build_gauge_operator(const ChartManifold& M, const ConnectionPair& pair,
                                          const NormalOperator& op, double pin_band = 0) {
  if (op.opt.mode != NFMode::Pair) throw Error(ErrorKind::Config, "gauge operator needs a pair-mode operator");
  const Grid& g = op.grid;
  const CollarSpec& C = op.collar;
  int n = M.dim, N = pair.N, comps = op.comps;
  bool conj = op.opt.conjugated;
  double F = conj ? C.F : 0.0;
  GaugeOperator G;
  G.N = N;
  G.pslot.assign(g.size(), -1);
  for (std::size_t id = 0; id < g.size(); ++id)
    if (M.rho(g.point(id)) >= pin_band) {
      G.pslot[id] = static_cast<long>(G.pnodes.size());
      G.pnodes.push_back(id);
    }
  std::vector<Eigen::Triplet<cd>> trip;
  for (std::size_t i = 0; i < op.nodes.size(); ++i) {
    std::size_t id = op.nodes[i];
    Vec z = g.point(id);
    auto m = g.multi(id);
    double x = op.xs[i];
    auto fr = direction_frame(M, C, z);
    Vec dxc = C.dx(z);
    auto A = pair.A_at(z);
    CMat Phi = pair.Phi_at(z);
    // coordinate α_k = Σ_nbr c p_nbr + L_k p_node
    std::vector<std::vector<std::pair<long, double>>> stencil(n);
    for (int k = 0; k < n; ++k) {
      double h = g.spacing(k);
      auto nb = [&](int off) {
        auto mm = m;
        mm[k] += off;
        return G.pslot[g.index(mm)];
      };
      if (m[k] > 0 && m[k] + 1 < g.dims[k]) {
        stencil[k] = {{nb(1), 0.5 / h}, {nb(-1), -0.5 / h}};
      } else if (m[k] == 0) {
        stencil[k] = {{nb(1), 1.0 / h}, {G.pslot[id], -1.0 / h}};
      } else {
        stencil[k] = {{G.pslot[id], 1.0 / h}, {nb(-1), -1.0 / h}};
      }
    }
    // frame rows: a = s_a Σ_k ∂x^k α_k, b_j = s_b Σ_k e^k_j α_k, f = s_f Φ p
    double sa = conj ? x * x : 1.0, sb = conj ? x : 1.0, sf = conj ? x : 1.0;
    std::vector<Eigen::VectorXd> coef(n);  // frame row r=0..n-1 coefficients on α_k
    for (int r = 0; r < n; ++r) {
      coef[r] = Eigen::VectorXd(n);
      for (int k = 0; k < n; ++k) coef[r][k] = r == 0 ? sa * fr.dxv[k] : sb * fr.e(k, r - 1);
    }
    long self = G.pslot[id];
    for (int r = 0; r < n; ++r) {
      CMat Lself = CMat::Zero(N, N);
      for (int k = 0; k < n; ++k) {
        double c = coef[r][k];
        if (c == 0) continue;
        for (auto& [col, w] : stencil[k])
          if (col >= 0)
            for (int q = 0; q < N; ++q) trip.emplace_back(i * comps + r * N + q, col * N + q, c * w);
        Lself += c * (A[k] - F * dxc[k] / (x * x) * CMat::Identity(N, N));
      }
      if (self >= 0)
        for (int q = 0; q < N; ++q)
          for (int t = 0; t < N; ++t)
            if (Lself(q, t) != 0.0) trip.emplace_back(i * comps + r * N + q, self * N + t, Lself(q, t));
    }
    if (self >= 0)
      for (int q = 0; q < N; ++q)
        for (int t = 0; t < N; ++t)
          if (Phi(q, t) != 0.0) trip.emplace_back(i * comps + n * N + q, self * N + t, sf * Phi(q, t));
  }
  G.D.resize(op.size(), G.pnodes.size() * N);
  G.D.setFromTriplets(trip.begin(), trip.end());
  return G;
}

struct GaugeProjection {
  CVec s_sol, p;
  double fit_residual = 0;
  int iterations = 0;
};

inline GaugeProjection gauge_project(const GaugeOperator& G, const CVec& s, double tol = 1e-10, int max_iters = 20000) {
  GaugeProjection out;
  if (s.norm() == 0) {
    out.s_sol = s;
    out.p = CVec::Zero(G.D.cols());
    return out;
  }
  Eigen::LeastSquaresConjugateGradient<Eigen::SparseMatrix<cd>> ls;
  ls.setTolerance(tol);
  ls.setMaxIterations(max_iters);
  ls.compute(G.D);
  out.p = ls.solve(s);
  out.iterations = static_cast<int>(ls.iterations());
  if (ls.info() != Eigen::Success && ls.error() > 1e-4)
    throw Error(ErrorKind::NoConvergence, "gauge projection error " + std::to_string(ls.error()));
  out.s_sol = s - G.D * out.p;
  out.fit_residual = out.s_sol.norm() / s.norm();
  return out;
}

// Pair mode: error measured after projecting out the discrete gauge directions.
inline RecoveryReport solve_local_pair(const NormalOperator& op, const GaugeOperator& G, const CVec& data,
                                       const CVec& s_true, const SolverSpec& s, double x_inner) {
  auto res = solve(as_linear_op(op), data, s);
  RecoveryReport rep;
  rep.iterations = res.iterations;
  rep.residual_history = res.history;
  rep.solution = res.x;
  rep.unknowns = op.size();
  auto mask = interior_mask(op, x_inner);
  auto pe = gauge_project(G, CVec(res.x - s_true));
  auto pt = gauge_project(G, s_true);
  rep.gauge_p = pe.p;
  rep.gauge_fit_residual = pe.fit_residual;
  double den = masked_norm(pt.s_sol, mask);
  rep.rel_error_interior = den > 0 ? masked_norm(pe.s_sol, mask) / den : masked_norm(pe.s_sol, mask);
  return rep;
}

// ---- data from transforms -----------------------------------------------------------------

// Back-projected data rows: Σ_keys row factor ⊗ W*(key) · g(key) with g = per-key transform
// value. `value` receives the traced key geodesic (unit speed, both directions) and its
// weights along the path (empty for the zero pair).
using KeyValueFn = std::function<CVec(const GeodesicPath&, const std::vector<CMat>&)>;

inline CVec backproject(const ChartManifold& M, const ConnectionPair& pair, const NormalOperator& op,
                        const KeyValueFn& value) {
  int n = M.dim, N = op.N, comps = op.comps;
  bool pairmode = op.opt.mode == NFMode::Pair;
  const CollarSpec& C = op.collar;
  ChartManifold Ms = M;
  Ms.h_step = op.opt.path_step > 0 ? op.opt.path_step : 0.25 * op.grid.min_spacing();
  auto fam = family_nodes(C, op.opt.family);
  CVec out = CVec::Zero(op.size());
  parallel_for(op.nodes.size(), [&](std::size_t i) {
    if (!op.ghost.empty() && op.ghost[i]) return;
    Vec z = op.grid.point(op.nodes[i]);
    double x = op.xs[i];
    auto fr = direction_frame(M, C, z);
    double pref = pairmode ? 1.0 : 1.0 / x;
    for (double s : fam.s) {
      double chi = C.chi(s);
      if (chi == 0) continue;
      for (std::size_t j = 0; j < fam.omega.nodes.size(); ++j) {
        const Vec& om = fam.omega.nodes[j];
        Vec w = family_velocity(fr, x * s, om);
        Vec v = w / std::sqrt(speed2(M, z, w));
        GeodesicPath path;
        try {
          path = trace_geodesic(Ms, {z, v}, Direction::Both);
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::Trapped) throw;
          continue;
        }
        std::vector<CMat> W;
        if (!pair.is_zero()) W = weights_along(Ms, pair, path);
        CVec gval = value(path, W);
        if (!W.empty()) gval = W[path.origin_index].adjoint() * gval;
        double rw = pref * fam.ds * fam.omega.weights[j] * chi;
        if (!pairmode) {
          out.segment(i * comps, N) += rw * gval;
        } else {
          out.segment(i * comps, N) += rw * s * gval;
          for (int k = 0; k < n - 1; ++k) out.segment(i * comps + (k + 1) * N, N) += rw * om[k] * gval;
          out.segment(i * comps + n * N, N) += rw * gval;
        }
      }
    }
  });
  return out;
}

// Plain-form data from an exact scalar field: ∫ W f(γ) dt per key.
inline CVec backproject_function(const ChartManifold& M, const ConnectionPair& pair, const NormalOperator& op,
                                 const std::function<CVec(const Vec&)>& f) {
  return backproject(M, pair, op, [&](const GeodesicPath& path, const std::vector<CMat>& W) {
    auto tw = trapezoid_weights(path.times());
    CVec acc = CVec::Zero(op.N);
    for (std::size_t k = 0; k < path.samples.size(); ++k) {
      CVec v = f(path.samples[k].x);
      acc += tw[k] * (W.empty() ? v : CVec(W[k] * v));
    }
    return acc;
  });
}

// ---- layer stripping ----------------------------------------------------------------------

struct LayerSchedule {
  std::vector<double> levels;  // t₀ > t₁ > ... (values of the sweep function)
  double overlap = 0.08;
  double margin = 0.08;        // artificial boundary sits this far below each layer
  double glue_tol = 0.1;
};

struct LayerReport {
  double t_hi = 0, t_lo = 0;
  std::size_t unknowns = 0;
  int iterations = 0;
  double rel_error = 0, overlap_mismatch = 0;
};

struct StripReport {
  std::vector<LayerReport> layers;
  double rel_error_global = 0;
  double r_exclude = 0;
  GridField recovered;
};

struct StripOptions {
  std::vector<int> dims = {18, 18, 18};
  NFOptions nf;
  SolverSpec solver;
  double r_exclude = 0.1;
  int ghost_cells = 1;
};

// Radial sweep on a ball-like chart: layer i recovers {t_{i+1} ≤ |z − center| ≤ t_i}, treating
// the region outside as known.
inline StripReport layer_strip(const ChartManifold& M, const Vec& center, const LayerSchedule& sched,
                               const std::function<CVec(const Vec&)>& f_true, const StripOptions& o) {
  StripReport rep;
  rep.r_exclude = o.r_exclude;
  Grid g = make_grid(M.lo, M.hi, o.dims);
  auto pair = zero_pair(M.dim, 1);
  GridField rec(g, 1);
  std::vector<char> known(g.size(), 0);
  auto radius = [&](std::size_t id) { return (g.point(id) - center).norm(); };
  for (std::size_t L = 0; L + 1 < sched.levels.size(); ++L) {
    double thi = sched.levels[L], tlo = sched.levels[L + 1];
    CollarOptions co;
    co.F = 1.0;
    auto C = radial_collar(M, center, tlo - sched.margin, co);
    NFOptions nf = o.nf;
    nf.conjugated = false;
    nf.mode = NFMode::Scalar;
    nf.ghost_cells = o.ghost_cells;
    auto full = assemble_NF(M, pair, C, g, nf);
    // columns: unknown (inside the layer band) versus known
    std::vector<long> ucol;
    std::vector<std::size_t> urow;
    for (std::size_t i = 0; i < full.nodes.size(); ++i) {
      double r = radius(full.nodes[i]);
      bool unknown = r <= thi + sched.overlap || !known[full.nodes[i]];
      if (unknown) {
        ucol.push_back(static_cast<long>(i));
        urow.push_back(i);
      }
    }
    std::size_t m = ucol.size();
    CVec known_vals = CVec::Zero(full.size());
    for (std::size_t i = 0; i < full.nodes.size(); ++i)
      if (known[full.nodes[i]] && radius(full.nodes[i]) > thi + sched.overlap) known_vals[i] = rec.at(full.nodes[i], 0);
    CVec data_full = backproject_function(M, pair, full, f_true);
    CVec known_part = full.A * known_vals;
    RowMat A(m, m);
    CVec b(m);
    for (std::size_t r = 0; r < m; ++r) {
      b[r] = data_full[urow[r]] - known_part[urow[r]];
      for (std::size_t c = 0; c < m; ++c) A(r, c) = full.A(urow[r], ucol[c]);
    }
    auto res = solve(as_linear_op(A), b, o.solver);
    LayerReport lr;
    lr.t_hi = thi;
    lr.t_lo = tlo;
    lr.unknowns = m;
    lr.iterations = res.iterations;
    double e2 = 0, t2 = 0, mm2 = 0, mo2 = 0;
    for (std::size_t r = 0; r < m; ++r) {
      std::size_t id = full.nodes[ucol[r]];
      double rad = radius(id);
      cd truth = f_true(g.point(id))[0];
      if (rad >= tlo && rad <= thi && M.rho(g.point(id)) >= 0) {
        e2 += std::norm(res.x[r] - truth);
        t2 += std::norm(truth);
      }
      if (known[id] && rad > thi && rad <= thi + sched.overlap) {
        mm2 += std::norm(res.x[r] - rec.at(id, 0));
        mo2 += std::norm(rec.at(id, 0));
      }
    }
    lr.rel_error = t2 > 0 ? std::sqrt(e2 / t2) : std::sqrt(e2);
    lr.overlap_mismatch = mo2 > 0 ? std::sqrt(mm2 / mo2) : 0.0;
    rep.layers.push_back(lr);
    if (L > 0 && lr.overlap_mismatch > sched.glue_tol)
      throw Error(ErrorKind::LayerFailed,
                  "layer " + std::to_string(L) + " overlap mismatch " + std::to_string(lr.overlap_mismatch));
    for (std::size_t r = 0; r < m; ++r) {
      std::size_t id = full.nodes[ucol[r]];
      if (radius(id) >= tlo) {
        rec.at(id, 0) = res.x[r];
        known[id] = 1;
      }
    }
  }
  double e2 = 0, t2 = 0;
  double tmin = sched.levels.back();
  for (std::size_t id = 0; id < g.size(); ++id) {
    Vec z = g.point(id);
    double r = (z - center).norm();
    if (M.rho(z) < 0 || r < std::max(o.r_exclude, tmin)) continue;
    cd truth = f_true(z)[0];
    e2 += std::norm(rec.at(id, 0) - truth);
    t2 += std::norm(truth);
  }
  rep.rel_error_global = t2 > 0 ? std::sqrt(e2 / t2) : std::sqrt(e2);
  rep.recovered = rec;
  return rep;
}

// ---- pseudo-linearized connection step ----------------------------------------------------

// Entry points of every key geodesic of a collar family.
// Entry points of the key geodesics (χ(s) ≠ 0), ordered node → s → ω.
inline std::vector<PhasePoint> collar_fan(const ChartManifold& M, const CollarSpec& C, const Grid& grid,
                                          const FamilySpec& family, double path_step = 0) {
  auto nodes = active_nodes(M, C, grid);
  auto fam = family_nodes(C, family);
  ChartManifold Ms = M;
  Ms.h_step = path_step > 0 ? path_step : 0.25 * grid.min_spacing();
  std::size_t per = fam.s.size() * fam.omega.nodes.size();
  std::vector<PhasePoint> pts(nodes.size() * per);
  std::vector<char> ok(pts.size(), 0);
  parallel_for(nodes.size(), [&](std::size_t i) {
    Vec z = grid.point(nodes[i]);
    auto fr = direction_frame(M, C, z);
    double x = C.x(z);
    std::size_t k = i * per;
    for (double s : fam.s)
      for (std::size_t j = 0; j < fam.omega.nodes.size(); ++j, ++k) {
        if (C.chi(s) == 0) continue;
        Vec w = family_velocity(fr, x * s, fam.omega.nodes[j]);
        Vec v = w / std::sqrt(speed2(M, z, w));
        try {
          auto path = trace_geodesic(Ms, {z, v}, Direction::Backward);
          pts[k] = path.entry_point;
          ok[k] = 1;
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::Trapped) throw;
        }
      }
  });
  std::vector<PhasePoint> out;
  for (std::size_t k = 0; k < pts.size(); ++k)
    if (ok[k]) out.push_back(pts[k]);
  return out;
}

inline std::vector<PhasePoint> collar_fan(const ChartManifold& M, const NormalOperator& op) {
  return collar_fan(M, op.collar, op.grid, op.opt.family, op.opt.path_step);
}

struct ConnectionStepReport {
  double mismatch_before = 0, mismatch_after = 0, mismatch_unprojected = 0;
  double update_norm = 0, solenoidal_norm = 0;
  double gauge_fit_residual = 0;
  int iterations = 0;
  std::size_t unknowns = 0, fan_size = 0;
};

inline double scattering_mismatch(const ScatteringData& a, const ScatteringData& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.C.size(); ++i) s += (a.C[i] - b.C[i]).squaredNorm();
  return std::sqrt(s);
}

// Gridded frame components (plain form) to a pair of matrix fields, multilinear between nodes.
inline ConnectionPair field_to_pair(const ChartManifold& M, const NormalOperator& op, const CVec& u, int Nsmall) {
  int n = M.dim;
  std::vector<std::vector<CMat>> Anode(op.nodes.size());
  std::vector<CMat> Pnode(op.nodes.size());
  for (std::size_t i = 0; i < op.nodes.size(); ++i) {
    Vec z = op.grid.point(op.nodes[i]);
    auto [alpha, f] = from_frame_components(M, op.collar, z, CVec(u.segment(i * op.comps, op.comps)), false);
    Anode[i].resize(n);
    for (int k = 0; k < n; ++k) Anode[i][k] = unvec(alpha[k], Nsmall);
    Pnode[i] = unvec(f, Nsmall);
  }
  auto grid = op.grid;
  auto slot = op.slot;
  ConnectionPair p;
  p.n = n;
  p.N = Nsmall;
  p.A = [=](const Vec& x) {
    std::vector<CMat> out(n, CMat::Zero(Nsmall, Nsmall));
    std::vector<std::pair<std::size_t, double>> st;
    if (!grid.stencil(x, st)) return out;
    for (auto& [id, w] : st)
      if (slot[id] >= 0)
        for (int k = 0; k < n; ++k) out[k] += w * Anode[slot[id]][k];
    return out;
  };
  p.Phi = [=](const Vec& x) {
    CMat out = CMat::Zero(Nsmall, Nsmall);
    std::vector<std::pair<std::size_t, double>> st;
    if (!grid.stencil(x, st)) return out;
    for (auto& [id, w] : st)
      if (slot[id] >= 0) out += w * Pnode[slot[id]];
    return out;
  };
  return p;
}

inline ConnectionPair add_pairs(const ConnectionPair& a, const ConnectionPair& b) {
  ConnectionPair p;
  p.n = a.n;
  p.N = a.N;
  p.unitary = false;
  int n = a.n;
  p.A = [a, b, n](const Vec& x) {
    auto u = a.A_at(x), v = b.A_at(x);
    for (int k = 0; k < n; ++k) u[k] += v[k];
    return u;
  };
  p.Phi = [a, b](const Vec& x) { return CMat(a.Phi_at(x) + b.Phi_at(x)); };
  return p;
}

struct ConnectionStep {
  ConnectionPair updated;
  ConnectionPair update;
  ConnectionStepReport report;
};

// One pseudo-linearized step: data C_guess⁻¹C_B − I ≈ −I_Ĝ(𝓑 − 𝒢) on the collar fan, solved in
// the N²-dimensional fiber with the plain pair-mode operator and then gauge projected.
inline ConnectionStep recover_connection_step(const ChartManifold& M, const ScatteringData& dataB,
                                              const ConnectionPair& guess, const CollarSpec& C, const Grid& grid,
                                              NFOptions nf, const SolverSpec& s, double pin_cells = 1) {
  nf.mode = NFMode::Pair;
  nf.conjugated = false;
  int Ns = guess.N;
  auto hat = hatted_pair(guess, guess);
  auto op = assemble_NF(M, hat, C, grid, nf);
  ConnectionStep out;
  auto dataG = scattering_data(M, guess, dataB.points);
  out.report.fan_size = dataB.points.size();
  out.report.mismatch_before = scattering_mismatch(dataG, dataB);
  // data must be sampled on collar_fan(op), whose order matches the key loop below
  auto fan = collar_fan(M, op);
  if (fan.size() != dataB.points.size())
    throw Error(ErrorKind::Config, "scattering data is not sampled on the collar fan");
  std::vector<CVec> dvec(fan.size());
  for (std::size_t k = 0; k < fan.size(); ++k)
    dvec[k] = -vec(CMat(checked_inverse(dataG.C[k]) * dataB.C[k] - CMat::Identity(Ns, Ns)));
  std::vector<std::size_t> offset(op.nodes.size() + 1, 0);
  {
    auto fam = family_nodes(C, nf.family);
    ChartManifold Ms = M;
    Ms.h_step = nf.path_step > 0 ? nf.path_step : 0.25 * grid.min_spacing();
    std::size_t per = 0;
    for (double sv : fam.s)
      if (C.chi(sv) != 0) per += fam.omega.nodes.size();
    for (std::size_t i = 0; i < op.nodes.size(); ++i) offset[i + 1] = offset[i] + per;
  }
  if (offset.back() != fan.size()) throw Error(ErrorKind::Numerical, "trapped keys break the fan indexing");
  CVec b = CVec::Zero(op.size());
  {
    int n = M.dim, N = op.N, comps = op.comps;
    auto fam = family_nodes(C, nf.family);
    ChartManifold Ms = M;
    Ms.h_step = nf.path_step > 0 ? nf.path_step : 0.25 * grid.min_spacing();
    parallel_for(op.nodes.size(), [&](std::size_t i) {
      Vec z = grid.point(op.nodes[i]);
      auto fr = direction_frame(M, C, z);
      std::size_t k = offset[i];
      for (double sv : fam.s) {
        double chi = C.chi(sv);
        if (chi == 0) continue;
        for (std::size_t j = 0; j < fam.omega.nodes.size(); ++j, ++k) {
          const Vec& om = fam.omega.nodes[j];
          Vec w = family_velocity(fr, op.xs[i] * sv, om);
          Vec v = w / std::sqrt(speed2(M, z, w));
          auto path = trace_geodesic(Ms, {z, v}, Direction::Backward);
          // Ŵ at the key point from the entry point
          auto Wh = weights_along(Ms, hat, path);
          // Backward paths are forward oriented: the key point is the last sample
          CVec gval = Wh.back().adjoint() * dvec[k];
          double rw = fam.ds * fam.omega.weights[j] * chi;
          b.segment(i * comps, N) += rw * sv * gval;
          for (int q = 0; q < n - 1; ++q) b.segment(i * comps + (q + 1) * N, N) += rw * om[q] * gval;
          b.segment(i * comps + n * N, N) += rw * gval;
        }
      }
    });
  }
  auto res = solve(as_linear_op(op), b, s);
  auto G = build_gauge_operator(M, hat, op, pin_cells * grid.min_spacing());
  auto pr = gauge_project(G, res.x);
  out.report.iterations = res.iterations;
  out.report.unknowns = op.size();
  out.report.update_norm = res.x.norm();
  out.report.solenoidal_norm = pr.s_sol.norm();
  out.report.gauge_fit_residual = pr.fit_residual;
  out.update = field_to_pair(M, op, pr.s_sol, Ns);
  out.updated = add_pairs(guess, out.update);
  auto dataN = scattering_data(M, out.updated, dataB.points);
  out.report.mismatch_after = scattering_mismatch(dataN, dataB);
  auto raw = add_pairs(guess, field_to_pair(M, op, res.x, Ns));
  out.report.mismatch_unprojected = scattering_mismatch(scattering_data(M, raw, dataB.points), dataB);
  return out;
}

}  // namespace geoxray
