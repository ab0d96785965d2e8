#pragma once

#include <chrono>
#include <sstream>

#include "geoxray/applications.hpp"
#include "geoxray/convexity.hpp"
#include "geoxray/inversion.hpp"

namespace geoxray {

struct Check {
  int id = 0;
  std::string name;
  bool pass = false;
  double value = 0, threshold = 0;
  std::string detail;
  double seconds = 0;
};

namespace detail {

class Stopwatch {
 public:
  Stopwatch() : t0_(std::chrono::steady_clock::now()) {}
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count(); }

 private:
  std::chrono::steady_clock::time_point t0_;
};

inline std::string num(double v) {
  std::ostringstream o;
  o.precision(3);
  o << v;
  return o.str();
}

inline std::vector<CMat> random_gauge_coeffs(int n, int N, std::uint64_t seed, double sd = 0.5) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> G(0, sd);
  std::vector<CMat> c(n + 1, CMat(N, N));
  for (auto& m : c)
    for (int i = 0; i < N; ++i)
      for (int j = 0; j < N; ++j) m(i, j) = cd(G(rng), G(rng));
  return c;
}

inline CVec bump_at(const Vec& z, const Vec& c, double w) {
  CVec r(1);
  r[0] = std::exp(-(z - c).squaredNorm() / (2 * w * w));
  return r;
}

}  // namespace detail

// 1: exit times on the flat ball against the chord length −2⟨x, v⟩
inline Check check_geometry(int n_base = 40, int n_dirs = 25, std::uint64_t seed = 1) {
  detail::Stopwatch sw;
  auto M = euclidean_ball(3);
  auto fan = boundary_fan(M, {n_base, n_dirs, seed, {}});
  double worst = 0;
  for (auto& p : fan) worst = std::max(worst, std::abs(exit_time(M, p) + 2 * p.x.dot(p.v)));
  Check c{1, "geometry", false, worst, 1e-6};
  c.seconds = sw.seconds();
  c.pass = worst <= 1e-6 && c.seconds < 10;
  c.detail = std::to_string(fan.size()) + " samples, max |tau - chord| " + detail::num(worst) + ", " +
             detail::num(c.seconds) + " s";
  return c;
}

// 2: C = I for the zero pair, C unitary for a unitary pair
inline Check check_scattering(std::uint64_t seed = 2) {
  detail::Stopwatch sw;
  auto M = euclidean_ball(3);
  auto fan = boundary_fan(M, {10, 10, seed, {}});
  auto Z = scattering_data(M, zero_pair(3, 2), fan);
  auto U = scattering_data(M, random_pair(3, 3, 1.0, seed, true), fan);
  double ez = 0, eu = 0;
  for (auto& c : Z.C) ez = std::max(ez, (c - CMat::Identity(2, 2)).norm());
  for (auto& c : U.C) eu = std::max(eu, (c.adjoint() * c - CMat::Identity(3, 3)).norm());
  Check c{2, "scattering identity", ez <= 1e-10 && eu <= 1e-7, std::max(ez / 1e-10, eu / 1e-7), 1};
  c.detail = "zero pair " + detail::num(ez) + " (<= 1e-10), unitary " + detail::num(eu) + " (<= 1e-7)";
  c.seconds = sw.seconds();
  return c;
}

// 3: scattering data is invariant under gauges equal to the identity on the boundary
inline Check check_gauge_invariance(int n_pairs = 20, std::uint64_t seed = 3) {
  detail::Stopwatch sw;
  auto M = euclidean_ball(3);
  auto fan = boundary_fan(M, {5, 4, seed, {}});
  double ea = 0, ef = 0;
  for (int k = 0; k < n_pairs; ++k) {
    auto pair = random_pair(3, 2, 1.0, seed * 1000 + k);
    auto C = scattering_data(M, pair, fan);
    auto g = exp_gauge(M, detail::random_gauge_coeffs(3, 2, seed * 1000 + 500 + k));
    auto Ca = scattering_data(M, gauge_transform_pair(M, pair, g), fan);
    g.du = nullptr;
    auto Cf = scattering_data(M, gauge_transform_pair(M, pair, g), fan);
    for (std::size_t i = 0; i < fan.size(); ++i) {
      ea = std::max(ea, (C.C[i] - Ca.C[i]).norm());
      ef = std::max(ef, (C.C[i] - Cf.C[i]).norm());
    }
  }
  Check c{3, "gauge invariance", ea <= 1e-7 && ef <= 1e-5, std::max(ea / 1e-7, ef / 1e-5), 1};
  c.detail = std::to_string(n_pairs) + " pairs, analytic du " + detail::num(ea) + " (<= 1e-7), finite-difference du " +
             detail::num(ef) + " (<= 1e-5)";
  c.seconds = sw.seconds();
  return c;
}

// 4: I_𝒜(d_𝒜 p) = 0 for p vanishing on the boundary
inline Check check_kernel_annihilation(int n_p = 100, int n_geo = 100, std::uint64_t seed = 4) {
  detail::Stopwatch sw;
  auto M = euclidean_ball(3);
  M.h_step = 1e-3;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> G(0, 1);
  int nb = std::max(1, static_cast<int>(std::sqrt(double(n_geo))));
  auto fan = boundary_fan(M, {nb, (n_geo + nb - 1) / nb, seed, {}});
  fan.resize(std::min<std::size_t>(fan.size(), n_geo));
  std::vector<GeodesicPath> paths;
  for (auto& f : fan) paths.push_back(trace_geodesic(M, f));
  double worst = 0;
  for (int k = 0; k < n_p; ++k) {
    auto pair = random_pair(3, 2, 0.5, seed * 100 + k);
    CMat q0(2, 4);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 4; ++j) q0(i, j) = cd(G(rng), G(rng));
    auto rho = M.rho;
    VecField p = [q0, rho](const Vec& x) {
      Eigen::Vector4cd b(1.0, x[0], x[1], x[2] * x[0]);
      return CVec(rho(x) * (q0 * b));
    };
    auto s = d_pair_apply(M, pair, p);
    std::vector<double> val(paths.size()), pinf(paths.size()), dinf(paths.size());
    parallel_for(paths.size(), [&](std::size_t i) {
      val[i] = transform_attenuated(M, pair, s, paths[i]).norm();
      for (std::size_t j = 0; j < paths[i].samples.size(); j += 50) {
        const Vec& x = paths[i].samples[j].x;
        pinf[i] = std::max(pinf[i], p(x).norm());
        for (auto& a : s.alpha(x)) dinf[i] = std::max(dinf[i], a.norm());
      }
    });
    double sp = *std::max_element(pinf.begin(), pinf.end()), sd = *std::max_element(dinf.begin(), dinf.end());
    for (double v : val) worst = std::max(worst, v / (sp + sd));
  }
  Check c{4, "natural-kernel annihilation", worst <= 1e-5, worst, 1e-5};
  c.detail = std::to_string(n_p) + " p x " + std::to_string(paths.size()) + " geodesics, max |I(d p)|/(|p|+|dp|) " +
             detail::num(worst);
  c.seconds = sw.seconds();
  return c;
}

// 5: pseudo-linearization residual and its RK4 convergence order
inline Check check_pseudo_linearization(int n_pairs = 5, std::uint64_t seed = 5) {
  detail::Stopwatch sw;
  auto M = euclidean_ball(3);
  M.h_step = 1e-3;
  auto fan = boundary_fan(M, {n_pairs, 1, seed, {}});
  double worst = 0;
  for (int k = 0; k < n_pairs; ++k) {
    auto A = random_pair(3, 2, 1.0, seed * 10 + 2 * k), B = random_pair(3, 2, 1.0, seed * 10 + 2 * k + 1);
    worst = std::max(worst, pseudo_linearization_residual(M, A, B, trace_geodesic(M, fan[k])));
  }
  // order probe with stiff unitary pairs so the discretization error dominates roundoff
  auto A = random_pair(3, 2, 8.0, 21, true), B = random_pair(3, 2, 8.0, 22, true);
  PhasePoint p{make_vec({-1.0, 0.0, 0.0}), make_vec({1.0, 0.0, 0.0})};
  double r1 = pseudo_linearization_residual(M, A, B, trace_geodesic(M, p));
  ChartManifold M2 = M;
  M2.h_step = 0.5 * M.h_step;
  double r2 = pseudo_linearization_residual(M2, A, B, trace_geodesic(M2, p));
  double ratio = r1 / r2;
  bool ok = worst <= 1e-7 && std::abs(ratio - 16) <= 0.3 * 16;
  Check c{5, "pseudo-linearization", ok, worst, 1e-7};
  c.detail = "max residual " + detail::num(worst) + " (<= 1e-7), Richardson ratio " + detail::num(ratio) + " (16 +- 30%)";
  c.seconds = sw.seconds();
  return c;
}

// 6: symbol positivity on the flat model
inline Check check_symbols(int n_xi = 41, int n_eta = 11, int n_eta_dirs = 64, int n_dirs = 1440) {
  detail::Stopwatch sw;
  auto b = flat_model(3, 1.0, 0.5);
  ScanSpec s;
  s.n_xi = n_xi;
  s.n_eta = n_eta;
  s.n_eta_dirs = n_eta_dirs;
  s.sym.n_dirs = n_dirs;
  auto sc = ellipticity_scan(b, NFMode::Scalar, s);
  auto pr = ellipticity_scan(b, NFMode::Pair, s);
  s.restricted = false;
  auto pu = ellipticity_scan(b, NFMode::Pair, s);
  double zero = pu.ratio_min;
  Check c{6, "symbol positivity", false, sc.c_min, 0};
  c.seconds = sw.seconds();
  c.pass = sc.c_min > 0 && pr.c_min > 0 && zero <= 1e-10 && c.seconds < 120;
  c.detail = "scalar c_min " + detail::num(sc.c_min) + ", pair restricted c_min " + detail::num(pr.c_min) +
             ", unrestricted min lambda_min/lambda_max " + detail::num(zero) + ", " + std::to_string(sc.rows.size()) +
             " points, " + detail::num(c.seconds) + " s";
  return c;
}

struct LocalScalarResult {
  double err_clean = 0, err_noisy = 0, err_pair = 0;
  int its_clean = 0, its_pair = 0;
  double seconds = 0;
};

// Shared by criteria 7 and 13: flat-ball collar at p = e₁, bump centred in the collar.
inline LocalScalarResult run_local_scalar(int d = 20, bool with_pair = true, double noise = 0.01) {
  detail::Stopwatch sw;
  LocalScalarResult r;
  auto M = euclidean_ball(3);
  double c = 0.2;
  auto C = build_collar(M, make_vec({1.0, 0.0, 0.0}), c);
  Grid g = collar_grid(M, C, {d, d, d});
  Vec cen = make_vec({1 - 0.5 * c, 0.0, 0.0});
  auto op = assemble_NF(M, zero_pair(3, 1), C, g);
  CVec ft = sample_scalar(op, [&](const Vec& z) { return detail::bump_at(z, cen, 0.25); });
  CVec data = op.apply(ft);
  SolverSpec s;
  auto clean = solve_local_scalar(op, data, ft, s, 0.25 * c);
  r.err_clean = clean.rel_error_interior;
  r.its_clean = clean.iterations;
  if (noise > 0) r.err_noisy = solve_local_scalar(op, add_noise(data, noise, 5), ft, s, 0.25 * c).rel_error_interior;
  if (with_pair) {
    auto opN = assemble_NF(M, random_pair(3, 2, 0.1, 11), C, g);
    CVec f2 = sample_scalar(opN, [&](const Vec& z) {
      CVec v(2);
      v[0] = detail::bump_at(z, cen, 0.25)[0];
      v[1] = cd(0.5, -0.3) * detail::bump_at(z, cen + make_vec({0.0, 0.15, 0.0}), 0.2)[0];
      return v;
    });
    auto rp = solve_local_scalar(opN, opN.apply(f2), f2, s, 0.25 * c);
    r.err_pair = rp.rel_error_interior;
    r.its_pair = rp.iterations;
  }
  r.seconds = sw.seconds();
  return r;
}

inline Check check_local_scalar(const LocalScalarResult& r) {
  Check c{7, "local scalar inversion", false, r.err_clean, 0.10};
  c.pass = r.err_clean <= 0.10 && r.its_clean <= 200 && r.err_pair <= 0.15 && r.seconds <= 900;
  c.detail = "W = I error " + detail::num(r.err_clean) + " in " + std::to_string(r.its_clean) +
             " iterations (<= 0.10), N = 2 pair error " + detail::num(r.err_pair) + " (<= 0.15), " +
             detail::num(r.seconds) + " s";
  c.seconds = r.seconds;
  return c;
}

inline Check check_stability(const LocalScalarResult& r) {
  double shift = std::abs(r.err_noisy - r.err_clean);
  Check c{13, "stability proxy", shift <= 0.05, shift, 0.05};
  c.detail = "clean " + detail::num(r.err_clean) + ", 1% noise " + detail::num(r.err_noisy) + ", shift " +
             detail::num(100 * shift) + " pp (<= 5)";
  return c;
}

// 8: pair-mode inversion modulo gauge on a 16³ collar grid
inline Check check_local_pair(int d = 16, int kernel_iters = 1000) {
  detail::Stopwatch sw;
  auto M = euclidean_ball(3);
  double c = 0.2;
  auto C = build_collar(M, make_vec({1.0, 0.0, 0.0}), c);
  Grid g = collar_grid(M, C, {d, d, d});
  Vec cen = make_vec({1 - 0.5 * c, 0.0, 0.0});
  auto pair = random_pair(3, 1, 0.1, 8);
  NFOptions o;
  o.mode = NFMode::Pair;
  auto op = assemble_NF(M, pair, C, g, o);
  auto G = build_gauge_operator(M, pair, op);
  auto bump = [cen](const Vec& z) { return detail::bump_at(z, cen, 0.25)[0].real(); };
  SectionPair s;
  s.N = 1;
  s.f = [bump](const Vec& z) { return CVec(CVec::Constant(1, bump(z))); };
  s.alpha = [bump](const Vec& z) {
    double b = bump(z);
    return std::vector<CVec>{CVec::Constant(1, 0.3 * b), CVec::Constant(1, cd(0, 0.5) * b), CVec::Constant(1, -0.2 * b)};
  };
  CVec st = sample_section(M, op, s);
  SolverSpec sp;
  auto rep = solve_local_pair(op, G, op.apply(st), st, sp, 0.25 * c);
  // kernel element d_{𝒜,F} p with p = ρ·bump, analytic derivatives of p
  CVec sk(op.size());
  double F = C.F;
  for (std::size_t i = 0; i < op.nodes.size(); ++i) {
    Vec z = g.point(op.nodes[i]);
    double x = op.xs[i];
    double rho = M.rho(z), b = bump(z);
    Vec drho = rho_gradient(M, z);
    Vec db = -(z - cen) / (0.25 * 0.25) * b;
    Vec dx = C.dx(z);
    auto A = pair.A_at(z);
    std::vector<CVec> a(3);
    for (int k = 0; k < 3; ++k)
      a[k] = CVec::Constant(1, drho[k] * b + rho * db[k] + A[k](0, 0) * rho * b - F * rho * b * dx[k] / (x * x));
    sk.segment(i * 4, 4) = to_frame_components(M, C, z, a, CVec(pair.Phi_at(z) * CVec::Constant(1, rho * b)), true);
  }
  SolverSpec kp;
  kp.max_iters = kernel_iters;
  kp.min_reduction = 1;
  auto kres = solve(as_linear_op(op), op.apply(sk), kp);
  auto kproj = gauge_project(G, kres.x);
  auto mask = interior_mask(op, 0.25 * c);
  double kern = masked_norm(kproj.s_sol, mask) / masked_norm(sk, mask);
  Check ch{8, "local pair inversion modulo gauge", rep.rel_error_interior <= 0.15 && kern <= 0.10,
           rep.rel_error_interior, 0.15};
  ch.seconds = sw.seconds();
  ch.detail = "gauge-projected error " + detail::num(rep.rel_error_interior) + " (<= 0.15), kernel element solenoidal residue " +
              detail::num(kern) + " after " + std::to_string(kres.iterations) + " iterations (<= 0.10), " +
              detail::num(ch.seconds) + " s";
  return ch;
}

// 9: four-layer radial sweep on the flat ball
inline Check check_layer_strip(int d = 18) {
  detail::Stopwatch sw;
  auto M = euclidean_ball(3);
  LayerSchedule sch;
  sch.levels = {1.0, 0.78, 0.56, 0.34, 0.12};
  StripOptions o;
  o.dims = {d, d, d};
  o.r_exclude = 0.1;
  auto f = [](const Vec& z) {
    CVec r(1);
    r[0] = std::exp(-(z - make_vec({0.3, 0.2, -0.1})).squaredNorm() / (2 * 0.3 * 0.3)) + 0.5 * z[2] * z[2];
    return r;
  };
  Check c{9, "layer stripping", false, 0, 0.15};
  try {
    auto rep = layer_strip(M, make_vec({0.0, 0.0, 0.0}), sch, f, o);
    double mm = 0;
    for (auto& l : rep.layers) mm = std::max(mm, l.overlap_mismatch);
    c.value = rep.rel_error_global;
    c.pass = rep.rel_error_global <= 0.15 && mm <= sch.glue_tol;
    c.detail = "global error outside r = 0.1: " + detail::num(rep.rel_error_global) + " (<= 0.15), max overlap mismatch " +
               detail::num(mm) + " (<= " + detail::num(sch.glue_tol) + ")";
  } catch (const Error& e) {
    c.detail = e.what();
  }
  c.seconds = sw.seconds();
  c.detail += ", " + detail::num(c.seconds) + " s";
  return c;
}

// 10: one pseudo-linearized connection step
inline Check check_connection_step(int d = 14) {
  detail::Stopwatch sw;
  auto M = euclidean_ball(3);
  auto C = build_collar(M, make_vec({1.0, 0.0, 0.0}), 0.2);
  Grid g = collar_grid(M, C, {d, d, d});
  NFOptions nf;
  nf.family = {5, 8, 0};
  double scale = 0.1;
  auto A = random_pair(3, 2, scale, 5);
  // δ: smooth, compactly supported inside the collar
  std::mt19937_64 rng(11);
  std::normal_distribution<double> G(0, 1);
  std::vector<CMat> Mk(4, CMat(2, 2));
  for (auto& m : Mk)
    for (int i = 0; i < 4; ++i) m.data()[i] = cd(G(rng), G(rng));
  Vec cen = make_vec({0.9, 0.0, 0.0});
  double R = 0.3;
  auto cut = [cen, R](const Vec& z) {
    double u = (z - cen).squaredNorm() / (R * R);
    return u < 1 ? std::pow(1 - u, 3) : 0.0;
  };
  ConnectionPair delta;
  delta.n = 3;
  delta.N = 2;
  delta.A = [=](const Vec& z) {
    double b = 0.05 * cut(z);
    return std::vector<CMat>{b * Mk[0], b * Mk[1], b * Mk[2]};
  };
  delta.Phi = [=](const Vec& z) { return CMat(0.05 * cut(z) * Mk[3]); };
  auto B = add_pairs(A, delta);
  auto fan = collar_fan(M, C, g, nf.family);
  SolverSpec sp;
  sp.min_reduction = 1;
  Check c{10, "connection recovery step", false, 0, 2};
  auto st = recover_connection_step(M, scattering_data(M, B, fan), A, C, g, nf, sp);
  double ratio = st.report.mismatch_before / st.report.mismatch_after;
  auto u = exp_gauge(M, detail::random_gauge_coeffs(3, 2, 12, 0.3));
  auto Bg = gauge_transform_pair(M, A, u);
  // raw difference in the interior, to show the gauge is not trivial there
  Vec zi = make_vec({0.85, 0.05, 0.0});
  double raw = 0;
  for (int k = 0; k < 3; ++k) raw += (Bg.A_at(zi)[k] - A.A_at(zi)[k]).norm();
  auto sg = recover_connection_step(M, scattering_data(M, Bg, fan), A, C, g, nf, sp);
  c.value = ratio;
  c.pass = ratio >= 2 && sg.report.solenoidal_norm <= 1e-3 * scale;
  c.seconds = sw.seconds();
  c.detail = "mismatch " + detail::num(st.report.mismatch_before) + " -> " + detail::num(st.report.mismatch_after) +
             " (ratio " + detail::num(ratio) + ", >= 2); gauge-equivalent B (interior |B - A| " + detail::num(raw) +
             "): solenoidal update " + detail::num(sg.report.solenoidal_norm) + " (<= " + detail::num(1e-3 * scale) +
             "), " + detail::num(c.seconds) + " s";
  return c;
}

// 11: Riccati branch flip, foliation ODE, convexity of the foliation-built function
inline Check check_convexity() {
  detail::Stopwatch sw;
  double worst_flip = 0;
  for (double kappa : {0.3, 1.0, 4.0}) {
    double R = 0.8, lo = 1e-6, hi = 10;
    for (int i = 0; i < 200; ++i) {
      double m = 0.5 * (lo + hi);
      (riccati_classify(kappa, m, R).verdict == Verdict::GlobalConvex ? hi : lo) = m;
    }
    worst_flip = std::max(worst_flip, std::abs(hi - std::sqrt(kappa) * std::tanh(std::sqrt(kappa) * R)));
  }
  auto M = euclidean_ball(3);
  auto F = foliation_from_levels(M, [](const Vec& x) { return x.norm(); }, 0.2, 1.0);
  double ode = F.ode_residual();
  auto s = sample_phase_points(M, 40, 4, 6, [](const Vec& x) { return x.norm() > 0.25 && x.norm() < 0.97; });
  double hmin = hessian_min_along_geodesics(M, F.as_field(), s).min_hessian;
  Check c{11, "convexity toolkit", worst_flip <= 1e-12 && ode <= 1e-8 && hmin > 0, worst_flip, 1e-12};
  c.detail = "flip error " + detail::num(worst_flip) + " (<= 1e-12), foliation ODE residual " + detail::num(ode) +
             " (<= 1e-8), annulus hessian_min " + detail::num(hmin) + " (> 0)";
  c.seconds = sw.seconds();
  return c;
}

inline double max_unitarity_defect(int n_hamiltonians = 5, std::uint64_t seed = 40) {
  auto M = euclidean_ball(3);
  double un = 0;
  for (int k = 0; k < n_hamiltonians; ++k) {
    auto H = random_hamiltonian(3, 3, 2.0, seed + k);
    Vec x = make_vec({-0.9, 0.2 * k / n_hamiltonians, 0.1});
    PhasePoint p{x, normalize_g(M, x, make_vec({1.0, -0.1, 0.05}))};
    un = std::max(un, quantum_evolve(M, H, trace_geodesic(M, p, Direction::Forward)).unitarity_defect);
  }
  return un;
}

// quantum evolution alone, for the property suite
inline Check check_unitarity(int n_hamiltonians = 5, std::uint64_t seed = 40) {
  detail::Stopwatch sw;
  double un = max_unitarity_defect(n_hamiltonians, seed);
  Check c{12, "unitarity", un <= 1e-8, un, 1e-8};
  c.detail = std::to_string(n_hamiltonians) + " Hermitian Hamiltonians, max |U*U - I| " + detail::num(un);
  c.seconds = sw.seconds();
  return c;
}

// 12: quantum unitarity, polarization sampler in dimension 5, frame independence
inline Check check_applications(int trials = 1000) {
  detail::Stopwatch sw;
  double un = max_unitarity_defect();
  auto sr = polarization_ellipticity_sampler(5, trials, 3);
  auto Mc = conformal_ball(3, Polynomial{{{0.2, {0, 2, 0}}, {0.1, {1, 0, 1}}}});
  TensorField f = [](const Vec& x) {
    CMat m(3, 3);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) m(i, j) = cd(std::sin(i + 2 * j + x[0]), 0.3 * std::cos(i - j + x[1]));
    return m;
  };
  Vec x0 = make_vec({-0.7, 0.1, 0.2});
  auto path = trace_geodesic(Mc, {x0, normalize_g(Mc, x0, make_vec({1.0, 0.3, -0.2}))}, Direction::Forward);
  auto a = polarization_evolve(Mc, f, path);
  Eigen::Matrix3d Qd = Eigen::AngleAxisd(0.7, Eigen::Vector3d(0.2, 1.0, -0.4).normalized()).toRotationMatrix();
  Mat Q = Qd;
  auto b = polarization_evolve(Mc, f, path, Mat(a.frames.front() * Q));
  CMat Qc = Q.cast<cd>();
  double fi = (b.U.back() - Qc.transpose() * a.U.back() * Qc).norm();
  Check c{12, "applications", un <= 1e-8 && sr.success_rate == 1.0 && fi <= 1e-8, un, 1e-8};
  c.detail = "unitarity " + detail::num(un) + " (<= 1e-8), dim-5 sampler success " + detail::num(sr.success_rate) + " over " +
             std::to_string(trials) + ", frame independence " + detail::num(fi) + " (<= 1e-8)";
  c.seconds = sw.seconds();
  return c;
}

}  // namespace geoxray
