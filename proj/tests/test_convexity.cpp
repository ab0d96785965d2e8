#include <gtest/gtest.h>

#include "geoxray/convexity.hpp"

using namespace geoxray;

TEST(Convexity, QuadraticHasUnitHessian) {
  auto M = euclidean_ball(3);
  auto s = sample_phase_points(M, 40, 4, 1);
  auto r = hessian_min_along_geodesics(M, [](const Vec& x) { return 0.5 * x.squaredNorm(); }, s);
  EXPECT_NEAR(r.min_hessian, 1.0, 1e-4);
  EXPECT_EQ(r.n_samples, 160);
}

TEST(Convexity, LinearHasZeroHessian) {
  auto M = euclidean_ball(3);
  auto s = sample_phase_points(M, 20, 4, 2);
  auto r = hessian_min_along_geodesics(M, [](const Vec& x) { return x[0]; }, s);
  EXPECT_NEAR(r.min_hessian, 0.0, 1e-6);
}

TEST(Convexity, HessianIsSuperadditive) {
  auto M = euclidean_ball(3);
  auto s = sample_phase_points(M, 20, 4, 9);
  ScalarField f = [](const Vec& x) { return 0.5 * x.squaredNorm(); };
  ScalarField g = [](const Vec& x) { return x[0] * x[0] + 0.3 * x[1]; };
  double a = 0.7, b = 1.3;
  auto rf = hessian_min_along_geodesics(M, f, s), rg = hessian_min_along_geodesics(M, g, s);
  auto rs = hessian_min_along_geodesics(M, [&](const Vec& x) { return a * f(x) + b * g(x); }, s);
  EXPECT_GE(rs.min_hessian, a * rf.min_hessian + b * rg.min_hessian - 1e-6);
}

// Jacobi equation J'' + K J = 0 on the unit sphere, K = 1; Hess(½r²) = dr² + r J'/J (g − dr²).
static double jacobi_ratio(double r) {
  double J = 0, Jp = 1, h = r / 2000;
  for (int i = 0; i < 2000; ++i) {
    double k1 = Jp, l1 = -J;
    double k2 = Jp + 0.5 * h * l1, l2 = -(J + 0.5 * h * k1);
    double k3 = Jp + 0.5 * h * l2, l3 = -(J + 0.5 * h * k2);
    double k4 = Jp + h * l3, l4 = -(J + h * k3);
    J += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
    Jp += h / 6 * (l1 + 2 * l2 + 2 * l3 + l4);
  }
  return r * Jp / J;
}

TEST(Convexity, SphereCapDistanceSquaredMatchesJacobiFields) {
  auto M = sphere_cap(2, 0.6);
  ScalarField f = [](const Vec& x) {
    double r = 2.0 * std::atan(x.norm());
    return 0.5 * r * r;
  };
  auto s = sample_phase_points(M, 30, 4, 4, [](const Vec& x) { return x.norm() > 0.05 && x.norm() < 0.5; });
  auto rep = hessian_min_along_geodesics(M, f, s);
  double ref = 1e9;
  for (auto& p : s) {
    double r = 2.0 * std::atan(p.x.norm());
    Mat g = metric_at(M, p.x);
    Vec grad_r = p.x / p.x.norm();  // direction of ∇r
    double c = p.v.dot(g * grad_r) / std::sqrt(grad_r.dot(g * grad_r));
    double v = c * c + jacobi_ratio(r) * (1 - c * c);
    EXPECT_NEAR(hessian_along(M, f, p), v, 1e-3);
    ref = std::min(ref, v);
  }
  EXPECT_GT(rep.min_hessian, 0.0);
  EXPECT_NEAR(rep.min_hessian, ref, 1e-3);
}

TEST(Convexity, RiccatiTable) {
  auto a = riccati_classify(1, 2, 1);
  EXPECT_EQ(a.verdict, Verdict::GlobalConvex);
  EXPECT_EQ(a.branch, "coth");
  EXPECT_NEAR(a.threshold, std::tanh(1.0), 1e-15);
  EXPECT_NEAR(a.blow_up_time, 0.5493061443340549, 1e-12);
  auto b = riccati_classify(1, 0.5, 1);
  EXPECT_EQ(b.verdict, Verdict::CollarOnly);
  EXPECT_EQ(b.branch, "tanh");
  EXPECT_NEAR(b.collar_depth, 0.5493061443340549, 1e-12);
  auto c = riccati_classify(0, 0.01, 5);
  EXPECT_EQ(c.verdict, Verdict::GlobalConvex);
  EXPECT_EQ(c.threshold, 0.0);
  EXPECT_EQ(riccati_classify(1, 1, 1).branch, "constant");
}

TEST(Convexity, RiccatiFlipByBisection) {
  for (double kappa : {0.3, 1.0, 4.0}) {
    double R = 0.8, lo = 1e-6, hi = 10;
    for (int i = 0; i < 200; ++i) {
      double m = 0.5 * (lo + hi);
      (riccati_classify(kappa, m, R).verdict == Verdict::GlobalConvex ? hi : lo) = m;
    }
    EXPECT_NEAR(hi, std::sqrt(kappa) * std::tanh(std::sqrt(kappa) * R), 1e-12);
  }
}

TEST(Convexity, CollarFunctionValues) {
  auto f = collar_convex_function([](const Vec& x) { return 1.0 - x.norm(); }, 1.0);
  EXPECT_DOUBLE_EQ(f(make_vec({0, 0, 0})), -0.75);
  EXPECT_DOUBLE_EQ(f(make_vec({1, 0, 0})), 0.0);
  for (double r = 0; r < 1.99; r += 0.1) {
    auto g = collar_convex_function([r](const Vec&) { return r; }, 1.0);
    auto g2 = collar_convex_function([r](const Vec&) { return r + 0.01; }, 1.0);
    EXPECT_LT(g2(make_vec({0})), g(make_vec({0})));
  }
  auto M = euclidean_ball(3);
  auto s = sample_phase_points(M, 30, 4, 8, [](const Vec& x) { return x.norm() > 0.3; });
  EXPECT_GT(hessian_min_along_geodesics(M, f, s).min_hessian, 0.0);
}

TEST(Convexity, FoliationClosedFormWithConstantCoefficient) {
  auto M = euclidean_ball(3);
  double c0 = 0.7;
  FoliationOptions opt;
  opt.c_tilde_override = [c0](double) { return c0; };
  auto F = foliation_from_levels(M, [](const Vec& x) { return x.norm(); }, 0.2, 1.0, 0.1, opt);
  for (std::size_t i = 0; i < F.t.size(); i += 97)
    EXPECT_NEAR(F.h[i], (1 - std::exp(-c0 * (F.t[i] - 1.0))) / c0, 1e-8);
  EXPECT_LE(F.ode_residual(), 1e-8);
}

TEST(Convexity, FoliationOnAnnulusIsConvex) {
  auto M = euclidean_ball(3);
  auto F = foliation_from_levels(M, [](const Vec& x) { return x.norm(); }, 0.2, 1.0);
  EXPECT_LE(F.ode_residual(), 1e-8);
  for (double c : F.level_c) EXPECT_NEAR(c, 0.0, 1e-5);
  for (double h : F.hp) EXPECT_GT(h, 0.0);
  auto s = sample_phase_points(M, 40, 4, 6, [](const Vec& x) { return x.norm() > 0.25 && x.norm() < 0.97; });
  EXPECT_GT(hessian_min_along_geodesics(M, F.as_field(), s).min_hessian, 0.0);
  Vec a = make_vec({0.5, 0, 0}), b = make_vec({0, 0.3, 0.4});
  EXPECT_EQ(F(a), F(b));
}

TEST(Convexity, FlatLevelsRejected) {
  auto M = euclidean_ball(3);
  try {
    foliation_from_levels(M, [](const Vec& x) { return x[0]; }, -0.5, 0.5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NotStrictlyConvexLevels);
  }
}

TEST(Convexity, ExhaustionOnBall) {
  auto M = euclidean_ball(3);
  auto r = exhaustion_check(M, [](const Vec& x) { return 0.5 * x.squaredNorm(); }, [](const Vec&) { return true; });
  EXPECT_TRUE(r.critical_point_found);
  EXPECT_LT(r.critical_point.norm(), 1e-3);
  EXPECT_TRUE(r.max_on_boundary_only);
  EXPECT_TRUE(r.violations.empty());
  auto r2 = exhaustion_check(M, [](const Vec& x) { return x[0]; }, [](const Vec&) { return true; });
  EXPECT_TRUE(r2.max_on_boundary_only);
  EXPECT_FALSE(r2.critical_point_found);
}

TEST(Convexity, CollarHasNoCriticalPoints) {
  auto M = euclidean_ball(3);
  auto f = collar_convex_function([](const Vec& x) { return 1.0 - x.norm(); }, 1.0);
  auto r = exhaustion_check(M, f, [](const Vec& x) { return x.norm() > 0.8; });
  EXPECT_FALSE(r.critical_point_found);
  EXPECT_GT(r.min_grad, 0.1);
  EXPECT_TRUE(r.violations.empty());
}

TEST(Convexity, EscapeFlatBall) {
  auto M = euclidean_ball(3);
  ScalarField f = [](const Vec& x) { return 0.5 * x.squaredNorm(); };
  std::vector<PhasePoint> st{{make_vec({0.3, 0, 0}), make_vec({1, 0, 0})}, {make_vec({0.3, 0, 0}), make_vec({0, 1, 0})}};
  auto r = escape_check(M, f, st);
  EXPECT_EQ(r.n_traced, 2);
  EXPECT_EQ(r.n_violations, 0);
}

TEST(Convexity, EscapeConformalBruteForce) {
  Polynomial phi;
  phi.terms = {{0.1, {2, 0, 0}}, {0.05, {0, 2, 0}}, {0.05, {0, 0, 1}}};
  auto M = conformal_ball(3, phi);
  M.h_step = 5e-3;
  ScalarField f = [](const Vec& x) { return 0.5 * x.squaredNorm(); };
  auto s = sample_phase_points(M, 1000, 1, 12);
  auto r = escape_check(M, f, s, 1e-7);
  EXPECT_GT(r.n_traced, 300);
  EXPECT_EQ(r.n_violations, 0);
}
