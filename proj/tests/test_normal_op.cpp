#include <gtest/gtest.h>

#include "geoxray/normal_op.hpp"

using namespace geoxray;

namespace {

struct Fixture {
  ChartManifold M = euclidean_ball(3);
  CollarSpec C;
  Grid g;
  Fixture(int d = 8, double c = 0.2) {
    CollarOptions o;
    o.eps_init = 0.2;
    C = build_collar(M, make_vec({1.0, 0.0, 0.0}), c, o);
    g = collar_grid(M, C, {d, d, d});
  }
};

FamilySpec small_family() { return {5, 8, 0}; }

}  // namespace

TEST(NormalOp, ZeroInputZeroOutput) {
  Fixture S;
  NFOptions o;
  o.family = small_family();
  auto op = assemble_NF(S.M, zero_pair(3, 1), S.C, S.g, o);
  ASSERT_GT(op.size(), 0u);
  EXPECT_EQ(op.apply(CVec(CVec::Zero(op.size()))).norm(), 0.0);
  EXPECT_EQ(op.trapped, 0u);
}

TEST(NormalOp, PositiveKernelForUnitWeight) {
  Fixture S;
  NFOptions o;
  o.family = small_family();
  auto op = assemble_NF(S.M, zero_pair(3, 1), S.C, S.g, o);
  EXPECT_GE(op.A.real().minCoeff(), 0.0);
  EXPECT_EQ(op.A.imag().cwiseAbs().maxCoeff(), 0.0);
  CVec f = sample_scalar(op, [](const Vec& z) { CVec r(1); r[0] = 1 + z[1] * z[1]; return r; });
  CVec y = op.apply(f);
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    EXPECT_GE(y[i].real(), 0.0);
    EXPECT_TRUE(std::isfinite(y[i].real()));
  }
  EXPECT_LT(op.max_exponent, 700);
}

TEST(NormalOp, ExponentStaysBoundedNearArtificialBoundary) {
  Fixture S(10);
  NFOptions o;
  o.family = small_family();
  S.C.F = 4.0;
  auto op = assemble_NF(S.M, zero_pair(3, 1), S.C, S.g, o);
  EXPECT_TRUE(op.A.allFinite());
  // sup of F(1/x' − 1/x) along keys stays O(s²/α), not O(F/x_floor)
  EXPECT_LT(op.max_exponent, 20.0);
}

TEST(NormalOp, PairBlockN00MatchesScalarInPlainForm) {
  Fixture S;
  NFOptions os, op2;
  os.family = op2.family = small_family();
  os.conjugated = op2.conjugated = false;
  op2.mode = NFMode::Pair;
  auto Ns = assemble_NF(S.M, zero_pair(3, 1), S.C, S.g, os);
  auto Np = assemble_NF(S.M, zero_pair(3, 1), S.C, S.g, op2);
  ASSERT_EQ(Np.nodes, Ns.nodes);
  std::size_t m = Ns.nodes.size();
  CVec f(m), fp = CVec::Zero(Np.size());
  for (std::size_t i = 0; i < m; ++i) {
    Vec z = S.g.point(Ns.nodes[i]);
    f[i] = cd(std::cos(z[1]), z[2]);
    fp[i * 4 + 3] = f[i];
  }
  CVec ys = Ns.apply(f);
  CVec yp = Np.apply(fp);
  double err = 0, ref = 0;
  for (std::size_t i = 0; i < m; ++i) {
    err = std::max(err, std::abs(yp[i * 4 + 3] - Ns.xs[i] * ys[i]));
    ref = std::max(ref, std::abs(yp[i * 4 + 3]));
  }
  EXPECT_LE(err, 1e-10 * ref);
}

TEST(NormalOp, GhostNodesCarryNoRows) {
  Fixture S;
  NFOptions o;
  o.family = small_family();
  o.conjugated = false;
  o.ghost_cells = 1;
  auto op = assemble_NF(S.M, zero_pair(3, 1), S.C, S.g, o);
  std::size_t nghost = 0;
  for (std::size_t i = 0; i < op.nodes.size(); ++i)
    if (op.ghost[i]) {
      ++nghost;
      EXPECT_EQ(op.A.row(i).norm(), 0.0);
    }
  EXPECT_GT(nghost, 0u);
  o.conjugated = true;
  EXPECT_THROW(assemble_NF(S.M, zero_pair(3, 1), S.C, S.g, o), Error);
}

TEST(NormalOp, WeightedAdjointProbe) {
  Fixture S;
  NFOptions o;
  o.family = small_family();
  auto op = assemble_NF(S.M, zero_pair(3, 1), S.C, S.g, o);
  // N = x^{-1} e^{-F/x} L e^{F/x}: symmetric form under the weight x e^{2F/x}
  auto bump = [&](const Vec& c) {
    return [c](const Vec& z) {
      CVec r(1);
      r[0] = std::exp(-20 * (z - c).squaredNorm());
      return r;
    };
  };
  CVec f = sample_scalar(op, bump(make_vec({0.85, 0.1, 0.0})));
  CVec h = sample_scalar(op, bump(make_vec({0.85, -0.1, 0.1})));
  CVec w(op.size());
  for (std::size_t i = 0; i < op.nodes.size(); ++i) w[i] = op.xs[i] * std::exp(2 * S.C.F / op.xs[i]);
  cd a = (w.array() * op.apply(f).array() * h.conjugate().array()).sum();
  cd b = (w.array() * f.array() * op.apply(h).conjugate().array()).sum();
  RecordProperty("adjoint_mismatch", std::to_string(std::abs(a - b) / std::abs(a)));
  EXPECT_LE(std::abs(a - b), 0.05 * std::abs(a));
}

TEST(NormalOp, UnitaryPairWeightsAreCarried) {
  Fixture S;
  NFOptions o;
  o.family = small_family();
  auto pair = random_pair(3, 2, 0.3, 9);
  auto op = assemble_NF(S.M, pair, S.C, S.g, o);
  EXPECT_EQ(op.size(), 2 * op.nodes.size());
  EXPECT_TRUE(op.A.allFinite());
  CVec f = CVec::Random(op.size());
  CVec g = CVec::Random(op.size());
  // adjoint application consistent with the dense matrix
  EXPECT_NEAR(std::abs(g.dot(op.apply(f)) - op.apply_adjoint(g).dot(f)), 0.0, 1e-9 * op.A.norm());
}

// ---- kernel and symbols ------------------------------------------------------------------

TEST(BoundaryKernel, OutsideSupportVanishes) {
  auto b = flat_model(3);
  // S = (X − α|Y|²)/|Y| far outside 3σ
  EXPECT_EQ(boundary_kernel(b, make_vec({5.0, 0.1, 0.0}), NFMode::Scalar).norm(), 0.0);
}

TEST(BoundaryKernel, ScalarFormulaAndPairBlock) {
  auto b = flat_model(3, 1.3, 0.4);
  Vec XY = make_vec({0.3, 0.2, -0.4});
  double r = std::hypot(0.2, 0.4);
  double S = (0.3 - 0.4 * r * r) / r;
  double ref = std::exp(-1.3 * 0.3) / (r * r) * b.chi(S);
  CMat K = boundary_kernel(b, XY, NFMode::Scalar);
  EXPECT_NEAR(K(0, 0).real(), ref, 1e-14);
  CMat P = boundary_kernel(b, XY, NFMode::Pair);
  EXPECT_NEAR(std::abs(P(3, 3) - K(0, 0)), 0.0, 1e-15);
  EXPECT_NEAR(P(0, 3).real(), S * ref, 1e-14);
  EXPECT_NEAR(P(3, 0).real(), (S + 2 * 0.4 * r) * ref, 1e-14);
}

TEST(BoundaryKernel, HermitianForHermitianWeightProduct) {
  auto b = flat_model(3, 1.0, 0.5, 2);
  CMat W(2, 2);
  W << cd(1, 0.2), cd(0.3, -0.1), cd(0, 0.4), cd(0.9, 0);
  b.W = [W](const Vec&) { return W; };
  CMat K = boundary_kernel(b, make_vec({0.2, 0.3, 0.1}), NFMode::Scalar);
  EXPECT_NEAR((K - K.adjoint()).norm(), 0.0, 1e-15);
}

TEST(Symbol, FiberInfinityPositiveAndHomogeneous) {
  auto b = flat_model(3);
  SymbolQuery q{1.5, make_vec({2.0, -0.7}), NFMode::Scalar};
  double s1 = symbol_fiber_infinity(b, q)(0, 0).real();
  EXPECT_GT(s1, 0.0);
  SymbolQuery q2{3.0, make_vec({4.0, -1.4}), NFMode::Scalar};
  EXPECT_NEAR(symbol_fiber_infinity(b, q2)(0, 0).real(), 0.5 * s1, 1e-12);
  // η = 0: S̃ = 0 on the whole sphere, value χ(0)·2π/|ξ|
  SymbolQuery q3{2.0, make_vec({0.0, 0.0}), NFMode::Scalar};
  EXPECT_NEAR(symbol_fiber_infinity(b, q3)(0, 0).real(), 2 * M_PI / 2.0, 1e-10);
  // ξ = 0 branch
  SymbolQuery q4{0.0, make_vec({0.0, 3.0}), NFMode::Scalar};
  EXPECT_GT(symbol_fiber_infinity(b, q4)(0, 0).real(), 0.0);
}

TEST(Symbol, BoundaryAtOriginAndGaussianClosedForm) {
  double F = 1.0, al = 0.5;
  auto b = flat_model(3, F, al);
  SymbolQuery q{0.0, make_vec({0.0, 0.0}), NFMode::Scalar};
  EXPECT_NEAR(symbol_boundary(b, q)(0, 0).real(), 2 * M_PI / F, 1e-12);
  for (double xi : {0.0, 1.0, -3.0})
    for (double e : {0.5, 2.0, 7.0}) {
      SymbolQuery qq{xi, make_vec({e, 0.0}), NFMode::Scalar};
      double br2 = xi * xi + F * F;
      double bb = F * e * e / (2 * al * br2);
      double ref = 2 * M_PI * std::exp(-bb / 2) * std::cyl_bessel_i(0.0, bb / 2) / std::sqrt(br2);
      EXPECT_NEAR(symbol_boundary(b, qq)(0, 0).real(), ref, 1e-6);
    }
}

TEST(Symbol, BoundaryLargeEtaLimit) {
  double F = 1.0, al = 0.5;
  auto b = flat_model(3, F, al);
  SymbolOptions o;
  o.n_dirs = 20000;
  double lim = 2 * std::sqrt(2 * M_PI * al / F);
  SymbolQuery q{0.5, make_vec({0.0, 400.0}), NFMode::Scalar};
  EXPECT_NEAR(symbol_boundary(b, q, o)(0, 0).real() * 400.0, lim, 1e-3 * lim);
}

TEST(Symbol, PairModeRestrictedPositiveUnrestrictedSingular) {
  auto b = flat_model(3);
  for (double xi : {-2.0, 0.0, 3.0}) {
    SymbolQuery q{xi, make_vec({1.5, -0.5}), NFMode::Pair};
    CMat H = symbol_boundary(b, q);
    EXPECT_NEAR((H - H.adjoint()).norm(), 0.0, 1e-12);
    EXPECT_LE(min_eig(H), 1e-12 * H.norm());
    CMat K = gauge_kernel_basis(3, 1, cd(xi, -1.0), q.eta);
    EXPECT_GT(min_eig(K.adjoint() * H * K), 1e-3);
    // the gauge direction (ξ + iF, η, 0) is annihilated
    CVec v(4);
    v << cd(xi, 1.0), 1.5, -0.5, 0.0;
    EXPECT_NEAR((H * v).norm(), 0.0, 1e-10 * H.norm());
  }
}

TEST(Symbol, SmallScalarScan) {
  auto b = flat_model(3);
  ScanSpec s;
  s.n_xi = 9;
  s.n_eta = 4;
  s.n_eta_dirs = 8;
  s.sym.n_dirs = 720;
  auto r = ellipticity_scan(b, NFMode::Scalar, s);
  EXPECT_GT(r.c_min, 0.0);
  s.boundary = false;
  auto r2 = ellipticity_scan(b, NFMode::Scalar, s);
  EXPECT_GT(r2.c_min, 0.0);
}

TEST(Symbol, CollarModelMatchesFlatMargin) {
  auto M = euclidean_ball(3);
  CollarOptions o;
  o.eps_init = 0.1;
  auto C = build_collar(M, make_vec({1.0, 0.0, 0.0}), 0.1, o);
  auto b = collar_model(M, C, zero_pair(3, 1));
  Vec z0 = artificial_boundary_point(M, C);
  EXPECT_NEAR(C.x(z0), 0.0, 1e-12);
  // straight line tangent to the sphere |z| = r0: (x∘γ)'' = 1/r0 − 2ε
  double a = b.alpha(make_vec({1.0, 0.0}));
  EXPECT_NEAR(a, 0.5 / z0.norm() - 0.1, 1e-5);
}
