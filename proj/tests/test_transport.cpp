#include <gtest/gtest.h>

#include "geoxray/transport.hpp"

using namespace geoxray;

static GeodesicPath segment(const ChartManifold& M, double L) {
  // chord of the unit ball along e1 starting at (-L/2, 0, 0)
  PhasePoint p{make_vec({-1.0, 0.0, 0.0}), make_vec({1.0, 0.0, 0.0})};
  auto g = trace_geodesic(M, p);
  EXPECT_NEAR(g.tau_plus, L, 1e-9);
  return g;
}

TEST(Transport, ZeroPairGivesIdentity) {
  auto M = euclidean_ball(3);
  auto U = fundamental_solution(M, zero_pair(3, 2), segment(M, 2.0));
  for (auto& u : U) EXPECT_EQ((u - CMat::Identity(2, 2)).norm(), 0.0);
}

TEST(Transport, ScalarConstantHiggs) {
  auto M = euclidean_ball(3);
  CMat c(1, 1);
  c(0, 0) = cd(0.7, -0.3);
  auto U = fundamental_solution(M, constant_pair(3, {}, c), segment(M, 2.0));
  EXPECT_NEAR(std::abs(U.back()(0, 0) - std::exp(-2.0 * c(0, 0))), 0.0, 1e-8);
}

TEST(Transport, NonCommutingConstantGenerator) {
  auto M = euclidean_ball(3);
  CMat A0(2, 2), A1(2, 2), P(2, 2);
  A0 << cd(0, 1), 2, 0, cd(-0.5, 0);
  A1 << 0.3, cd(0, 1), 1, 0;
  P << 1, 0.5, cd(0, -0.2), -1;
  CMat Z = CMat::Zero(2, 2);
  auto pair = constant_pair(3, {A0, A1, Z}, P);
  auto g = segment(M, 2.0);
  auto U = fundamental_solution(M, pair, g);
  CMat G = A0 + P;  // v = e1
  CMat ref = (-2.0 * G).exp();
  EXPECT_LE((U.back() - ref).norm(), 1e-7);
}

TEST(Transport, CocycleProperty) {
  auto M = euclidean_ball(3);
  auto pair = random_pair(3, 2, 1.5, 4);
  auto fan = boundary_fan(M, {2, 2, 5, {}});
  for (auto& p : fan) {
    auto g = trace_geodesic(M, p);
    auto U = fundamental_solution(M, pair, g);
    std::size_t k1 = g.samples.size() / 3;
    GeodesicPath tail = g;
    tail.samples.assign(g.samples.begin() + k1, g.samples.end());
    auto V = fundamental_solution(M, pair, tail);
    EXPECT_LE((U.back() * U[k1].inverse() - V.back()).norm(), 1e-7);
  }
}

TEST(Transport, ScatteringDataIdentities) {
  auto M = euclidean_ball(3);
  auto fan = boundary_fan(M, {10, 5, 3, {}});
  auto z = scattering_data(M, zero_pair(3, 2), fan);
  for (auto& c : z.C) EXPECT_LE((c - CMat::Identity(2, 2)).norm(), 1e-10);
  CMat c(1, 1);
  c(0, 0) = 0.8;
  auto s = scattering_data(M, constant_pair(3, {}, c), fan);
  for (std::size_t i = 0; i < fan.size(); ++i)
    EXPECT_NEAR(std::abs(s.C[i](0, 0) - std::exp(2.0 * 0.8 * fan[i].x.dot(fan[i].v))), 0.0, 1e-8);
  auto u = scattering_data(M, random_pair(3, 3, 2.0, 8, true), fan);
  for (auto& C : u.C) EXPECT_LE((C.adjoint() * C - CMat::Identity(3, 3)).norm(), 1e-7);
}

TEST(Transport, AttenuationWeightInvertsForwardSolve) {
  auto M = euclidean_ball(3);
  auto pair = random_pair(3, 2, 1.0, 11);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> G(0, 1);
  for (int k = 0; k < 10; ++k) {
    Vec x = make_vec({G(rng), G(rng), G(rng)});
    x *= 0.8 * std::abs(std::tanh(G(rng))) / x.norm();
    Vec v = make_vec({G(rng), G(rng), G(rng)}).normalized();
    CMat W = attenuation_weight(M, pair, {x, v});
    auto back = trace_geodesic(M, {x, v}, Direction::Backward);
    // independent forward solve from the entry point on a grid that lands on x
    ChartManifold M2 = M;
    M2.h_step = back.tau_minus / std::ceil(back.tau_minus / M.step());
    auto fwd = trace_geodesic(M2, back.entry_point);
    std::size_t j = 0;
    while (j + 1 < fwd.samples.size() && fwd.samples[j + 1].t <= back.tau_minus + 1e-9) ++j;
    GeodesicPath part = fwd;
    part.samples.resize(j + 1);
    auto Up = fundamental_solution(M2, pair, part);
    EXPECT_LT((fwd.samples[j].x - x).norm(), 1e-9);
    EXPECT_LE((W * Up.back() - CMat::Identity(2, 2)).norm(), 1e-8);
  }
  auto fan = boundary_fan(M, {2, 2, 1, {}});
  EXPECT_LE((attenuation_weight(M, pair, fan[0]) - CMat::Identity(2, 2)).norm(), 1e-14);
  EXPECT_LE((attenuation_weight(M, zero_pair(3, 2), {make_vec({0.1, 0, 0}), make_vec({0, 1, 0})}) -
             CMat::Identity(2, 2)).norm(), 0.0);
}

TEST(Transport, UnitaryWeightsStayUnitary) {
  auto M = euclidean_ball(3);
  auto pair = random_pair(3, 2, 2.0, 12, true);
  auto g = trace_geodesic(M, boundary_fan(M, {1, 1, 9, {}})[0]);
  for (auto& W : weights_along(M, pair, g)) EXPECT_LE((W.adjoint() * W - CMat::Identity(2, 2)).norm(), 1e-7);
}

static std::vector<CMat> gauge_coeffs(int n, int N, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> G(0, 0.5);
  std::vector<CMat> c(n + 1, CMat(N, N));
  for (auto& m : c)
    for (int i = 0; i < N; ++i)
      for (int j = 0; j < N; ++j) m(i, j) = cd(G(rng), G(rng));
  return c;
}

TEST(Transport, GaugeIdentityLeavesPair) {
  auto M = euclidean_ball(3);
  auto pair = random_pair(3, 2, 1.0, 2);
  GaugeTransform id;
  id.u = [](const Vec&) { return CMat(CMat::Identity(2, 2)); };
  auto q = gauge_transform_pair(M, pair, id);
  Vec x = make_vec({0.1, 0.2, 0.3});
  auto a = pair.A_at(x), b = q.A_at(x);
  for (int k = 0; k < 3; ++k) EXPECT_LE((a[k] - b[k]).norm(), 1e-12);
  EXPECT_LE((pair.Phi_at(x) - q.Phi_at(x)).norm(), 1e-12);
}

TEST(Transport, GaugeOfZeroPairIsMaurerCartan) {
  auto M = euclidean_ball(3);
  auto g = exp_gauge(M, gauge_coeffs(3, 2, 3));
  auto q = gauge_transform_pair(M, zero_pair(3, 2), g);
  Vec x = make_vec({0.1, -0.2, 0.3});
  auto B = q.A_at(x), du = g.du(x);
  CMat ui = g.u(x).inverse();
  for (int k = 0; k < 3; ++k) EXPECT_LE((B[k] - ui * du[k]).norm(), 1e-12);
  EXPECT_EQ(q.Phi_at(x).norm(), 0.0);
  // analytic derivative vs differences
  auto gfd = g;
  gfd.du = nullptr;
  auto qfd = gauge_transform_pair(M, zero_pair(3, 2), gfd);
  auto Bfd = qfd.A_at(x);
  for (int k = 0; k < 3; ++k) EXPECT_LE((B[k] - Bfd[k]).norm(), 1e-6);
}

TEST(Transport, GaugeRoundTrip) {
  auto M = euclidean_ball(3);
  auto pair = random_pair(3, 2, 1.0, 5);
  auto g = exp_gauge(M, gauge_coeffs(3, 2, 6), false);
  GaugeTransform gi;
  gi.u = [g](const Vec& x) { return CMat(g.u(x).inverse()); };
  auto back = gauge_transform_pair(M, gauge_transform_pair(M, pair, g), gi);
  Vec x = make_vec({0.3, 0.1, -0.4});
  auto a = pair.A_at(x), b = back.A_at(x);
  for (int k = 0; k < 3; ++k) EXPECT_LE((a[k] - b[k]).norm(), 1e-6);
  EXPECT_LE((pair.Phi_at(x) - back.Phi_at(x)).norm(), 1e-6);
}

TEST(Transport, ScatteringDataIsGaugeInvariant) {
  auto M = euclidean_ball(3);
  auto fan = boundary_fan(M, {5, 4, 13, {}});
  auto pair = random_pair(3, 2, 1.0, 7);
  auto C = scattering_data(M, pair, fan);
  auto g = exp_gauge(M, gauge_coeffs(3, 2, 8));
  auto Ca = scattering_data(M, gauge_transform_pair(M, pair, g), fan);
  g.du = nullptr;
  auto Cf = scattering_data(M, gauge_transform_pair(M, pair, g), fan);
  for (std::size_t i = 0; i < fan.size(); ++i) {
    EXPECT_LE((C.C[i] - Ca.C[i]).norm(), 1e-7);
    EXPECT_LE((C.C[i] - Cf.C[i]).norm(), 1e-5);
  }
}

TEST(Transport, DPairApply) {
  auto M = euclidean_ball(3);
  auto s0 = d_pair_apply(M, random_pair(3, 2, 1.0, 1), [](const Vec&) { return CVec(CVec::Zero(2)); });
  Vec x = make_vec({0.2, 0.1, 0.0}), v = make_vec({0, 0, 1});
  EXPECT_EQ(s0.value(x, v).norm(), 0.0);
  CVec w(2);
  w << cd(1, 2), cd(-0.5, 0);
  auto s = d_pair_apply(M, zero_pair(3, 2), [&](const Vec& y) { return CVec(M.rho(y) * w); });
  auto a = s.alpha(x);
  Vec dr = rho_gradient(M, x);
  for (int k = 0; k < 3; ++k) EXPECT_LE((a[k] - dr[k] * w).norm(), 1e-6);
  EXPECT_EQ(s.f(x).norm(), 0.0);
}

TEST(Transport, PseudoLinearizationScalarAndEqual) {
  auto M = euclidean_ball(3);
  auto g = segment(M, 2.0);
  auto A = random_pair(3, 2, 1.0, 9);
  EXPECT_LE(pseudo_linearization_residual(M, A, A, g), 1e-10);
  CMat a(1, 1), b(1, 1);
  a(0, 0) = 0.4;
  b(0, 0) = -0.9;
  EXPECT_LE(pseudo_linearization_residual(M, constant_pair(3, {}, a), constant_pair(3, {}, b), g), 1e-8);
}

TEST(Transport, PseudoLinearizationRichardson) {
  auto M = euclidean_ball(3);
  auto A = random_pair(3, 2, 8.0, 21, true), B = random_pair(3, 2, 8.0, 22, true);
  PhasePoint p{make_vec({-1.0, 0.0, 0.0}), make_vec({1.0, 0.0, 0.0})};
  double r1 = pseudo_linearization_residual(M, A, B, trace_geodesic(M, p));
  ChartManifold M2 = M;
  M2.h_step = 0.5 * M.step();
  double r2 = pseudo_linearization_residual(M2, A, B, trace_geodesic(M2, p));
  EXPECT_LE(r1, 1e-7);
  EXPECT_NEAR(r1 / r2, 16.0, 16.0 * 0.3);
}

TEST(Transport, HattedPairCases) {
  auto z = hatted_pair(zero_pair(3, 2), zero_pair(3, 2));
  EXPECT_TRUE(z.is_zero());
  CMat I = CMat::Identity(2, 2), Z = CMat::Zero(2, 2);
  auto A = constant_pair(3, {cd(0.3) * I, Z, Z}, cd(0.1, 1) * I);
  auto B = constant_pair(3, {cd(-0.2) * I, Z, Z}, cd(0.4) * I);
  auto h = hatted_pair(A, B);
  Vec x = make_vec({0, 0, 0}), v = make_vec({1, 0, 0});
  cd ab = (0.3 + cd(0.1, 1)) - (-0.2 + 0.4);
  EXPECT_LE((h.generator(x, v) - ab * CMat::Identity(4, 4)).norm(), 1e-14);
}

TEST(Transport, HattedTransportConjugates) {
  auto M = euclidean_ball(3);
  auto A = random_pair(3, 2, 1.5, 31), B = random_pair(3, 2, 1.5, 32);
  auto h = hatted_pair(A, B);
  auto g = trace_geodesic(M, boundary_fan(M, {1, 1, 4, {}})[0]);
  auto UA = fundamental_solution(M, A, g), UB = fundamental_solution(M, B, g), Uh = fundamental_solution(M, h, g);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> G(0, 1);
  CMat X(2, 2);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) X(i, j) = cd(G(rng), G(rng));
  CMat ref = UA.back() * X * UB.back().inverse();
  EXPECT_LE((unvec(Uh.back() * vec(X), 2) - ref).norm(), 1e-7 * ref.norm());
  // reversed orientation: hatted(B, A) transports X to U_B X U_A^{-1}
  auto Uh2 = fundamental_solution(M, hatted_pair(B, A), g);
  CMat ref2 = UB.back() * X * UA.back().inverse();
  EXPECT_LE((unvec(Uh2.back() * vec(X), 2) - ref2).norm(), 1e-7 * ref2.norm());
  CMat inv = unvec(Uh.back().inverse() * vec(X), 2);
  EXPECT_LE((inv - UA.back().inverse() * X * UB.back()).norm(), 1e-7 * inv.norm());
}

TEST(Transport, StepTooLargeIsReported) {
  auto M = euclidean_ball(3);
  M.h_step = 0.2;
  auto A = random_pair(3, 2, 60.0, 3);
  PhasePoint p{make_vec({-1.0, 0.0, 0.0}), make_vec({1.0, 0.0, 0.0})};
  EXPECT_THROW(fundamental_solution(M, A, trace_geodesic(M, p)), Error);
}
