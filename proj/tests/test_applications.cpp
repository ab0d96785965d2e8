#include <gtest/gtest.h>

#include <unsupported/Eigen/MatrixFunctions>

#include "geoxray/applications.hpp"

using namespace geoxray;

namespace {

GeodesicPath chord(const ChartManifold& M, Vec x, Vec v) {
  return trace_geodesic(M, {x, normalize_g(M, x, v)}, Direction::Forward);
}

}  // namespace

TEST(Quantum, ZeroHamiltonianIsIdentity) {
  auto M = euclidean_ball(3);
  Hamiltonian H;
  H.N = 2;
  auto ev = quantum_evolve(M, H, chord(M, make_vec({-0.9, 0.1, 0.0}), make_vec({1.0, 0.0, 0.0})));
  for (auto& u : ev.U) EXPECT_EQ((u - CMat::Identity(2, 2)).norm(), 0.0);
}

TEST(Quantum, HermitianFlowIsUnitary) {
  auto M = euclidean_ball(3);
  auto H = random_hamiltonian(3, 3, 2.0, 7);
  EXPECT_LE(hermitian_defect(H, make_vec({0.2, 0.1, -0.3})), 1e-12);
  auto path = chord(M, make_vec({-0.9, 0.2, 0.1}), make_vec({1.0, -0.1, 0.05}));
  auto ev = quantum_evolve(M, H, path);
  EXPECT_LE(ev.unitarity_defect, 1e-8);
  // same code path as the transport module
  auto U = fundamental_solution(M, schrodinger_pair(H), path);
  EXPECT_LE((U.back() - ev.U.back()).norm(), 1e-12);
}

TEST(Quantum, ScalarPhase) {
  auto M = euclidean_ball(3);
  Hamiltonian H;
  double E = 1.7;
  H.Phi_like = [E](const Vec&) { return CMat::Constant(1, 1, cd(E, 0)); };
  auto ev = quantum_evolve(M, H, chord(M, make_vec({-0.8, 0.0, 0.0}), make_vec({1.0, 0.0, 0.0})));
  for (std::size_t k = 0; k < ev.t.size(); ++k)
    EXPECT_NEAR(std::abs(ev.U[k](0, 0) - std::exp(cd(0, -E * ev.t[k]))), 0.0, 1e-10);
}

TEST(Projection, IdentityGivesPiAndIsIdempotent) {
  auto M = conformal_ball(3, Polynomial{{{0.3, {2, 0, 0}}}});
  Vec z = make_vec({0.2, 0.3, -0.1});
  Vec v = normalize_g(M, z, make_vec({0.3, 1.0, 0.2}));
  CMat P = projection_P(M, z, v, CMat::Identity(3, 3));
  EXPECT_NEAR((P * P - P).norm(), 0.0, 1e-12);
  EXPECT_NEAR(P.trace().real(), 2.0, 1e-12);
  CMat f = CMat::Random(3, 3);
  CMat Pf = projection_P(M, z, v, f);
  EXPECT_NEAR((projection_P(M, z, v, Pf) - Pf).norm(), 0.0, 1e-12);
  // against an explicit g-orthonormal basis of v^⊥
  Mat B = complement_frame(M, z, v);
  Mat g = metric_at(M, z);
  CMat Q = (B * (g * B).transpose()).cast<cd>();
  EXPECT_NEAR((Q * f * Q - Pf).norm(), 0.0, 1e-12);
  EXPECT_THROW(projection_P(M, z, 2 * v, f), Error);
}

TEST(Polarization, ZeroTensorIsIdentity) {
  auto M = euclidean_ball(3);
  TensorField f = [](const Vec&) { return CMat(CMat::Zero(3, 3)); };
  auto ev = polarization_evolve(M, f, chord(M, make_vec({-0.9, 0.0, 0.0}), make_vec({1.0, 0.2, 0.0})));
  EXPECT_EQ((ev.U.back() - CMat::Identity(3, 3)).norm(), 0.0);
}

TEST(Polarization, ConstantTensorMatrixExponential) {
  auto M = euclidean_ball(3);
  // velocity e₀, f acting on span{e₁, e₂}
  CMat f = CMat::Zero(3, 3);
  f(1, 1) = cd(0.3, 0.1);
  f(1, 2) = cd(-0.7, 0.2);
  f(2, 1) = cd(0.5, 0);
  f(2, 2) = cd(0, -0.4);
  TensorField F = [f](const Vec&) { return f; };
  auto path = chord(M, make_vec({-0.9, 0.1, 0.0}), make_vec({1.0, 0.0, 0.0}));
  auto ev = polarization_evolve(M, F, path);
  Mat E = ev.frames.front();
  CMat ref = (path.length() * CMat(E.inverse().cast<cd>() * f * E.cast<cd>())).exp();
  EXPECT_NEAR((ev.U.back() - ref).norm(), 0.0, 1e-9);
  // the velocity direction is fixed
  CVec e1 = CVec::Unit(3, 0);
  EXPECT_NEAR((ev.U.back() * e1 - e1).norm(), 0.0, 1e-14);
}

TEST(Polarization, FrameIndependenceOnCurvedMetric) {
  auto M = conformal_ball(3, Polynomial{{{0.2, {0, 2, 0}}, {0.1, {1, 0, 1}}}});
  TensorField f = [](const Vec& x) {
    CMat m(3, 3);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) m(i, j) = cd(std::sin(i + 2 * j + x[0]), 0.3 * std::cos(i - j + x[1]));
    return m;
  };
  Vec x0 = make_vec({-0.7, 0.1, 0.2});
  auto path = chord(M, x0, make_vec({1.0, 0.3, -0.2}));
  auto a = polarization_evolve(M, f, path);
  Eigen::Matrix3d Qd = Eigen::AngleAxisd(0.7, Eigen::Vector3d(0.2, 1.0, -0.4).normalized()).toRotationMatrix();
  Mat Q = Qd;
  auto b = polarization_evolve(M, f, path, Mat(a.frames.front() * Q));
  CMat Qc = Q.cast<cd>();
  EXPECT_NEAR((b.U.back() - Qc.transpose() * a.U.back() * Qc).norm(), 0.0, 1e-8);
}

TEST(Polarization, ParallelTransportRoundTrip) {
  auto M = conformal_ball(3, Polynomial{{{0.25, {2, 0, 0}}}});
  auto path = chord(M, make_vec({-0.6, 0.2, 0.1}), make_vec({1.0, 0.4, -0.1}));
  Vec w = make_vec({0.3, -0.5, 0.8});
  Vec w1 = parallel_transport(M, path, w);
  // transported lengths are preserved
  const auto& e = path.samples.back();
  EXPECT_NEAR(w1.dot(metric_at(M, e.x) * w1), w.dot(metric_at(M, path.samples.front().x) * w), 1e-8);
  GeodesicPath back;
  for (auto it = path.samples.rbegin(); it != path.samples.rend(); ++it) {
    PathSample q = *it;
    q.t = e.t - it->t;
    q.v = -it->v;
    back.samples.push_back(q);
  }
  Vec w2 = parallel_transport(M, back, w1);
  EXPECT_NEAR((w2 - w).norm(), 0.0, 1e-8);
}

TEST(Sampler, DimensionFiveAlwaysSucceeds) {
  auto r = polarization_ellipticity_sampler(5, 1000, 3);
  EXPECT_EQ(r.successes, 1000);
  EXPECT_DOUBLE_EQ(r.success_rate, 1.0);
  EXPECT_LE(r.max_residual, 1e-10);
}

TEST(Sampler, DimensionThreeObstruction) {
  double res = 0;
  std::string why;
  EXPECT_FALSE(solve_instance(adversarial_instance_n3(), res, why));
  EXPECT_FALSE(why.empty());
  auto r = polarization_ellipticity_sampler(3, 50, 3);
  EXPECT_LT(r.success_rate, 1.0);
  EXPECT_EQ(static_cast<int>(r.failures.size()), 50 - r.successes);
}
