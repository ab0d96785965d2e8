#pragma once

#include <random>

#include "geoxray/transport.hpp"

namespace geoxray {

// ---- quantum state tomography -------------------------------------------------------------

struct Hamiltonian {
  int n = 3, N = 1;
  MatListField A_like;  // velocity-linear part, n components
  MatField Phi_like;
  bool hermitian = true;

  CMat at(const Vec& x, const Vec& v) const {
    CMat H = Phi_like ? Phi_like(x) : CMat(CMat::Zero(N, N));
    if (A_like) {
      auto a = A_like(x);
      for (int i = 0; i < n; ++i) H += v[i] * a[i];
    }
    return H;
  }
};

inline ConnectionPair schrodinger_pair(const Hamiltonian& H) {
  ConnectionPair p;
  p.n = H.n;
  p.N = H.N;
  p.unitary = H.hermitian;
  const cd I(0, 1);
  if (H.A_like) {
    auto a = H.A_like;
    p.A = [a, I](const Vec& x) {
      auto v = a(x);
      for (auto& m : v) m *= I;
      return v;
    };
  }
  if (H.Phi_like) {
    auto f = H.Phi_like;
    p.Phi = [f, I](const Vec& x) { return CMat(I * f(x)); };
  }
  return p;
}

inline double hermitian_defect(const Hamiltonian& H, const Vec& x) {
  double d = 0;
  if (H.Phi_like) {
    CMat f = H.Phi_like(x);
    d = std::max(d, (f - f.adjoint()).norm());
  }
  if (H.A_like)
    for (auto& a : H.A_like(x)) d = std::max(d, (a - a.adjoint()).norm());
  return d;
}

// Random Hamiltonian, affine in x; Hermitian unless told otherwise.
inline Hamiltonian random_hamiltonian(int n, int N, double scale, std::uint64_t seed, bool hermitian = true) {
  auto p = random_pair(n, N, scale, seed, hermitian);
  // skew-Hermitian coefficients times −i are Hermitian
  Hamiltonian H;
  H.n = n;
  H.N = N;
  H.hermitian = hermitian;
  const cd mI(0, -1);
  auto a = p.A;
  auto f = p.Phi;
  H.A_like = [a, mI](const Vec& x) {
    auto v = a(x);
    for (auto& m : v) m *= mI;
    return v;
  };
  H.Phi_like = [f, mI](const Vec& x) { return CMat(mI * f(x)); };
  return H;
}

struct Evolution {
  std::vector<double> t;
  std::vector<CMat> U;
  double unitarity_defect = 0;  // max ‖U*U − I‖ along the path
};

// iΨ' = H(γ, γ')Ψ: U' = −iHU, U(0) = I.
inline Evolution quantum_evolve(const ChartManifold& M, const Hamiltonian& H, const GeodesicPath& path) {
  Evolution out;
  out.t = path.times();
  out.U = fundamental_solution(M, schrodinger_pair(H), path);
  CMat I = CMat::Identity(H.N, H.N);
  for (auto& u : out.U) out.unitarity_defect = std::max(out.unitarity_defect, (u.adjoint() * u - I).norm());
  return out;
}

// ---- polarization tomography --------------------------------------------------------------

using TensorField = std::function<CMat(const Vec&)>;  // (1,1)-tensor in chart components

// π = I − v v♭ (g-orthogonal, v real and unit) and P f = π f π.
inline CMat projector_pi(const ChartManifold& M, const Vec& z, const Vec& v) {
  int n = M.dim;
  Mat g = metric_at(M, z);
  Mat pi = Mat::Identity(n, n) - v * (g * v).transpose();
  return pi.cast<cd>();
}

inline CMat projection_P(const ChartManifold& M, const Vec& z, const Vec& v, const CMat& f) {
  if (std::abs(speed2(M, z, v) - 1.0) > 1e-8) throw Error(ErrorKind::Config, "projection_P needs a unit vector");
  CMat pi = projector_pi(M, z, v);
  return pi * f * pi;
}

// Parallel frame equation E' = −Γ(γ', E).
inline Mat frame_rhs(const ChartManifold& M, const Vec& x, const Vec& v, const Mat& E) {
  if (M.flat) return Mat::Zero(E.rows(), E.cols());
  auto G = christoffels_at(M, x);
  Mat out(E.rows(), E.cols());
  for (int c = 0; c < E.cols(); ++c)
    for (int k = 0; k < M.dim; ++k) out(k, c) = -v.dot(G[k] * E.col(c));
  return out;
}

inline std::vector<Mat> parallel_frames(const ChartManifold& M, const GeodesicPath& path, const Mat& E0) {
  std::vector<Mat> E(path.samples.size());
  E[0] = E0;
  for (std::size_t k = 0; k + 1 < path.samples.size(); ++k) {
    const auto& a = path.samples[k];
    const auto& b = path.samples[k + 1];
    double h = b.t - a.t;
    Vec xm, vm;
    hermite_at(a, b, 0.5, xm, vm);
    Mat k1 = frame_rhs(M, a.x, a.v, E[k]);
    Mat k2 = frame_rhs(M, xm, vm, E[k] + 0.5 * h * k1);
    Mat k3 = frame_rhs(M, xm, vm, E[k] + 0.5 * h * k2);
    Mat k4 = frame_rhs(M, b.x, b.v, E[k] + h * k3);
    E[k + 1] = E[k] + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
  }
  return E;
}

// g-orthonormal frame whose first column is the unit velocity.
inline Mat adapted_frame(const ChartManifold& M, const Vec& x, const Vec& v) {
  int n = M.dim;
  Mat E(n, n);
  E.col(0) = normalize_g(M, x, v);
  E.rightCols(n - 1) = complement_frame(M, x, v);
  return E;
}

struct PolarizationEvolution {
  std::vector<double> t;
  std::vector<CMat> U;  // frame components
  std::vector<Mat> frames;
};

// D_t η = (P f)η along a unit-speed geodesic, solved in a parallel orthonormal frame.
// E0 defaults to the adapted frame at the first sample.
inline PolarizationEvolution polarization_evolve(const ChartManifold& M, const TensorField& f, const GeodesicPath& path,
                                                 Mat E0 = Mat()) {
  int n = M.dim;
  const auto& s0 = path.samples.front();
  if (E0.size() == 0) E0 = adapted_frame(M, s0.x, s0.v);
  PolarizationEvolution out;
  out.t = path.times();
  out.frames = parallel_frames(M, path, E0);
  out.U.resize(path.samples.size());
  out.U[0] = CMat::Identity(n, n);
  // frame-reduced generator at (x, v) with the frame interpolated linearly between samples
  auto gen = [&](const Vec& x, const Vec& v, const Mat& E) {
    Mat Ei = E.inverse();
    CMat Pf = projection_P(M, x, normalize_g(M, x, v), f(x));
    return CMat(Ei.cast<cd>() * Pf * E.cast<cd>());
  };
  for (std::size_t k = 0; k + 1 < path.samples.size(); ++k) {
    const auto& a = path.samples[k];
    const auto& b = path.samples[k + 1];
    double h = b.t - a.t;
    Vec xm, vm;
    hermite_at(a, b, 0.5, xm, vm);
    Mat Em = out.frames[k] + 0.5 * h * frame_rhs(M, a.x, a.v, out.frames[k]);
    Em = 0.5 * (Em + out.frames[k + 1] - 0.5 * h * frame_rhs(M, b.x, b.v, out.frames[k + 1]));
    CMat G0 = gen(a.x, a.v, out.frames[k]), Gm = gen(xm, vm, Em), G1 = gen(b.x, b.v, out.frames[k + 1]);
    const CMat& U = out.U[k];
    CMat k1 = G0 * U;
    CMat k2 = Gm * (U + 0.5 * h * k1);
    CMat k3 = Gm * (U + 0.5 * h * k2);
    CMat k4 = G1 * (U + h * k3);
    out.U[k + 1] = U + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return out;
}

// Parallel transport of a vector along the path via the recorded frames.
inline Vec parallel_transport(const ChartManifold& M, const GeodesicPath& path, const Vec& w) {
  const auto& s0 = path.samples.front();
  auto E = parallel_frames(M, path, adapted_frame(M, s0.x, s0.v));
  return E.back() * E.front().inverse() * w;
}

// ---- ellipticity sampler (dimension ≥ 5) ----------------------------------------------------

struct SamplerFailure {
  int trial = 0;
  std::string reason;
};

struct SamplerReport {
  int n = 0, trials = 0, successes = 0;
  double success_rate = 0;
  double max_residual = 0;
  std::vector<SamplerFailure> failures;
};

// Boundary model in flat coordinates (x, y): Ŷ ∈ η^⊥ ∩ S^{n−2} with (0, Ŷ) ⊥ v and ⊥ f(v);
// then (P_{(0,Ŷ)} f)v = f(v).
struct SamplerInstance {
  Eigen::VectorXd eta, v;  // η ∈ ℝ^{n−1}, v ∈ ℝⁿ
  CMat f;                  // complexified real tensor: f(v) real for real v
};

inline bool solve_instance(const SamplerInstance& s, double& residual, std::string& reason) {
  int n = static_cast<int>(s.v.size());
  CVec fv = s.f * s.v.cast<cd>();
  if (fv.norm() < 1e-12) {
    reason = "f(v) = 0";
    return false;
  }
  // constraints on Ŷ ∈ ℝ^{n−1}: rows η, v_y, Re f(v)_y, Im f(v)_y
  std::vector<Eigen::VectorXd> rows{s.eta, s.v.tail(n - 1), fv.real().tail(n - 1), fv.imag().tail(n - 1)};
  Eigen::MatrixXd K(0, n - 1);
  for (auto& r : rows)
    if (r.norm() > 1e-14) {
      K.conservativeResize(K.rows() + 1, Eigen::NoChange);
      K.row(K.rows() - 1) = r.transpose();
    }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(K, Eigen::ComputeFullV);
  int rank = 0;
  double smax = svd.singularValues().size() ? svd.singularValues()[0] : 0;
  for (int i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()[i] > 1e-10 * smax) ++rank;
  if (rank >= n - 1) {
    reason = "constraints span ℝ^{n-1}";
    return false;
  }
  Eigen::VectorXd Y = svd.matrixV().col(n - 2);
  Y.normalize();
  Eigen::VectorXd w(n);
  w[0] = 0;
  w.tail(n - 1) = Y;
  CMat pi = CMat::Identity(n, n) - (w * w.transpose()).cast<cd>();
  residual = (pi * s.f * pi * s.v.cast<cd>() - fv).norm() / fv.norm();
  if (residual > 1e-10) {
    reason = "projected residual " + std::to_string(residual);
    return false;
  }
  return true;
}

inline SamplerInstance random_instance(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> G(0, 1);
  SamplerInstance s;
  s.eta = Eigen::VectorXd(n - 1);
  s.v = Eigen::VectorXd(n);
  for (int i = 0; i < n - 1; ++i) s.eta[i] = G(rng);
  for (int i = 0; i < n; ++i) s.v[i] = G(rng);
  s.v.normalize();
  Eigen::MatrixXd f(n, n);
  for (int i = 0; i < n * n; ++i) f.data()[i] = G(rng);
  s.f = f.cast<cd>();
  return s;
}

inline SamplerReport polarization_ellipticity_sampler(int n, int trials, std::uint64_t seed = 1) {
  if (n < 3) throw Error(ErrorKind::Config, "sampler needs n >= 3");
  SamplerReport rep;
  rep.n = n;
  rep.trials = trials;
  std::mt19937_64 rng(seed);
  std::vector<SamplerInstance> inst;
  for (int t = 0; t < trials; ++t) inst.push_back(random_instance(n, rng));
  std::vector<double> res(trials, 0);
  std::vector<std::string> why(trials);
  std::vector<char> ok(trials, 0);
  parallel_for(trials, [&](std::size_t t) { ok[t] = solve_instance(inst[t], res[t], why[t]); });
  for (int t = 0; t < trials; ++t) {
    if (ok[t]) {
      ++rep.successes;
      rep.max_residual = std::max(rep.max_residual, res[t]);
    } else {
      rep.failures.push_back({t, why[t]});
    }
  }
  rep.success_rate = trials > 0 ? double(rep.successes) / trials : 0.0;
  return rep;
}

// n = 3: η, v_y and f(v)_y span the whole ℝ² of candidate directions.
inline SamplerInstance adversarial_instance_n3() {
  SamplerInstance s;
  s.eta = Eigen::Vector2d(1.0, 0.0);
  s.v = Eigen::Vector3d(0.6, 0.0, 0.8);
  Eigen::Matrix3d f = Eigen::Matrix3d::Identity();
  s.f = f.cast<cd>();
  return s;
}

}  // namespace geoxray
