#pragma once

#include <unsupported/Eigen/MatrixFunctions>

#include "manifold.hpp"

namespace geoxray {

using MatField = std::function<CMat(const Vec&)>;
using MatListField = std::function<std::vector<CMat>(const Vec&)>;
using VecField = std::function<CVec(const Vec&)>;
using VecListField = std::function<std::vector<CVec>(const Vec&)>;

struct ConnectionPair {
  int n = 3;
  int N = 1;
  MatListField A;  // A_i(x), i < n; empty -> zero
  MatField Phi;    // empty -> zero
  bool unitary = false;

  std::vector<CMat> A_at(const Vec& x) const {
    if (A) return A(x);
    return std::vector<CMat>(n, CMat::Zero(N, N));
  }
  CMat Phi_at(const Vec& x) const { return Phi ? Phi(x) : CMat(CMat::Zero(N, N)); }
  // 𝒜(x, v) = A_x(v) + Φ(x)
  CMat generator(const Vec& x, const Vec& v) const {
    CMat G = Phi_at(x);
    if (A) {
      auto a = A(x);
      for (int i = 0; i < n; ++i) G += v[i] * a[i];
    }
    return G;
  }
  bool is_zero() const { return !A && !Phi; }
};

inline ConnectionPair zero_pair(int n, int N) {
  ConnectionPair p;
  p.n = n;
  p.N = N;
  p.unitary = true;
  return p;
}

inline ConnectionPair constant_pair(int n, std::vector<CMat> A, CMat Phi) {
  ConnectionPair p;
  p.n = n;
  p.N = static_cast<int>(Phi.rows());
  if (!A.empty()) p.A = [A](const Vec&) { return A; };
  p.Phi = [Phi](const Vec&) { return Phi; };
  return p;
}

// Affine-in-x pair with random complex coefficients; skew-Hermitian when unitary.
inline ConnectionPair random_pair(int n, int N, double scale, std::uint64_t seed, bool unitary = false) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> G(0.0, 1.0);
  auto rnd = [&] {
    CMat m(N, N);
    for (int i = 0; i < N; ++i)
      for (int j = 0; j < N; ++j) m(i, j) = cd(G(rng), G(rng));
    if (unitary) m = 0.5 * (m - m.adjoint()).eval();
    return CMat(m / std::max(1.0, m.norm()) * scale);
  };
  std::vector<std::vector<CMat>> a(n, std::vector<CMat>(n + 1));
  std::vector<CMat> f(n + 1);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k <= n; ++k) a[i][k] = rnd();
  for (int k = 0; k <= n; ++k) f[k] = rnd();
  ConnectionPair p;
  p.n = n;
  p.N = N;
  p.unitary = unitary;
  p.A = [a, n](const Vec& x) {
    std::vector<CMat> out(n);
    for (int i = 0; i < n; ++i) {
      out[i] = a[i][0];
      for (int k = 0; k < n; ++k) out[i] += x[k] * a[i][k + 1];
    }
    return out;
  };
  p.Phi = [f, n](const Vec& x) {
    CMat out = f[0];
    for (int k = 0; k < n; ++k) out += x[k] * f[k + 1];
    return out;
  };
  return p;
}

struct SectionPair {
  int N = 1;
  VecField f;          // empty -> zero
  VecListField alpha;  // n components; empty -> zero

  CVec value(const Vec& x, const Vec& v) const {
    CVec r = f ? f(x) : CVec(CVec::Zero(N));
    if (alpha) {
      auto a = alpha(x);
      for (int i = 0; i < v.size(); ++i) r += v[i] * a[i];
    }
    return r;
  }
};

struct ScatteringData {
  std::vector<PhasePoint> points;
  std::vector<CMat> C;
  std::string pair_id;
};

// Per-step RK4 propagator of U' = -𝒜 U over path samples a -> b.
inline CMat step_propagator(const ChartManifold&, const ConnectionPair& pair, const PathSample& a,
                            const PathSample& b, const CMat& U, double th0 = 0.0, double th1 = 1.0) {
  double h = (b.t - a.t) * (th1 - th0);
  Vec x0, v0, xm, vm, x1, v1;
  hermite_at(a, b, th0, x0, v0);
  hermite_at(a, b, 0.5 * (th0 + th1), xm, vm);
  hermite_at(a, b, th1, x1, v1);
  CMat G0 = pair.generator(x0, v0), Gm = pair.generator(xm, vm), G1 = pair.generator(x1, v1);
  CMat k1 = -G0 * U;
  CMat k2 = -Gm * (U + 0.5 * h * k1);
  CMat k3 = -Gm * (U + 0.5 * h * k2);
  CMat k4 = -G1 * (U + h * k3);
  return U + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

inline std::vector<CMat> fundamental_solution(const ChartManifold& M, const ConnectionPair& pair,
                                              const GeodesicPath& path, bool probe = true) {
  int N = pair.N;
  std::vector<CMat> U(path.samples.size());
  U[0] = CMat::Identity(N, N);
  if (pair.is_zero()) {
    for (auto& u : U) u = CMat::Identity(N, N);
    return U;
  }
  std::size_t worst = 0;
  double wn = -1;
  for (std::size_t k = 0; k + 1 < path.samples.size(); ++k) {
    U[k + 1] = step_propagator(M, pair, path.samples[k], path.samples[k + 1], U[k]);
    if (probe) {
      double g = pair.generator(path.samples[k].x, path.samples[k].v).norm() * (path.samples[k + 1].t - path.samples[k].t);
      if (g > wn) {
        wn = g;
        worst = k;
      }
    }
  }
  if (probe && path.samples.size() > 1) {
    const auto& a = path.samples[worst];
    const auto& b = path.samples[worst + 1];
    CMat I = CMat::Identity(N, N);
    CMat one = step_propagator(M, pair, a, b, I);
    CMat two = step_propagator(M, pair, a, b, step_propagator(M, pair, a, b, I, 0.0, 0.5), 0.5, 1.0);
    double err = (one.partialPivLu().solve(two) - I).norm();
    if (err > 1e-3) throw Error(ErrorKind::StepTooLarge, "transport step consistency " + std::to_string(err));
  }
  return U;
}

inline ScatteringData scattering_data(const ChartManifold& M, const ConnectionPair& pair,
                                      const std::vector<PhasePoint>& fan, std::string id = "") {
  ScatteringData d;
  d.points = fan;
  d.C.resize(fan.size());
  d.pair_id = std::move(id);
  parallel_for(fan.size(), [&](std::size_t i) {
    auto path = trace_geodesic(M, fan[i]);
    d.C[i] = fundamental_solution(M, pair, path).back();
  });
  return d;
}

inline CMat checked_inverse(const CMat& U) {
  auto lu = U.partialPivLu();
  if (std::abs(lu.determinant()) < 1e-12) throw Error(ErrorKind::SingularU, "fundamental solution is singular");
  return lu.inverse();
}

// W(p) = U_entry(t_p)^{-1}
inline CMat attenuation_weight(const ChartManifold& M, const ConnectionPair& pair, const PhasePoint& p) {
  auto path = trace_geodesic(M, p, Direction::Backward);
  return checked_inverse(fundamental_solution(M, pair, path).back());
}

// Weights at every path sample, W(t) = U(t)^{-1} from the path's first sample.
inline std::vector<CMat> weights_along(const ChartManifold& M, const ConnectionPair& pair, const GeodesicPath& path) {
  auto U = fundamental_solution(M, pair, path);
  for (auto& u : U) u = checked_inverse(u);
  return U;
}

struct GaugeTransform {
  MatField u;
  MatListField du;  // optional analytic ∂_k u
  bool boundary_identity = true;
};

// d/dε exp(Z + εE) at ε = 0 via the block exponential.
inline CMat expm_frechet(const CMat& Z, const CMat& E) {
  int N = static_cast<int>(Z.rows());
  CMat B = CMat::Zero(2 * N, 2 * N);
  B.topLeftCorner(N, N) = Z;
  B.topRightCorner(N, N) = E;
  B.bottomRightCorner(N, N) = Z;
  CMat X = B.exp();
  return X.topRightCorner(N, N);
}

// u = exp(ρ(x) (M0 + Σ x_k M_k)); identity on {ρ = 0}.
inline GaugeTransform exp_gauge(const ChartManifold& M, std::vector<CMat> coeffs, bool analytic = true) {
  int n = M.dim;
  auto rho = M.rho;
  auto Zf = [coeffs, n, rho](const Vec& x) {
    CMat Z = coeffs[0];
    for (int k = 0; k < n; ++k) Z += x[k] * coeffs[k + 1];
    return CMat(rho(x) * Z);
  };
  GaugeTransform g;
  g.u = [Zf](const Vec& x) { return CMat(Zf(x).exp()); };
  if (analytic) {
    g.du = [coeffs, n, rho, Zf, M](const Vec& x) {
      CMat L = coeffs[0];
      for (int k = 0; k < n; ++k) L += x[k] * coeffs[k + 1];
      double r = rho(x);
      Vec dr = rho_gradient(M, x);
      CMat Z = r * L;
      std::vector<CMat> out(n);
      for (int k = 0; k < n; ++k) out[k] = expm_frechet(Z, dr[k] * L + r * coeffs[k + 1]);
      return out;
    };
  }
  return g;
}

inline ConnectionPair gauge_transform_pair(const ChartManifold& M, const ConnectionPair& pair, const GaugeTransform& g) {
  int n = pair.n;
  double d = M.fd();
  auto uinv = [g](const Vec& x) {
    CMat u = g.u(x);
    auto lu = u.partialPivLu();
    if (std::abs(lu.determinant()) < 1e-12) throw Error(ErrorKind::SingularGauge, "gauge is singular");
    return CMat(lu.inverse());
  };
  ConnectionPair out;
  out.n = n;
  out.N = pair.N;
  out.unitary = pair.unitary;
  out.A = [pair, g, n, d, uinv](const Vec& x) {
    CMat u = g.u(x), ui = uinv(x);
    std::vector<CMat> du;
    if (g.du) {
      du = g.du(x);
    } else {
      du.resize(n);
      for (int k = 0; k < n; ++k) {
        Vec a = x, b = x;
        a[k] += d;
        b[k] -= d;
        du[k] = (g.u(a) - g.u(b)) / (2.0 * d);
      }
    }
    auto A = pair.A_at(x);
    std::vector<CMat> B(n);
    for (int k = 0; k < n; ++k) B[k] = ui * du[k] + ui * A[k] * u;
    return B;
  };
  if (pair.Phi) {
    out.Phi = [pair, g, uinv](const Vec& x) { return CMat(uinv(x) * pair.Phi(x) * g.u(x)); };
  }
  return out;
}

// (dp + Ap, Φp); dp by central differences unless supplied.
inline SectionPair d_pair_apply(const ChartManifold& M, const ConnectionPair& pair, VecField p,
                                VecListField dp = {}) {
  int n = pair.n;
  double d = M.fd();
  SectionPair s;
  s.N = pair.N;
  s.f = [pair, p](const Vec& x) { return CVec(pair.Phi_at(x) * p(x)); };
  s.alpha = [pair, p, dp, n, d](const Vec& x) {
    std::vector<CVec> a(n);
    std::vector<CVec> g;
    if (dp) {
      g = dp(x);
    } else {
      g.resize(n);
      for (int k = 0; k < n; ++k) {
        Vec u = x, w = x;
        u[k] += d;
        w[k] -= d;
        g[k] = (p(u) - p(w)) / (2.0 * d);
      }
    }
    CVec px = p(x);
    auto A = pair.A_at(x);
    for (int k = 0; k < n; ++k) a[k] = g[k] + A[k] * px;
    return a;
  };
  return s;
}

// ‖(F(T) − F(0)) − ∫ W_B (𝓑 − 𝒜) W_A^{-1} dt‖ / (1 + ‖F(T)‖), F = W_B W_A^{-1}.
inline double pseudo_linearization_residual(const ChartManifold& M, const ConnectionPair& A,
                                            const ConnectionPair& B, const GeodesicPath& path) {
  auto UA = fundamental_solution(M, A, path);
  auto UB = fundamental_solution(M, B, path);
  std::size_t K = path.samples.size();
  int N = A.N;
  std::vector<CMat> g(K);
  for (std::size_t k = 0; k < K; ++k) {
    const auto& s = path.samples[k];
    g[k] = checked_inverse(UB[k]) * (B.generator(s.x, s.v) - A.generator(s.x, s.v)) * UA[k];
  }
  auto t = path.times();
  CMat rhs = CMat::Zero(N, N);
  for (std::size_t k = 0; k + 1 < K; ++k) {
    std::size_t first;
    double w[4];
    int cnt;
    interval_weights4(t, k, first, w, cnt);
    for (int j = 0; j < cnt; ++j) rhs += w[j] * g[first + j];
  }
  CMat FT = checked_inverse(UB.back()) * UA.back();
  CMat lhs = FT - CMat::Identity(N, N);
  return (lhs - rhs).norm() / (1.0 + FT.norm());
}

inline CMat kron(const CMat& a, const CMat& b) {
  CMat r(a.rows() * b.rows(), a.cols() * b.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) r.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return r;
}

inline CVec vec(const CMat& X) { return Eigen::Map<const CVec>(X.data(), X.size()); }
inline CMat unvec(const CVec& v, int N) { return Eigen::Map<const CMat>(v.data(), N, N); }

// Pair on ℂ^{N²} acting by X ↦ 𝒜X − X𝓑 (column-major vec); its transport is X ↦ U_A X U_B^{-1}.
inline ConnectionPair hatted_pair(const ConnectionPair& A, const ConnectionPair& B) {
  int N = A.N, n = A.n;
  CMat I = CMat::Identity(N, N);
  ConnectionPair h;
  h.n = n;
  h.N = N * N;
  h.unitary = A.unitary && B.unitary;
  if (A.A || B.A) {
    h.A = [A, B, I, n](const Vec& x) {
      auto a = A.A_at(x), b = B.A_at(x);
      std::vector<CMat> out(n);
      for (int i = 0; i < n; ++i) out[i] = kron(I, a[i]) - kron(b[i].transpose(), I);
      return out;
    };
  }
  if (A.Phi || B.Phi) {
    h.Phi = [A, B, I](const Vec& x) { return CMat(kron(I, A.Phi_at(x)) - kron(B.Phi_at(x).transpose(), I)); };
  }
  return h;
}

}  // namespace geoxray
