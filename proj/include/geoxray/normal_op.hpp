#pragma once

#include <Eigen/Eigenvalues>

#include "xray.hpp"

namespace geoxray {

enum class NFMode { Scalar, Pair };

inline const char* to_string(NFMode m) { return m == NFMode::Scalar ? "scalar" : "pair"; }

// ---- front-face model: α and W*W on the artificial boundary ------------------------------

struct BoundaryModel {
  int n = 3, N = 1;
  double F = 1.0;
  Cutoff chi;
  std::function<double(const Vec&)> alpha;  // Ŷ ↦ α(0, y, 0, Ŷ)
  std::function<CMat(const Vec&)> W;        // Ŷ ↦ W(0, y, 0, Ŷ)

  CMat WW(const Vec& Y) const {
    if (!W) return CMat::Identity(N, N);
    CMat w = W(Y);
    return w.adjoint() * w;
  }
  CMat Wat(const Vec& Y) const { return W ? W(Y) : CMat(CMat::Identity(N, N)); }
};

inline BoundaryModel flat_model(int n, double F = 1.0, double alpha = 0.5, int N = 1) {
  BoundaryModel b;
  b.n = n;
  b.N = N;
  b.F = F;
  b.chi.sigma = std::sqrt(alpha / F);
  b.alpha = [alpha](const Vec&) { return alpha; };
  return b;
}

// Point of {x = 0} on the inward normal through p.
inline Vec artificial_boundary_point(const ChartManifold& M, const CollarSpec& C) {
  Vec nu = outward_normal(M, C.p);
  double lo = 0, hi = 0.01;
  while (C.x(C.p - hi * nu) > 0 && hi < M.diameter()) hi *= 2;
  if (C.x(C.p - hi * nu) > 0) throw Error(ErrorKind::CollarTooDeep, "artificial boundary not reached");
  for (int k = 0; k < 100; ++k) {
    double m = 0.5 * (lo + hi);
    (C.x(C.p - m * nu) > 0 ? lo : hi) = m;
  }
  return C.p - 0.5 * (lo + hi) * nu;
}

inline BoundaryModel collar_model(const ChartManifold& M, const CollarSpec& C, const ConnectionPair& pair) {
  BoundaryModel b;
  b.n = M.dim;
  b.N = pair.N;
  b.F = C.F;
  b.chi = C.chi;
  Vec z0 = artificial_boundary_point(M, C);
  auto fr = direction_frame(M, C, z0);
  b.alpha = [M, C, z0, fr](const Vec& Y) { return collar_alpha(M, C, z0, fr.e * Y); };
  if (!pair.is_zero())
    b.W = [M, pair, z0, fr](const Vec& Y) { return attenuation_weight(M, pair, {z0, fr.e * Y}); };
  return b;
}

// Bordering row (S, Ŷ, 1) ⊗ W in pair mode, W in scalar mode.
inline CMat bordered(const CMat& W, const Eigen::VectorXcd& a) {
  int N = W.rows();
  CMat B(N, a.size() * N);
  for (int k = 0; k < a.size(); ++k) B.block(0, k * N, N, N) = a[k] * W;
  return B;
}

inline CMat boundary_kernel(const BoundaryModel& b, const Vec& X_Y, NFMode mode) {
  // X_Y = (X, Y_1..Y_{n-1})
  int n = b.n, N = b.N;
  double X = X_Y[0];
  Vec Y = X_Y.tail(n - 1);
  double r = Y.norm();
  if (!(r > 0)) throw Error(ErrorKind::Numerical, "boundary kernel needs Y != 0");
  Vec Yh = Y / r;
  double al = b.alpha(Yh);
  double S = (X - al * r * r) / r;
  double scal = std::exp(-b.F * X) * std::pow(r, 1 - n) * b.chi(S);
  CMat WW = b.WW(Yh);
  if (mode == NFMode::Scalar) return scal * WW;
  Eigen::VectorXd left(n + 1), right(n + 1);
  left[0] = S;
  right[0] = S + 2 * al * r;
  left.segment(1, n - 1) = Yh;
  right.segment(1, n - 1) = Yh;
  left[n] = right[n] = 1.0;
  CMat K(N * (n + 1), N * (n + 1));
  for (int i = 0; i <= n; ++i)
    for (int j = 0; j <= n; ++j) K.block(i * N, j * N, N, N) = scal * left[i] * right[j] * WW;
  return K;
}

// ---- symbols -----------------------------------------------------------------------------

struct SymbolQuery {
  double xi = 0;
  Vec eta;
  NFMode mode = NFMode::Scalar;
};

struct SymbolOptions {
  int n_dirs = 1440;   // S^{n-2} resolution
  int n_s = 64;        // Gauss nodes on supp χ when ξ = 0
};

inline CMat symbol_fiber_infinity(const BoundaryModel& b, const SymbolQuery& q, const SymbolOptions& o = {}) {
  int n = b.n, N = b.N;
  int dim = q.mode == NFMode::Scalar ? N : (n + 1) * N;
  double zeta = std::sqrt(q.xi * q.xi + q.eta.squaredNorm());
  if (!(zeta > 0)) throw Error(ErrorKind::DegenerateDirectionSet, "zeta = 0");
  CMat out = CMat::Zero(dim, dim);
  double mass = 0;
  auto add = [&](double S, const Vec& Y, double w) {
    double c = b.chi(S) * w;
    if (c == 0) return;
    mass += c;
    CMat W = b.Wat(Y);
    if (q.mode == NFMode::Scalar) {
      out += c * W.adjoint() * W;
    } else {
      Eigen::VectorXcd a(n + 1);
      a[0] = S;
      for (int k = 0; k < n - 1; ++k) a[k + 1] = Y[k];
      a[n] = 1;
      CMat B = bordered(W, a);
      out += c * B.adjoint() * B;
    }
  };
  if (std::abs(q.xi) > 1e-14 * zeta) {
    SphereRule sr = sphere_rule(n - 2, o.n_dirs);
    for (std::size_t j = 0; j < sr.nodes.size(); ++j) {
      double t = q.eta.dot(sr.nodes[j]) / q.xi;
      add(-t, sr.nodes[j], sr.weights[j] * std::sqrt(1 + t * t) / std::abs(q.xi));
    }
  } else {
    // ξ = 0: S̃ free over supp χ, Ŷ on the equator η·Ŷ = 0
    double e = q.eta.norm();
    Mat basis = Mat::Identity(n - 1, n - 1);
    Vec u = q.eta / e;
    // orthonormal basis of η^⊥ in ℝ^{n-1}
    Mat P = Mat::Identity(n - 1, n - 1) - u * u.transpose();
    Eigen::JacobiSVD<Mat> svd(P, Eigen::ComputeFullU);
    Mat Q = svd.matrixU().leftCols(n - 2);
    SphereRule eq = sphere_rule(n - 3, o.n_dirs);
    double smax = b.chi.support();
    if (!std::isfinite(smax)) smax = 8 * b.chi.sigma;
    std::vector<double> gx, gw;
    gauss_legendre(o.n_s, gx, gw);
    for (std::size_t j = 0; j < eq.nodes.size(); ++j) {
      Vec Y = Q * eq.nodes[j];
      for (int i = 0; i < o.n_s; ++i) add(smax * gx[i], Y, smax * gw[i] * eq.weights[j] / e);
    }
    (void)basis;
  }
  if (!(mass > 0)) throw Error(ErrorKind::DegenerateDirectionSet, "constraint set misses supp chi");
  return out;
}

// ⟨ξ⟩^{-1} ∫ (bordered W)*(bordered W) exp(-F (η·Ŷ)² / (2 α ⟨ξ⟩²)) dŶ with Gaussian χ.
inline CMat symbol_boundary(const BoundaryModel& b, const SymbolQuery& q, const SymbolOptions& o = {}) {
  int n = b.n, N = b.N;
  int dim = q.mode == NFMode::Scalar ? N : (n + 1) * N;
  double br = std::sqrt(q.xi * q.xi + b.F * b.F);
  cd beta = cd(q.xi, -b.F) / (q.xi * q.xi + b.F * b.F);
  SphereRule sr = sphere_rule(n - 2, o.n_dirs);
  CMat out = CMat::Zero(dim, dim);
  for (std::size_t j = 0; j < sr.nodes.size(); ++j) {
    const Vec& Y = sr.nodes[j];
    double ey = q.eta.dot(Y);
    double al = b.alpha(Y);
    double c = sr.weights[j] * std::exp(-b.F * ey * ey / (2 * al * br * br)) / br;
    if (c == 0) continue;
    CMat W = b.Wat(Y);
    if (q.mode == NFMode::Scalar) {
      out += c * W.adjoint() * W;
    } else {
      Eigen::VectorXcd a(n + 1);
      a[0] = -beta * ey;
      for (int k = 0; k < n - 1; ++k) a[k + 1] = Y[k];
      a[n] = 1;
      CMat B = bordered(W, a);
      out += c * B.adjoint() * B;
    }
  }
  return out;
}

// Orthonormal basis of {(v⁰, v′, f) : v⁰ c₀ + v′·c′ = 0} on each fiber component.
inline CMat gauge_kernel_basis(int n, int N, cd c0, const Vec& eta) {
  Eigen::VectorXcd c = Eigen::VectorXcd::Zero(n + 1);
  c[0] = c0;
  for (int k = 0; k < n - 1; ++k) c[k + 1] = eta[k];
  // kernel of v ↦ cᵀv is the Hermitian complement of conj(c)
  Eigen::VectorXcd cc = c.conjugate();
  CMat K;
  if (cc.norm() == 0) {
    K = CMat::Identity(n + 1, n + 1);
  } else {
    Eigen::HouseholderQR<CMat> qr(CMat(cc / cc.norm()));
    CMat Q = qr.householderQ() * CMat::Identity(n + 1, n + 1);
    K = Q.rightCols(n);
  }
  return kron(K, CMat::Identity(N, N));
}

inline double min_eig(const CMat& H) {
  Eigen::SelfAdjointEigenSolver<CMat> es(0.5 * (H + H.adjoint()), Eigen::EigenvaluesOnly);
  return es.eigenvalues()[0];
}

struct ScanSpec {
  double xi_max = 20, eta_max = 20;
  int n_xi = 41, n_eta = 11;  // |η| levels include 0
  int n_eta_dirs = 64;
  bool restricted = true;     // pair mode only
  bool boundary = true;       // finite-point symbol; false: fiber infinity
  SymbolOptions sym;
};

struct ScanRow {
  double xi;
  Vec eta;
  double lambda_min, lambda_max, weighted;
};

struct ScanReport {
  double c_min = std::numeric_limits<double>::infinity();
  double ratio_min = std::numeric_limits<double>::infinity();  // λ_min / λ_max
  ScanRow worst;
  std::vector<ScanRow> rows;
};

inline ScanReport ellipticity_scan(const BoundaryModel& b, NFMode mode, const ScanSpec& s) {
  int n = b.n;
  std::vector<std::pair<double, Vec>> queries;
  SphereRule dirs = sphere_rule(n - 2, s.n_eta_dirs);
  for (int i = 0; i < s.n_xi; ++i) {
    double xi = s.n_xi == 1 ? 0.0 : -s.xi_max + 2 * s.xi_max * i / (s.n_xi - 1);
    for (int j = 0; j < s.n_eta; ++j) {
      double r = s.n_eta == 1 ? 0.0 : s.eta_max * j / (s.n_eta - 1);
      if (r == 0) {
        if (s.boundary || xi != 0) queries.push_back({xi, Vec(Vec::Zero(n - 1))});
        continue;
      }
      for (auto& d : dirs.nodes) queries.push_back({xi, Vec(r * d)});
    }
  }
  ScanReport rep;
  rep.rows.resize(queries.size());
  parallel_for(queries.size(), [&](std::size_t k) {
    SymbolQuery q{queries[k].first, queries[k].second, mode};
    CMat H = s.boundary ? symbol_boundary(b, q, s.sym) : symbol_fiber_infinity(b, q, s.sym);
    if (mode == NFMode::Pair && s.restricted) {
      cd c0 = s.boundary ? cd(q.xi, -b.F) : cd(q.xi, 0.0);
      CMat K = gauge_kernel_basis(n, b.N, c0, q.eta);
      H = K.adjoint() * H * K;
    }
    Eigen::SelfAdjointEigenSolver<CMat> es(0.5 * (H + H.adjoint()), Eigen::EigenvaluesOnly);
    double lo = es.eigenvalues()[0], hi = es.eigenvalues()[H.rows() - 1];
    double jz = std::sqrt(1 + q.xi * q.xi + q.eta.squaredNorm());
    rep.rows[k] = {q.xi, q.eta, lo, hi, jz * lo};
  });
  for (auto& r : rep.rows) {
    if (r.weighted < rep.c_min) {
      rep.c_min = r.weighted;
      rep.worst = r;
    }
    rep.ratio_min = std::min(rep.ratio_min, r.lambda_min / r.lambda_max);
  }
  return rep;
}

// ---- discretized operator -----------------------------------------------------------------

struct NFOptions {
  NFMode mode = NFMode::Scalar;
  bool conjugated = true;  // e^{F/x} conjugation and scattering-frame scaling; false: plain form
  FamilySpec family;
  double path_step = 0;    // <= 0: a quarter of the smallest grid spacing
  double max_bytes = 3e9;
  int ghost_cells = 0;     // plain form: extra column-only nodes this many cells outside M and the collar
};

using RowMat = Eigen::Matrix<cd, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct NormalOperator {
  NFOptions opt;
  int n = 3, N = 1, comps = 1;
  Grid grid;
  CollarSpec collar;
  std::vector<std::size_t> nodes;
  std::vector<long> slot;  // grid node -> active index or -1
  std::vector<double> xs;  // x at active nodes
  std::vector<char> ghost;  // column-only node, its row stays zero
  RowMat A;
  std::size_t keys = 0, trapped = 0;
  double max_exponent = -std::numeric_limits<double>::infinity();

  std::size_t size() const { return nodes.size() * comps; }
  CVec apply(const CVec& u) const { return A * u; }
  CVec apply_adjoint(const CVec& u) const { return A.adjoint() * u; }

  CVec restrict(const GridField& f) const {
    CVec u(size());
    for (std::size_t i = 0; i < nodes.size(); ++i)
      for (int c = 0; c < comps; ++c) u[i * comps + c] = f.at(nodes[i], c);
    return u;
  }
  GridField extend(const CVec& u) const {
    GridField f(grid, comps);
    for (std::size_t i = 0; i < nodes.size(); ++i)
      for (int c = 0; c < comps; ++c) f.at(nodes[i], c) = u[i * comps + c];
    return f;
  }
  GridField apply(const GridField& f) const { return extend(apply(restrict(f))); }
};

inline NormalOperator assemble_NF(const ChartManifold& M, const ConnectionPair& pair, const CollarSpec& C,
                                  const Grid& grid, const NFOptions& opt = {}) {
  NormalOperator op;
  op.opt = opt;
  op.n = M.dim;
  op.N = pair.N;
  op.comps = opt.mode == NFMode::Scalar ? pair.N : (M.dim + 1) * pair.N;
  op.grid = grid;
  op.collar = C;
  op.nodes = active_nodes(M, C, grid);
  op.ghost.assign(op.nodes.size(), 0);
  if (opt.ghost_cells > 0) {
    if (opt.conjugated) throw Error(ErrorKind::Config, "ghost nodes need the plain form");
    double pad = opt.ghost_cells * grid.min_spacing() * std::sqrt(double(M.dim));
    std::vector<char> in(grid.size(), 0);
    for (auto id : op.nodes) in[id] = 1;
    for (std::size_t id = 0; id < grid.size(); ++id) {
      Vec z = grid.point(id);
      if (!in[id] && M.rho(z) >= -pad && C.x(z) > -pad) {
        op.nodes.push_back(id);
        op.ghost.push_back(1);
      }
    }
  }
  op.slot.assign(grid.size(), -1);
  for (std::size_t i = 0; i < op.nodes.size(); ++i) op.slot[op.nodes[i]] = static_cast<long>(i);
  std::size_t dim = op.size();
  if (dim == 0) throw Error(ErrorKind::CollarTooDeep, "no active grid nodes");
  if (16.0 * dim * dim > opt.max_bytes)
    throw Error(ErrorKind::Numerical, "operator of size " + std::to_string(dim) + " exceeds the memory cap");
  op.A = RowMat::Zero(dim, dim);

  int n = M.dim, N = pair.N, comps = op.comps;
  bool pairmode = opt.mode == NFMode::Pair;
  double F = opt.conjugated ? C.F : 0.0;
  ChartManifold Ms = M;
  Ms.h_step = opt.path_step > 0 ? opt.path_step : 0.25 * grid.min_spacing();

  std::vector<DirectionFrame> frames(op.nodes.size());
  op.xs.resize(op.nodes.size());
  std::vector<Mat> eflat(op.nodes.size());
  parallel_for(op.nodes.size(), [&](std::size_t i) {
    Vec z = grid.point(op.nodes[i]);
    op.xs[i] = C.x(z);
    frames[i] = direction_frame(M, C, z);
    eflat[i] = metric_at(M, z) * frames[i].e;
  });
  auto fam = family_nodes(C, opt.family);
  std::vector<std::size_t> trapped(op.nodes.size(), 0), keys(op.nodes.size(), 0);
  std::vector<double> maxexp(op.nodes.size(), -std::numeric_limits<double>::infinity());

  parallel_for(op.nodes.size(), [&](std::size_t i) {
    if (op.ghost[i]) return;
    Vec z = grid.point(op.nodes[i]);
    double x = op.xs[i];
    const auto& fr = frames[i];
    std::vector<std::pair<std::size_t, double>> st;
    CMat Wk;
    Eigen::VectorXd rowv(n + 1), colv(n + 1);
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
          ++trapped[i];
          continue;
        }
        ++keys[i];
        std::vector<CMat> W;
        if (!pair.is_zero()) W = weights_along(Ms, pair, path);
        CMat Wkey;
        if (!W.empty()) Wkey = W[path.origin_index].adjoint();
        double rw = pref * fam.ds * fam.omega.weights[j] * chi;
        if (pairmode) {
          rowv[0] = s;
          rowv.segment(1, n - 1) = om;
          rowv[n] = 1;
        }
        auto tw = trapezoid_weights(path.times());
        for (std::size_t k = 0; k < path.samples.size(); ++k) {
          const auto& q = path.samples[k];
          double xq = C.x(q.x);
          if (tw[k] == 0 || (opt.conjugated && !(xq > 0))) continue;
          if (!grid.stencil(q.x, st)) continue;
          double ex = F > 0 ? F * (1.0 / xq - 1.0 / x) : 0.0;
          if (ex > 700) throw Error(ErrorKind::Numerical, "exponent overflow in the conjugated operator");
          maxexp[i] = std::max(maxexp[i], ex);
          double base = rw * tw[k] * std::exp(ex);
          if (!W.empty()) Wk = Wkey * W[k];
          for (auto& [nid, wc] : st) {
            long c = op.slot[nid];
            if (c < 0) continue;
            double cw = base * wc;
            if (!pairmode) {
              if (W.empty()) {
                op.A(i, c) += cw;
              } else {
                for (int r = 0; r < N; ++r)
                  for (int t = 0; t < N; ++t) op.A(i * N + r, c * N + t) += cw * Wk(r, t);
              }
              continue;
            }
            const auto& fc = frames[c];
            colv[0] = fc.dx.dot(q.v);
            colv.segment(1, n - 1) = eflat[c].transpose() * q.v;
            colv[n] = 1;
            if (opt.conjugated) {
              colv[0] /= xq * xq;
              colv.segment(1, n - 1) /= xq;
              colv[n] /= xq;
            }
            for (int a = 0; a <= n; ++a)
              for (int bb = 0; bb <= n; ++bb) {
                double m = cw * rowv[a] * colv[bb];
                if (m == 0) continue;
                if (W.empty()) {
                  op.A(i * comps + a * N, c * comps + bb * N) += m;
                } else {
                  for (int r = 0; r < N; ++r)
                    for (int t = 0; t < N; ++t) op.A(i * comps + a * N + r, c * comps + bb * N + t) += m * Wk(r, t);
                }
              }
          }
        }
      }
    }
  });
  for (std::size_t i = 0; i < op.nodes.size(); ++i) {
    op.trapped += trapped[i];
    op.keys += keys[i];
    op.max_exponent = std::max(op.max_exponent, maxexp[i]);
  }
  return op;
}

// ---- pair-mode component conversions ------------------------------------------------------

// Coordinate components (α_i, f) at z to scattering components (a, b_j, f) with
// α = a dx/x² + b_j e_j♭/x, f = f̃/x (conjugated) or α = a dx + b_j e_j♭, f = f̃ (plain).
inline CVec to_frame_components(const ChartManifold& M, const CollarSpec& C, const Vec& z,
                                const std::vector<CVec>& alpha, const CVec& f, bool scattering) {
  int n = M.dim, N = static_cast<int>(f.size());
  auto fr = direction_frame(M, C, z);
  double x = C.x(z);
  CVec out(N * (n + 1));
  CVec a = CVec::Zero(N);
  for (int i = 0; i < n; ++i) a += fr.dxv[i] * alpha[i];
  out.segment(0, N) = scattering ? CVec(x * x * a) : a;
  for (int j = 0; j < n - 1; ++j) {
    CVec b = CVec::Zero(N);
    for (int i = 0; i < n; ++i) b += fr.e(i, j) * alpha[i];
    out.segment((j + 1) * N, N) = scattering ? CVec(x * b) : b;
  }
  out.segment(n * N, N) = scattering ? CVec(x * f) : f;
  return out;
}

inline std::pair<std::vector<CVec>, CVec> from_frame_components(const ChartManifold& M, const CollarSpec& C,
                                                                const Vec& z, const CVec& u, bool scattering) {
  int n = M.dim, N = static_cast<int>(u.size()) / (n + 1);
  auto fr = direction_frame(M, C, z);
  Mat g = metric_at(M, z);
  double x = C.x(z);
  Mat ef = g * fr.e;
  std::vector<CVec> alpha(n, CVec::Zero(N));
  double sa = scattering ? 1.0 / (x * x) : 1.0, sb = scattering ? 1.0 / x : 1.0;
  for (int i = 0; i < n; ++i) {
    alpha[i] += sa * fr.dx[i] * u.segment(0, N);
    for (int j = 0; j < n - 1; ++j) alpha[i] += sb * ef(i, j) * u.segment((j + 1) * N, N);
  }
  return {alpha, scattering ? CVec(u.segment(n * N, N) / x) : CVec(u.segment(n * N, N))};
}

// Samples a SectionPair (scalar mode: its f only) onto the active nodes of an operator.
inline CVec sample_section(const ChartManifold& M, const NormalOperator& op, const SectionPair& s) {
  CVec u(op.size());
  for (std::size_t i = 0; i < op.nodes.size(); ++i) {
    Vec z = op.grid.point(op.nodes[i]);
    CVec f = s.f ? s.f(z) : CVec(CVec::Zero(op.N));
    if (op.opt.mode == NFMode::Scalar) {
      u.segment(i * op.comps, op.comps) = f;
      continue;
    }
    std::vector<CVec> a = s.alpha ? s.alpha(z) : std::vector<CVec>(M.dim, CVec::Zero(op.N));
    u.segment(i * op.comps, op.comps) = to_frame_components(M, op.collar, z, a, f, op.opt.conjugated);
  }
  return u;
}

inline CVec sample_scalar(const NormalOperator& op, const std::function<CVec(const Vec&)>& f) {
  CVec u(op.size());
  for (std::size_t i = 0; i < op.nodes.size(); ++i) u.segment(i * op.comps, op.comps) = f(op.grid.point(op.nodes[i]));
  return u;
}

// Mask of unknowns on the interior subset {x ≥ x_inner}.
inline std::vector<char> interior_mask(const NormalOperator& op, double x_inner) {
  std::vector<char> m(op.size(), 0);
  for (std::size_t i = 0; i < op.nodes.size(); ++i)
    if (op.xs[i] >= x_inner)
      for (int c = 0; c < op.comps; ++c) m[i * op.comps + c] = 1;
  return m;
}

inline double masked_norm(const CVec& u, const std::vector<char>& m) {
  double s = 0;
  for (Eigen::Index i = 0; i < u.size(); ++i)
    if (m[i]) s += std::norm(u[i]);
  return std::sqrt(s);
}

}  // namespace geoxray
