#pragma once

#include "collar.hpp"
#include "transport.hpp"

namespace geoxray {

using WeightFn = std::function<CMat(const Vec&, const Vec&)>;
using IntegrandFn = std::function<CVec(const Vec&, const Vec&)>;

// ∫ W(γ, γ̇) h(γ, γ̇) dt by the trapezoid rule on the path samples.
inline CVec transform_IW(const ChartManifold&, const WeightFn& W, const IntegrandFn& h, const GeodesicPath& path) {
  auto w = trapezoid_weights(path.times());
  CVec out;
  for (std::size_t k = 0; k < path.samples.size(); ++k) {
    const auto& s = path.samples[k];
    CVec v = h(s.x, s.v);
    if (W) v = W(s.x, s.v) * v;
    if (k == 0)
      out = w[k] * v;
    else
      out += w[k] * v;
  }
  return out;
}

inline CVec transform_attenuated(const ChartManifold& M, const ConnectionPair& pair, const SectionPair& s,
                                 const GeodesicPath& path) {
  auto W = weights_along(M, pair, path);
  auto w = trapezoid_weights(path.times());
  CVec out = CVec::Zero(pair.N);
  for (std::size_t k = 0; k < path.samples.size(); ++k) {
    const auto& q = path.samples[k];
    out += w[k] * (W[k] * s.value(q.x, q.v));
  }
  return out;
}

// ---- local geodesic families --------------------------------------------------------------

struct FamilyKey {
  std::size_t node = 0;
  Vec z, y;
  double x = 0, s = 0, lambda = 0;
  Vec omega;       // S^{n-2} node
  Vec w;           // λ∂x + ω·e
  double speed = 1;  // |w|_g; non-unit parameter = arclength / speed
  double ds = 0, domega = 0;
  GeodesicPath path;
};

struct FamilySpec {
  int n_s = 9;        // midpoint nodes on [-s_max, s_max]
  int n_omega = 12;   // S^{n-2} rule resolution
  double s_max = 0;   // <= 0: the cutoff support
};

struct FamilyNodes {
  std::vector<double> s;
  double ds = 0;
  SphereRule omega;
};

inline FamilyNodes family_nodes(const CollarSpec& C, const FamilySpec& spec) {
  FamilyNodes f;
  double smax = spec.s_max > 0 ? spec.s_max : C.chi.support();
  f.ds = 2 * smax / spec.n_s;
  for (int i = 0; i < spec.n_s; ++i) f.s.push_back(-smax + (i + 0.5) * f.ds);
  f.omega = sphere_rule(C.n - 2, spec.n_omega);
  return f;
}

inline Vec family_velocity(const DirectionFrame& fr, double lambda, const Vec& omega) {
  return lambda * fr.dxv + fr.e * omega;
}

// Active nodes: x > x_floor and ρ ≥ 0.
inline std::vector<std::size_t> active_nodes(const ChartManifold& M, const CollarSpec& C, const Grid& g) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < g.size(); ++i) {
    Vec z = g.point(i);
    if (M.rho(z) >= 0 && C.x(z) > C.x_floor) out.push_back(i);
  }
  return out;
}

struct FamilySample {
  std::vector<FamilyKey> keys;
  std::size_t trapped = 0;
};

inline FamilySample local_family_sampler(const ChartManifold& M, const CollarSpec& C, const Grid& g,
                                         const FamilySpec& spec = {}) {
  auto nodes = active_nodes(M, C, g);
  auto fam = family_nodes(C, spec);
  std::size_t per = fam.s.size() * fam.omega.nodes.size();
  FamilySample out;
  out.keys.resize(nodes.size() * per);
  std::vector<char> ok(out.keys.size(), 0);
  parallel_for(nodes.size(), [&](std::size_t i) {
    Vec z = g.point(nodes[i]);
    double x = C.x(z);
    auto fr = direction_frame(M, C, z);
    std::size_t k = i * per;
    for (double s : fam.s)
      for (std::size_t j = 0; j < fam.omega.nodes.size(); ++j, ++k) {
        FamilyKey key;
        key.node = nodes[i];
        key.z = z;
        key.y = C.y_chart(z);
        key.x = x;
        key.s = s;
        key.lambda = x * s;
        key.omega = fam.omega.nodes[j];
        key.ds = fam.ds;
        key.domega = fam.omega.weights[j];
        key.w = family_velocity(fr, key.lambda, key.omega);
        key.speed = std::sqrt(speed2(M, z, key.w));
        try {
          key.path = trace_geodesic(M, {z, key.w / key.speed}, Direction::Both);
          ok[k] = 1;
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::Trapped) throw;
        }
        out.keys[k] = std::move(key);
      }
  });
  std::vector<FamilyKey> kept;
  kept.reserve(out.keys.size());
  for (std::size_t k = 0; k < out.keys.size(); ++k) {
    if (ok[k])
      kept.push_back(std::move(out.keys[k]));
    else
      ++out.trapped;
  }
  out.keys = std::move(kept);
  return out;
}

}  // namespace geoxray
