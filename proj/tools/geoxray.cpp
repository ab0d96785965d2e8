#include <cstdio>
#include <ctime>
#include <iostream>
#include <set>

#include "CLI11.hpp"

#include "geoxray/geoxray.hpp"
#include "geoxray/verify.hpp"

using namespace geoxray;
namespace fs = std::filesystem;

namespace {

// ---- schema ---------------------------------------------------------------------------------

const std::set<std::string> kTasks = {"scatter",     "transform",  "nf-apply", "symbol-scan",      "invert-local",
                                      "layer-strip", "verify",     "app-quantum", "app-polarization", "convexity"};

[[noreturn]] void bad(const std::string& msg) { throw Error(ErrorKind::Config, msg); }

void allow(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
  if (!j.is_object()) bad(where + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : keys) ok = ok || it.key() == k;
    if (!ok) bad("unknown key " + where + "." + it.key());
  }
}

template <class T>
T get(const json& j, const char* key, const std::string& where, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    bad(where + "." + key + " has the wrong type");
  }
}

template <class T>
T need(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) bad("missing " + where + "." + key);
  return get<T>(j, key, where, T{});
}

Vec vec_of(const std::vector<double>& v, int dim, const std::string& what) {
  if (static_cast<int>(v.size()) != dim) bad(what + " must have " + std::to_string(dim) + " entries");
  Vec out(dim);
  for (int i = 0; i < dim; ++i) out[i] = v[i];
  return out;
}

Polynomial poly_of(const json& j, int dim, const std::string& where) {
  if (!j.is_array()) bad(where + " must be a list of terms");
  Polynomial p;
  for (std::size_t i = 0; i < j.size(); ++i) {
    std::string w = where + "[" + std::to_string(i) + "]";
    allow(j[i], w, {"c", "e"});
    auto e = need<std::vector<int>>(j[i], "e", w);
    if (static_cast<int>(e.size()) != dim) bad(w + ".e must have " + std::to_string(dim) + " entries");
    p.terms.push_back({need<double>(j[i], "c", w), e});
  }
  return p;
}

ChartManifold manifold_of(const json& cfg) {
  if (!cfg.contains("manifold")) bad("missing manifold");
  const json& j = cfg["manifold"];
  allow(j, "manifold", {"metric", "dim", "radius", "half", "phi", "entries", "h_step", "t_max"});
  auto metric = need<std::string>(j, "metric", "manifold");
  int dim = get<int>(j, "dim", "manifold", 3);
  if (dim < 2 || dim > kMaxDim) bad("manifold.dim out of range");
  double radius = get<double>(j, "radius", "manifold", 1.0);
  if (!(radius > 0)) bad("manifold.radius must be positive");
  ChartManifold M;
  if (metric == "euclidean_ball") {
    M = euclidean_ball(dim, radius);
  } else if (metric == "euclidean_box") {
    M = euclidean_box(vec_of(need<std::vector<double>>(j, "half", "manifold"), dim, "manifold.half"));
  } else if (metric == "conformal") {
    M = conformal_ball(dim, poly_of(j.value("phi", json::array()), dim, "manifold.phi"), radius);
  } else if (metric == "diag_poly") {
    if (!j.contains("entries") || !j["entries"].is_array() || static_cast<int>(j["entries"].size()) != dim)
      bad("manifold.entries must list one polynomial per coordinate");
    std::vector<Polynomial> e;
    for (int i = 0; i < dim; ++i) e.push_back(poly_of(j["entries"][i], dim, "manifold.entries[" + std::to_string(i) + "]"));
    M = diag_poly_ball(dim, e, radius);
  } else {
    bad("unknown metric " + metric);
  }
  M.h_step = get<double>(j, "h_step", "manifold", M.h_step);
  M.t_max = get<double>(j, "t_max", "manifold", M.t_max);
  return M;
}

ConnectionPair pair_of(const json& cfg, int dim, std::uint64_t seed, int default_N = 1) {
  json j = cfg.value("pair", json::object());
  allow(j, "pair", {"kind", "N", "scale", "seed", "unitary"});
  auto kind = get<std::string>(j, "kind", "pair", "zero");
  int N = get<int>(j, "N", "pair", default_N);
  if (N < 1) bad("pair.N must be positive");
  if (kind == "zero") return zero_pair(dim, N);
  if (kind == "random")
    return random_pair(dim, N, get<double>(j, "scale", "pair", 0.1), get<std::uint64_t>(j, "seed", "pair", seed + 101),
                       get<bool>(j, "unitary", "pair", false));
  bad("unknown pair.kind " + kind);
}

FanSpec fan_of(const json& cfg, std::uint64_t seed) {
  json j = cfg.value("fan", json::object());
  allow(j, "fan", {"n_base", "n_dirs"});
  FanSpec f;
  f.n_base = get<int>(j, "n_base", "fan", 10);
  f.n_dirs = get<int>(j, "n_dirs", "fan", 10);
  f.seed = seed;
  if (f.n_base < 1 || f.n_dirs < 1) bad("fan sizes must be positive");
  return f;
}

CollarSpec collar_of(const json& cfg, const ChartManifold& M) {
  if (!cfg.contains("collar")) bad("missing collar");
  const json& j = cfg["collar"];
  allow(j, "collar", {"p", "c", "F", "eps"});
  CollarOptions o;
  o.F = get<double>(j, "F", "collar", 1.0);
  o.eps_init = get<double>(j, "eps", "collar", 0.0);
  double c = get<double>(j, "c", "collar", 0.2);
  if (!(c > 0) || !(o.F > 0)) bad("collar.c and collar.F must be positive");
  Vec p = vec_of(need<std::vector<double>>(j, "p", "collar"), M.dim, "collar.p");
  return build_collar(M, p, c, o);
}

std::vector<int> dims_of(const json& cfg, int dim, std::vector<int> fallback) {
  json j = cfg.value("grid", json::object());
  allow(j, "grid", {"dims"});
  auto d = get<std::vector<int>>(j, "dims", "grid", fallback);
  if (static_cast<int>(d.size()) != dim) bad("grid.dims must have one entry per coordinate");
  for (int k : d)
    if (k < 2) bad("grid.dims entries must be >= 2");
  return d;
}

NFOptions nf_of(const json& cfg) {
  NFOptions o;
  json j = cfg.value("family", json::object());
  allow(j, "family", {"n_s", "n_omega", "s_max"});
  o.family.n_s = get<int>(j, "n_s", "family", o.family.n_s);
  o.family.n_omega = get<int>(j, "n_omega", "family", o.family.n_omega);
  o.family.s_max = get<double>(j, "s_max", "family", o.family.s_max);
  if (o.family.n_s < 1 || o.family.n_omega < 1) bad("family sizes must be positive");
  auto mode = get<std::string>(cfg, "mode", "config", "scalar");
  if (mode == "pair")
    o.mode = NFMode::Pair;
  else if (mode != "scalar")
    bad("mode must be scalar or pair");
  return o;
}

SolverSpec solver_of(const json& cfg) {
  json j = cfg.value("solver", json::object());
  allow(j, "solver", {"method", "max_iters", "tol", "min_reduction", "noise_level"});
  SolverSpec s;
  s.method = get<std::string>(j, "method", "solver", s.method);
  if (s.method != "cgnr" && s.method != "landweber") bad("solver.method must be cgnr or landweber");
  s.max_iters = get<int>(j, "max_iters", "solver", s.max_iters);
  s.tol = get<double>(j, "tol", "solver", s.tol);
  s.min_reduction = get<double>(j, "min_reduction", "solver", s.min_reduction);
  s.noise_level = get<double>(j, "noise_level", "solver", s.noise_level);
  return s;
}

// Sum of Gaussian bumps, one complex amplitude per component.
struct Source {
  struct Bump {
    Vec center;
    double width = 0.25;
    std::vector<cd> amp;
  };
  std::vector<Bump> bumps;
  int comps = 1;

  CVec operator()(const Vec& z) const {
    CVec r = CVec::Zero(comps);
    for (const auto& b : bumps) {
      double g = std::exp(-(z - b.center).squaredNorm() / (2 * b.width * b.width));
      for (int k = 0; k < comps; ++k) r[k] += b.amp[k] * g;
    }
    return r;
  }
};

Source source_of(const json& cfg, int dim, int comps) {
  if (!cfg.contains("source")) bad("missing source");
  const json& j = cfg["source"];
  allow(j, "source", {"bumps"});
  if (!j.contains("bumps") || !j["bumps"].is_array() || j["bumps"].empty()) bad("source.bumps must be a non-empty list");
  Source s;
  s.comps = comps;
  for (std::size_t i = 0; i < j["bumps"].size(); ++i) {
    const json& b = j["bumps"][i];
    std::string w = "source.bumps[" + std::to_string(i) + "]";
    allow(b, w, {"center", "width", "amplitude", "amplitudes"});
    Source::Bump bb;
    bb.center = vec_of(need<std::vector<double>>(b, "center", w), dim, w + ".center");
    bb.width = get<double>(b, "width", w, 0.25);
    if (!(bb.width > 0)) bad(w + ".width must be positive");
    auto one = [&](const json& x) -> cd {
      if (x.is_number()) return cd(x.get<double>(), 0);
      if (x.is_array() && x.size() == 2 && x[0].is_number() && x[1].is_number())
        return cd(x[0].get<double>(), x[1].get<double>());
      bad(w + " amplitudes must be numbers or [re, im]");
    };
    // amplitude: one value for every component; amplitudes: one value per component
    bb.amp.assign(comps, b.contains("amplitude") ? one(b["amplitude"]) : cd(1, 0));
    if (b.contains("amplitudes")) {
      if (b.contains("amplitude")) bad(w + " sets both amplitude and amplitudes");
      const json& a = b["amplitudes"];
      if (!a.is_array() || a.size() != static_cast<std::size_t>(comps))
        bad(w + ".amplitudes must have " + std::to_string(comps) + " entries");
      for (int k = 0; k < comps; ++k) bb.amp[k] = one(a[k]);
    }
    s.bumps.push_back(bb);
  }
  return s;
}

PhasePoint path_start_of(const json& cfg, const ChartManifold& M) {
  json j = cfg.value("path", json::object());
  allow(j, "path", {"x", "v"});
  Vec x = vec_of(get<std::vector<double>>(j, "x", "path", std::vector<double>(M.dim, 0.0)), M.dim, "path.x");
  std::vector<double> dv(M.dim, 0.0);
  dv[0] = 1;
  Vec v = vec_of(get<std::vector<double>>(j, "v", "path", dv), M.dim, "path.v");
  if (!(v.norm() > 0)) bad("path.v must be nonzero");
  if (!(M.rho(x) >= -M.tol_exit)) bad("path.x is outside the manifold");
  return {x, normalize_g(M, x, v)};
}

// ---- run context ----------------------------------------------------------------------------

struct Run {
  json cfg;
  std::string task;
  std::uint64_t seed = 0;
  fs::path out;
  std::vector<std::string> artifacts;

  void text(const std::string& name, const std::string& s) {
    write_text(out / name, s);
    artifacts.push_back(name);
  }
  void js(const std::string& name, const json& j) {
    write_json(out / name, j);
    artifacts.push_back(name);
  }
  void field(const std::string& stem, const GridField& f, const std::string& mode) {
    write_grid_field(out / stem, f, mode);
    artifacts.push_back(stem + ".json");
    artifacts.push_back(stem + ".csv");
  }
};

json check_json(const Check& c) {
  return {{"id", c.id}, {"name", c.name}, {"pass", c.pass}, {"value", c.value}, {"threshold", c.threshold}, {"detail", c.detail}};
}

std::string history_csv(const std::vector<double>& h) {
  std::ostringstream o;
  o << "iteration,relative_residual\n";
  for (std::size_t i = 0; i < h.size(); ++i) o << i << ',' << fmt(h[i]) << '\n';
  return o.str();
}

// Each task validates everything it needs before returning the work closure, so a dry run
// and a real run reject the same configs.
using Work = std::function<void(Run&)>;

Work plan_scatter(const json& cfg, std::uint64_t seed) {
  auto M = manifold_of(cfg);
  auto pair = pair_of(cfg, M.dim, seed);
  auto fan = fan_of(cfg, seed);
  return [=](Run& r) {
    auto pts = boundary_fan(M, fan);
    auto d = scattering_data(M, pair, pts);
    d.pair_id = r.cfg.value("pair", json::object()).value("kind", "zero");
    double id = 0, un = 0;
    for (auto& c : d.C) {
      CMat I = CMat::Identity(c.rows(), c.cols());
      id = std::max(id, (c - I).norm());
      un = std::max(un, (c.adjoint() * c - I).norm());
    }
    r.js("scattering.json", to_json(d));
    r.js("result.json", {{"samples", d.C.size()}, {"max_identity_defect", id}, {"max_unitarity_defect", un}});
  };
}

Work plan_transform(const json& cfg, std::uint64_t seed) {
  auto M = manifold_of(cfg);
  auto pair = pair_of(cfg, M.dim, seed);
  auto fan = fan_of(cfg, seed);
  auto src = source_of(cfg, M.dim, pair.N);
  return [=](Run& r) {
    auto pts = boundary_fan(M, fan);
    SectionPair s;
    s.N = pair.N;
    s.f = src;
    int n = M.dim, N = pair.N;
    s.alpha = [n, N](const Vec&) { return std::vector<CVec>(n, CVec::Zero(N)); };
    std::vector<CVec> val(pts.size());
    parallel_for(pts.size(), [&](std::size_t i) {
      val[i] = transform_attenuated(M, pair, s, trace_geodesic(M, pts[i], Direction::Forward));
    });
    std::ostringstream o;
    o << "i";
    for (int k = 0; k < n; ++k) o << ",x" << k;
    for (int k = 0; k < n; ++k) o << ",v" << k;
    for (int k = 0; k < N; ++k) o << ",re" << k << ",im" << k;
    o << '\n';
    double mx = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      o << i;
      for (int k = 0; k < n; ++k) o << ',' << fmt(pts[i].x[k]);
      for (int k = 0; k < n; ++k) o << ',' << fmt(pts[i].v[k]);
      for (int k = 0; k < N; ++k) o << ',' << fmt(val[i][k].real()) << ',' << fmt(val[i][k].imag());
      o << '\n';
      mx = std::max(mx, val[i].norm());
    }
    r.text("transform.csv", o.str());
    r.js("result.json", {{"samples", pts.size()}, {"max_norm", mx}});
  };
}

Work plan_nf_apply(const json& cfg, std::uint64_t seed) {
  auto M = manifold_of(cfg);
  auto nf = nf_of(cfg);
  auto pair = pair_of(cfg, M.dim, seed);
  auto C = collar_of(cfg, M);
  auto dims = dims_of(cfg, M.dim, {16, 16, 16});
  auto src = source_of(cfg, M.dim, pair.N);
  return [=](Run& r) {
    Grid g = collar_grid(M, C, dims);
    auto op = assemble_NF(M, pair, C, g, nf);
    CVec u;
    if (nf.mode == NFMode::Scalar) {
      u = sample_scalar(op, src);
    } else {
      SectionPair s;
      s.N = pair.N;
      s.f = src;
      int n = M.dim, N = pair.N;
      s.alpha = [n, N](const Vec&) { return std::vector<CVec>(n, CVec::Zero(N)); };
      u = sample_section(M, op, s);
    }
    CVec y = op.apply(u);
    std::string mode = nf.mode == NFMode::Scalar ? "scalar" : "pair";
    r.field("input", op.extend(u), mode);
    r.field("output", op.extend(y), mode);
    r.js("result.json", {{"mode", mode}, {"unknowns", op.size()}, {"active_nodes", op.nodes.size()},
                         {"input_norm", u.norm()}, {"output_norm", y.norm()}, {"collar_c", C.c}, {"collar_eps", C.eps}});
  };
}

Work plan_symbol_scan(const json& cfg, std::uint64_t seed) {
  auto M = manifold_of(cfg);
  auto nf = nf_of(cfg);
  json j = cfg.value("scan", json::object());
  allow(j, "scan", {"model", "F", "alpha", "xi_max", "eta_max", "n_xi", "n_eta", "n_eta_dirs", "n_dirs", "restricted",
                    "boundary"});
  ScanSpec s;
  s.xi_max = get<double>(j, "xi_max", "scan", s.xi_max);
  s.eta_max = get<double>(j, "eta_max", "scan", s.eta_max);
  s.n_xi = get<int>(j, "n_xi", "scan", s.n_xi);
  s.n_eta = get<int>(j, "n_eta", "scan", s.n_eta);
  s.n_eta_dirs = get<int>(j, "n_eta_dirs", "scan", s.n_eta_dirs);
  s.sym.n_dirs = get<int>(j, "n_dirs", "scan", s.sym.n_dirs);
  s.restricted = get<bool>(j, "restricted", "scan", s.restricted);
  s.boundary = get<bool>(j, "boundary", "scan", s.boundary);
  auto model = get<std::string>(j, "model", "scan", "flat");
  BoundaryModel b;
  if (model == "flat") {
    b = flat_model(M.dim, get<double>(j, "F", "scan", 1.0), get<double>(j, "alpha", "scan", 0.5));
  } else if (model == "collar") {
    auto C = collar_of(cfg, M);
    b = collar_model(M, C, pair_of(cfg, M.dim, seed));
  } else {
    bad("scan.model must be flat or collar");
  }
  return [=](Run& r) {
    auto rep = ellipticity_scan(b, nf.mode, s);
    r.text("scan.csv", scan_csv(rep));
    r.js("result.json", {{"mode", nf.mode == NFMode::Scalar ? "scalar" : "pair"},
                         {"restricted", s.restricted},
                         {"points", rep.rows.size()},
                         {"c_min", rep.c_min},
                         {"ratio_min", rep.ratio_min},
                         {"worst", {{"xi", rep.worst.xi}, {"eta", to_json(rep.worst.eta)}}}});
  };
}

Work plan_invert_local(const json& cfg, std::uint64_t seed) {
  auto M = manifold_of(cfg);
  auto nf = nf_of(cfg);
  if (nf.mode != NFMode::Scalar) bad("invert-local runs in scalar mode");
  auto pair = pair_of(cfg, M.dim, seed);
  auto C = collar_of(cfg, M);
  auto dims = dims_of(cfg, M.dim, {20, 20, 20});
  auto src = source_of(cfg, M.dim, pair.N);
  auto sp = solver_of(cfg);
  json nz = cfg.value("noise", json::object());
  allow(nz, "noise", {"level"});
  double noise = get<double>(nz, "level", "noise", 0.0);
  double x_inner = get<double>(cfg, "x_inner", "config", 0.25 * C.c);
  return [=](Run& r) {
    Grid g = collar_grid(M, C, dims);
    auto op = assemble_NF(M, pair, C, g, nf);
    CVec ft = sample_scalar(op, src);
    CVec data = add_noise(op.apply(ft), noise, seed + 7);
    auto rep = solve_local_scalar(op, data, ft, sp, x_inner);
    r.field("truth", op.extend(ft), "scalar");
    r.field("recovered", op.extend(rep.solution), "scalar");
    r.text("history.csv", history_csv(rep.residual_history));
    r.js("result.json", {{"rel_error_interior", rep.rel_error_interior},
                         {"iterations", rep.iterations},
                         {"unknowns", rep.unknowns},
                         {"x_inner", x_inner},
                         {"noise_level", noise}});
  };
}

Work plan_layer_strip(const json& cfg, std::uint64_t) {
  auto M = manifold_of(cfg);
  json j = cfg.value("layers", json::object());
  allow(j, "layers", {"levels", "overlap", "margin", "glue_tol", "center", "r_exclude"});
  LayerSchedule sch;
  sch.levels = get<std::vector<double>>(j, "levels", "layers", {1.0, 0.78, 0.56, 0.34, 0.12});
  if (sch.levels.size() < 2) bad("layers.levels needs at least two levels");
  for (std::size_t i = 1; i < sch.levels.size(); ++i)
    if (!(sch.levels[i] < sch.levels[i - 1])) bad("layers.levels must decrease");
  sch.overlap = get<double>(j, "overlap", "layers", sch.overlap);
  sch.margin = get<double>(j, "margin", "layers", sch.margin);
  sch.glue_tol = get<double>(j, "glue_tol", "layers", sch.glue_tol);
  Vec center = vec_of(get<std::vector<double>>(j, "center", "layers", std::vector<double>(M.dim, 0.0)), M.dim, "layers.center");
  StripOptions o;
  o.r_exclude = get<double>(j, "r_exclude", "layers", o.r_exclude);
  o.dims = dims_of(cfg, M.dim, o.dims);
  o.solver = solver_of(cfg);
  o.nf.family = nf_of(cfg).family;
  auto src = source_of(cfg, M.dim, 1);
  return [=](Run& r) {
    auto rep = layer_strip(M, center, sch, src, o);
    std::ostringstream csv;
    csv << "layer,t_hi,t_lo,unknowns,iterations,rel_error,overlap_mismatch\n";
    for (std::size_t i = 0; i < rep.layers.size(); ++i) {
      const auto& l = rep.layers[i];
      csv << i << ',' << fmt(l.t_hi) << ',' << fmt(l.t_lo) << ',' << l.unknowns << ',' << l.iterations << ','
          << fmt(l.rel_error) << ',' << fmt(l.overlap_mismatch) << '\n';
    }
    r.text("layers.csv", csv.str());
    r.field("recovered", rep.recovered, "scalar");
    r.js("result.json", {{"rel_error_global", rep.rel_error_global}, {"r_exclude", rep.r_exclude}, {"layers", rep.layers.size()}});
  };
}

Work plan_verify(const json& cfg, std::uint64_t seed) {
  manifold_of(cfg);  // the suite runs on its own reference geometries; the metric is still required
  json j = cfg.value("verify", json::object());
  allow(j, "verify", {"checks", "n_pairs", "n_p", "n_geo"});
  auto checks = get<std::vector<std::string>>(j, "checks", "verify", {"gauge", "kernel", "pseudo", "unitarity"});
  static const std::set<std::string> known = {"geometry", "scattering", "gauge",      "kernel",     "pseudo",
                                              "symbols",  "local-scalar", "local-pair", "layer-strip", "connection",
                                              "convexity", "applications", "stability", "unitarity"};
  for (auto& c : checks)
    if (!known.count(c)) bad("unknown check " + c);
  int n_pairs = get<int>(j, "n_pairs", "verify", 20);
  int n_p = get<int>(j, "n_p", "verify", 100);
  int n_geo = get<int>(j, "n_geo", "verify", 100);
  return [=](Run& r) {
    std::vector<Check> out;
    LocalScalarResult ls;
    bool have_ls = false;
    auto local = [&] {
      if (!have_ls) ls = run_local_scalar();
      have_ls = true;
      return ls;
    };
    for (auto& name : checks) {
      if (name == "geometry") out.push_back(check_geometry(40, 25, seed));
      if (name == "scattering") out.push_back(check_scattering(seed));
      if (name == "gauge") out.push_back(check_gauge_invariance(n_pairs, seed));
      if (name == "kernel") out.push_back(check_kernel_annihilation(n_p, n_geo, seed));
      if (name == "pseudo") out.push_back(check_pseudo_linearization(5, seed));
      if (name == "symbols") out.push_back(check_symbols());
      if (name == "local-scalar") out.push_back(check_local_scalar(local()));
      if (name == "local-pair") out.push_back(check_local_pair());
      if (name == "layer-strip") out.push_back(check_layer_strip());
      if (name == "connection") out.push_back(check_connection_step());
      if (name == "convexity") out.push_back(check_convexity());
      if (name == "applications") out.push_back(check_applications());
      if (name == "stability") out.push_back(check_stability(local()));
      if (name == "unitarity") out.push_back(check_unitarity(5, seed));
      const auto& c = out.back();
      std::printf("%-4s %-36s %s\n", c.pass ? "PASS" : "FAIL", c.name.c_str(), c.detail.c_str());
    }
    json arr = json::array();
    std::ostringstream csv;
    csv << "id,name,pass,value,threshold\n";
    int passed = 0;
    for (auto& c : out) {
      arr.push_back(check_json(c));
      csv << c.id << ',' << c.name << ',' << (c.pass ? 1 : 0) << ',' << fmt(c.value) << ',' << fmt(c.threshold) << '\n';
      passed += c.pass;
    }
    r.text("verify.csv", csv.str());
    r.js("verify.json", {{"checks", arr}, {"passed", passed}, {"total", out.size()}});
  };
}

TensorField tensor_of(const json& cfg, int n, std::uint64_t seed) {
  json j = cfg.value("tensor", json::object());
  allow(j, "tensor", {"scale", "seed"});
  double scale = get<double>(j, "scale", "tensor", 1.0);
  std::mt19937_64 rng(get<std::uint64_t>(j, "seed", "tensor", seed + 303));
  std::normal_distribution<double> G(0, scale);
  // f(x) = S₀ + Σ x_k S_k
  std::vector<CMat> S(n + 1, CMat(n, n));
  for (auto& m : S)
    for (int i = 0; i < n * n; ++i) m.data()[i] = cd(G(rng), G(rng));
  return [S, n](const Vec& x) {
    CMat m = S[0];
    for (int k = 0; k < n; ++k) m += x[k] * S[k + 1];
    return m;
  };
}

Work plan_app_quantum(const json& cfg, std::uint64_t seed) {
  auto M = manifold_of(cfg);
  json j = cfg.value("hamiltonian", json::object());
  allow(j, "hamiltonian", {"N", "scale", "seed", "hermitian"});
  int N = get<int>(j, "N", "hamiltonian", 2);
  if (N < 1) bad("hamiltonian.N must be positive");
  auto H = random_hamiltonian(M.dim, N, get<double>(j, "scale", "hamiltonian", 1.0),
                              get<std::uint64_t>(j, "seed", "hamiltonian", seed + 202),
                              get<bool>(j, "hermitian", "hamiltonian", true));
  auto p0 = path_start_of(cfg, M);
  return [=](Run& r) {
    auto path = trace_geodesic(M, p0, Direction::Forward);
    auto ev = quantum_evolve(M, H, path);
    r.text("evolution.csv", evolution_csv(ev.t, ev.U));
    r.js("result.json", {{"length", path.length()},
                         {"steps", ev.t.size()},
                         {"unitarity_defect", ev.unitarity_defect},
                         {"hermitian_defect", hermitian_defect(H, p0.x)},
                         {"U_exit", to_json(ev.U.back())}});
  };
}

Work plan_app_polarization(const json& cfg, std::uint64_t seed) {
  auto M = manifold_of(cfg);
  auto f = tensor_of(cfg, M.dim, seed);
  auto p0 = path_start_of(cfg, M);
  json j = cfg.value("sampler", json::object());
  allow(j, "sampler", {"n", "trials"});
  int sn = get<int>(j, "n", "sampler", 0), trials = get<int>(j, "trials", "sampler", 1000);
  if (sn != 0 && sn < 3) bad("sampler.n must be at least 3");
  return [=](Run& r) {
    auto path = trace_geodesic(M, p0, Direction::Forward);
    auto ev = polarization_evolve(M, f, path);
    r.text("evolution.csv", evolution_csv(ev.t, ev.U));
    json res = {{"length", path.length()}, {"steps", ev.t.size()}, {"U_exit", to_json(ev.U.back())}};
    if (sn) {
      auto s = polarization_ellipticity_sampler(sn, trials, seed);
      json fails = json::array();
      for (auto& x : s.failures) fails.push_back({{"trial", x.trial}, {"reason", x.reason}});
      r.js("sampler.json", {{"n", s.n},
                            {"trials", s.trials},
                            {"successes", s.successes},
                            {"success_rate", s.success_rate},
                            {"max_residual", s.max_residual},
                            {"failures", fails}});
      res["sampler_success_rate"] = s.success_rate;
    }
    r.js("result.json", res);
  };
}

Work plan_convexity(const json& cfg, std::uint64_t seed) {
  auto M = manifold_of(cfg);
  json j = cfg.value("convexity", json::object());
  allow(j, "convexity", {"riccati", "margin_points"});
  std::vector<std::array<double, 3>> rc;
  if (j.contains("riccati")) {
    if (!j["riccati"].is_array()) bad("convexity.riccati must be a list");
    for (std::size_t i = 0; i < j["riccati"].size(); ++i) {
      std::string w = "convexity.riccati[" + std::to_string(i) + "]";
      allow(j["riccati"][i], w, {"kappa", "lambda", "R"});
      rc.push_back({need<double>(j["riccati"][i], "kappa", w), need<double>(j["riccati"][i], "lambda", w),
                    need<double>(j["riccati"][i], "R", w)});
    }
  }
  int mp = get<int>(j, "margin_points", "convexity", 20);
  return [=](Run& r) {
    std::ostringstream a;
    a << "kappa,lambda,R,verdict,threshold,collar_depth,branch\n";
    for (auto& q : rc) {
      auto c = riccati_classify(q[0], q[1], q[2]);
      a << fmt(c.kappa) << ',' << fmt(c.lambda) << ',' << fmt(c.R) << ','
        << (c.verdict == Verdict::GlobalConvex ? "GlobalConvex" : "CollarOnly") << ',' << fmt(c.threshold) << ','
        << fmt(c.collar_depth) << ',' << c.branch << '\n';
    }
    r.text("riccati.csv", a.str());
    auto fan = boundary_fan(M, {std::max(mp, 1), 1, seed, {}});
    std::ostringstream b;
    b << "i";
    for (int k = 0; k < M.dim; ++k) b << ",x" << k;
    b << ",margin\n";
    double lo = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < fan.size(); ++i) {
      double m = boundary_convexity_margin(M, fan[i].x);
      lo = std::min(lo, m);
      b << i;
      for (int k = 0; k < M.dim; ++k) b << ',' << fmt(fan[i].x[k]);
      b << ',' << fmt(m) << '\n';
    }
    r.text("margins.csv", b.str());
    r.js("result.json", {{"riccati_cases", rc.size()}, {"boundary_points", fan.size()}, {"min_boundary_margin", lo}});
  };
}

Work plan(const std::string& task, const json& cfg, std::uint64_t seed) {
  if (task == "scatter") return plan_scatter(cfg, seed);
  if (task == "transform") return plan_transform(cfg, seed);
  if (task == "nf-apply") return plan_nf_apply(cfg, seed);
  if (task == "symbol-scan") return plan_symbol_scan(cfg, seed);
  if (task == "invert-local") return plan_invert_local(cfg, seed);
  if (task == "layer-strip") return plan_layer_strip(cfg, seed);
  if (task == "verify") return plan_verify(cfg, seed);
  if (task == "app-quantum") return plan_app_quantum(cfg, seed);
  if (task == "app-polarization") return plan_app_polarization(cfg, seed);
  return plan_convexity(cfg, seed);
}

std::string now_utc() {
  std::time_t t = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

std::string compiler() {
#if defined(__clang__)
  return "clang " __clang_version__;
#elif defined(__GNUC__)
  return "gcc " __VERSION__;
#else
  return "unknown";
#endif
}

void print_error(const std::string& kind, const std::string& msg) {
  std::cerr << json{{"error", kind}, {"message", msg}}.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"geoxray: geodesic X-ray transforms, normal operators and inversion"};
  app.require_subcommand(1);
  int threads = 0;
  std::string out_dir, config;
  std::uint64_t seed_flag = 0;
  bool dry = false;
  auto* run = app.add_subcommand("run", "run the task named in a JSON config");
  run->add_option("config", config, "config file")->required();
  run->add_option("--threads", threads, "worker cap (default: GEOXRAY_THREADS or hardware)")->check(CLI::PositiveNumber);
  run->add_option("--out", out_dir, "output directory (overrides output.dir)");
  auto* seed_opt = run->add_option("--seed", seed_flag, "rng seed (overrides seed)");
  run->add_flag("--dry-run", dry, "validate the config and exit");
  app.set_version_flag("--version", std::string(version));
  CLI11_PARSE(app, argc, argv);

  if (threads > 0) set_num_threads(threads);
  auto t0 = std::chrono::steady_clock::now();
  auto secs = [](auto a, auto b) { return std::chrono::duration<double>(b - a).count(); };

  Run r;
  std::string raw;
  Work work;
  try {
    raw = read_text(config);
    try {
      r.cfg = json::parse(raw);
    } catch (const json::parse_error& e) {
      bad(std::string("config is not valid JSON: ") + e.what());
    }
    allow(r.cfg, "config",
          {"task", "seed", "mode", "x_inner", "manifold", "pair", "fan", "collar", "grid", "family", "solver", "source",
           "noise", "layers", "scan", "verify", "path", "hamiltonian", "tensor", "sampler", "convexity", "output"});
    r.task = need<std::string>(r.cfg, "task", "config");
    if (!kTasks.count(r.task)) bad("unknown task " + r.task);
    r.seed = seed_opt->count() ? seed_flag : get<std::uint64_t>(r.cfg, "seed", "config", 1);
    json o = r.cfg.value("output", json::object());
    allow(o, "output", {"dir"});
    r.out = out_dir.empty() ? get<std::string>(o, "dir", "output", "geoxray_out") : out_dir;
    work = plan(r.task, r.cfg, r.seed);
  } catch (const Error& e) {
    print_error(to_string(e.kind()), e.what());
    return e.kind() == ErrorKind::Config ? 1 : 2;
  } catch (const std::exception& e) {
    print_error("ConfigError", e.what());
    return 1;
  }
  auto t1 = std::chrono::steady_clock::now();
  std::string hash = hex64(fnv1a(raw));
  if (dry) {
    std::cout << "config ok: task " << r.task << ", hash " << hash << '\n';
    return 0;
  }

  int code = 0;
  json err;
  try {
    work(r);
  } catch (const Error& e) {
    code = e.kind() == ErrorKind::Config ? 1 : 2;
    err = {{"error", to_string(e.kind())}, {"message", e.what()}, {"task", r.task}, {"exit_code", code}};
  } catch (const std::exception& e) {
    code = 2;
    err = {{"error", "NumericalError"}, {"message", e.what()}, {"task", r.task}, {"exit_code", code}};
  }
  auto t2 = std::chrono::steady_clock::now();
  try {
    if (code) r.js("error.json", err);
    r.js("manifest.json", {{"task", r.task},
                           {"config", fs::absolute(config).string()},
                           {"config_hash_fnv1a64", hash},
                           {"seed", r.seed},
                           {"threads", num_threads()},
                           {"exit_code", code},
                           {"versions",
                            {{"geoxray", version},
                             {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                           std::to_string(EIGEN_MINOR_VERSION)},
                             {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                                   std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                                   std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
                             {"cli11", CLI11_VERSION},
                             {"compiler", compiler()},
                             {"cplusplus", __cplusplus}}},
                           {"timings_s", {{"validate", secs(t0, t1)}, {"task", secs(t1, t2)}, {"total", secs(t0, t2)}}},
                           {"started_utc", now_utc()},
                           {"artifacts", r.artifacts}});
  } catch (const std::exception& e) {
    print_error("IOError", e.what());
    return 2;
  }
  if (code) print_error(err["error"], err["message"]);
  return code;
}
