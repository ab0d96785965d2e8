#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "json.hpp"

#include "geoxray/normal_op.hpp"
#include "geoxray/transport.hpp"

namespace geoxray {

using json = nlohmann::json;

inline json to_json(const Vec& v) {
  json j = json::array();
  for (int i = 0; i < v.size(); ++i) j.push_back(v[i]);
  return j;
}

inline Vec vec_from_json(const json& j) {
  Vec v(static_cast<int>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<int>(i)] = j[i].get<double>();
  return v;
}

// {re: rows, im: rows}
inline json to_json(const CMat& m) {
  json re = json::array(), im = json::array();
  for (int r = 0; r < m.rows(); ++r) {
    json a = json::array(), b = json::array();
    for (int c = 0; c < m.cols(); ++c) {
      a.push_back(m(r, c).real());
      b.push_back(m(r, c).imag());
    }
    re.push_back(a);
    im.push_back(b);
  }
  return {{"re", re}, {"im", im}};
}

inline CMat cmat_from_rows(const json& re, const json& im) {
  int R = static_cast<int>(re.size());
  int C = R ? static_cast<int>(re[0].size()) : 0;
  CMat m(R, C);
  for (int r = 0; r < R; ++r)
    for (int c = 0; c < C; ++c) m(r, c) = cd(re[r][c].get<double>(), im[r][c].get<double>());
  return m;
}

inline json to_json(const ScatteringData& d) {
  json arr = json::array();
  for (std::size_t i = 0; i < d.points.size(); ++i) {
    auto c = to_json(d.C[i]);
    arr.push_back({{"x", to_json(d.points[i].x)}, {"v", to_json(d.points[i].v)}, {"C_re", c["re"]}, {"C_im", c["im"]}});
  }
  return {{"pair_id", d.pair_id}, {"samples", arr}};
}

inline ScatteringData scattering_from_json(const json& j) {
  ScatteringData d;
  d.pair_id = j.value("pair_id", "");
  for (const auto& s : j.at("samples")) {
    d.points.push_back({vec_from_json(s.at("x")), vec_from_json(s.at("v"))});
    d.C.push_back(cmat_from_rows(s.at("C_re"), s.at("C_im")));
  }
  return d;
}

// ---- files ---------------------------------------------------------------------------------

inline void write_text(const std::filesystem::path& p, const std::string& s) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary);
  if (!f) throw Error(ErrorKind::Config, "cannot write " + p.string());
  f << s;
}

inline std::string read_text(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw Error(ErrorKind::Config, "cannot read " + p.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline void write_json(const std::filesystem::path& p, const json& j) { write_text(p, j.dump(2) + "\n"); }

inline std::string fmt(double v) {
  std::ostringstream o;
  o << std::setprecision(17) << v;
  return o.str();
}

// Grid field: <stem>.json header + <stem>.csv with one row per node, (re, im) interleaved.
inline void write_grid_field(const std::filesystem::path& stem, const GridField& f, const std::string& mode) {
  json h = {{"dims", f.grid.dims},
            {"bounds", {{"lo", to_json(f.grid.lo)}, {"hi", to_json(f.grid.hi)}}},
            {"N", f.comps},
            {"mode", mode},
            {"layout", "row-major, last axis fastest; re,im interleaved"}};
  write_json(stem.string() + ".json", h);
  std::ostringstream o;
  for (std::size_t id = 0; id < f.grid.size(); ++id) {
    for (int c = 0; c < f.comps; ++c) {
      if (c) o << ',';
      o << fmt(f.at(id, c).real()) << ',' << fmt(f.at(id, c).imag());
    }
    o << '\n';
  }
  write_text(stem.string() + ".csv", o.str());
}

inline GridField read_grid_field(const std::filesystem::path& stem, std::string* mode = nullptr) {
  json h = json::parse(read_text(stem.string() + ".json"));
  auto dims = h.at("dims").get<std::vector<int>>();
  Grid g = make_grid(vec_from_json(h["bounds"]["lo"]), vec_from_json(h["bounds"]["hi"]), dims);
  GridField f(g, h.at("N").get<int>());
  if (mode) *mode = h.value("mode", "");
  std::istringstream in(read_text(stem.string() + ".csv"));
  std::string line;
  std::size_t id = 0;
  while (std::getline(in, line) && id < g.size()) {
    std::istringstream ls(line);
    std::string a, b;
    for (int c = 0; c < f.comps; ++c) {
      std::getline(ls, a, ',');
      std::getline(ls, b, ',');
      f.at(id, c) = cd(std::stod(a), std::stod(b));
    }
    ++id;
  }
  if (id != g.size()) throw Error(ErrorKind::Config, "grid field csv is short");
  return f;
}

inline std::string scan_csv(const ScanReport& r) {
  std::ostringstream o;
  int m = r.rows.empty() ? 0 : static_cast<int>(r.rows[0].eta.size());
  o << "xi";
  for (int i = 0; i < m; ++i) o << ",eta" << i;
  o << ",lambda_min,lambda_max,weighted\n";
  for (const auto& row : r.rows) {
    o << fmt(row.xi);
    for (int i = 0; i < m; ++i) o << ',' << fmt(row.eta[i]);
    o << ',' << fmt(row.lambda_min) << ',' << fmt(row.lambda_max) << ',' << fmt(row.weighted) << '\n';
  }
  return o.str();
}

// t, then U entries column-major as re,im pairs
inline std::string evolution_csv(const std::vector<double>& t, const std::vector<CMat>& U) {
  std::ostringstream o;
  int N = U.empty() ? 0 : static_cast<int>(U[0].rows());
  o << "t";
  for (int c = 0; c < N; ++c)
    for (int r = 0; r < N; ++r) o << ",re_" << r << c << ",im_" << r << c;
  o << '\n';
  for (std::size_t k = 0; k < t.size(); ++k) {
    o << fmt(t[k]);
    for (int c = 0; c < N; ++c)
      for (int r = 0; r < N; ++r) o << ',' << fmt(U[k](r, c).real()) << ',' << fmt(U[k](r, c).imag());
    o << '\n';
  }
  return o.str();
}

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  std::ostringstream o;
  o << std::hex << std::setw(16) << std::setfill('0') << v;
  return o.str();
}

}  // namespace geoxray
