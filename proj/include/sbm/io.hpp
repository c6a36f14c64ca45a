#pragma once

// Graph CSV (`i,j,value` with 1-based indices and NA for unobserved dyads)
// and the versioned JSON documents for parameters, ground truth and fits.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "sbm/errors.hpp"
#include "sbm/inference.hpp"
#include "sbm/model.hpp"
#include "sbm/sampling.hpp"
#include "sbm/simulate.hpp"

namespace sbm {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

/// Shortest decimal form that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

// ---------------------------------------------------------------------------
// Graph CSV

inline void write_graph(std::ostream& os, const ObservedGraph& g) {
  os << "i,j,value\n";
  for (int i = 0; i < g.n(); ++i)
    for (int j = 0; j < g.n(); ++j) {
      if (i == j) continue;
      os << i + 1 << ',' << j + 1 << ',';
      if (g.observed(i, j))
        os << format_double(g.value(i, j));
      else
        os << "NA";
      os << '\n';
    }
}

inline void write_graph(const std::string& path, const ObservedGraph& g) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  write_graph(os, g);
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline long parse_index(std::string_view s, std::size_t line) {
  s = trim(s);
  long v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size() || v < 1) throw ParseError("invalid node index '" + std::string(s) + "'", line);
  return v;
}

inline double parse_value(std::string_view s, std::size_t line) {
  s = trim(s);
  double v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size() || !std::isfinite(v))
    throw ParseError("invalid value '" + std::string(s) + "'", line);
  return v;
}

}  // namespace detail

/// n is the largest index seen; dyads without a row are unobserved.
inline ObservedGraph read_graph(std::istream& is, const ExpFamily& family = ExpFamily::bernoulli()) {
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(is, line)) throw ParseError("empty graph file", 1);
  ++lineno;
  if (detail::trim(line) != "i,j,value") throw ParseError("expected header 'i,j,value'", lineno);

  std::map<std::pair<long, long>, std::optional<double>> rows;
  long n = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string_view s = detail::trim(line);
    if (s.empty()) continue;
    const auto c1 = s.find(',');
    const auto c2 = c1 == std::string_view::npos ? c1 : s.find(',', c1 + 1);
    if (c2 == std::string_view::npos || s.find(',', c2 + 1) != std::string_view::npos)
      throw ParseError("expected three comma-separated fields", lineno);
    const long i = detail::parse_index(s.substr(0, c1), lineno);
    const long j = detail::parse_index(s.substr(c1 + 1, c2 - c1 - 1), lineno);
    if (i == j) throw ParseError("self-dyad rows are not allowed", lineno);
    const std::string_view vs = detail::trim(s.substr(c2 + 1));
    std::optional<double> v;
    if (vs != "NA") v = detail::parse_value(vs, lineno);
    if (!rows.emplace(std::make_pair(i, j), v).second) throw ParseError("duplicate dyad", lineno);
    n = std::max({n, i, j});
  }
  const int nn = static_cast<int>(n);
  ObservedGraph g{Matrix::Constant(nn, nn, kUndefined), Mask(nn), family};
  for (const auto& [ij, v] : rows) {
    if (!v) continue;
    const int i = static_cast<int>(ij.first - 1), j = static_cast<int>(ij.second - 1);
    g.mask.set(i, j, true);
    g.values(i, j) = *v;
  }
  return g;
}

inline ObservedGraph read_graph(const std::string& path, const ExpFamily& family = ExpFamily::bernoulli()) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  return read_graph(is, family);
}

// ---------------------------------------------------------------------------
// JSON

inline json matrix_to_json(const Matrix& m) {
  json out = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (std::isfinite(m(i, j)))
        row.push_back(m(i, j));
      else
        row.push_back(nullptr);
    }
    out.push_back(std::move(row));
  }
  return out;
}

inline Matrix matrix_from_json(const json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows == 0 ? 0 : static_cast<Eigen::Index>(j.at(0).size());
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (static_cast<Eigen::Index>(j.at(i).size()) != cols) throw SizeError("ragged matrix in JSON");
    for (Eigen::Index k = 0; k < cols; ++k) {
      const auto& v = j.at(i).at(k);
      m(i, k) = v.is_null() ? kUndefined : v.get<double>();
    }
  }
  return m;
}

inline json vector_to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline Vector vector_from_json(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline json params_to_json(const SbmParams& p) {
  return {{"props", vector_to_json(p.props)},
          {"conn", matrix_to_json(p.conn)},
          {"conn_mean", matrix_to_json(p.means())},
          {"family", std::string(p.family.name())}};
}

/// Reads {props, conn, family}; `conn` holds natural parameters. A document
/// with `conn_mean` but no `conn` is converted from means.
inline SbmParams params_from_json(const json& j) {
  const ExpFamily family = ExpFamily::from_name(j.at("family").get<std::string>());
  Vector props = vector_from_json(j.at("props"));
  SbmParams p = j.contains("conn") ? SbmParams{props, matrix_from_json(j.at("conn")), family}
                                   : SbmParams::from_means(props, matrix_from_json(j.at("conn_mean")), family);
  p.validate();
  return p;
}

inline json design_to_json(const MaskDesign& d) {
  json j{{"type", d.name()}, {"symmetric", d.symmetric}};
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, DoubleStandard>) {
          j["rho0"] = v.rho0;
          j["rho1"] = v.rho1;
        } else {
          j["rho"] = v.rho;
        }
      },
      d.variant);
  return j;
}

inline MaskDesign design_from_json(const json& j) {
  const auto type = j.at("type").get<std::string>();
  MaskDesign d;
  if (type == "dyad")
    d.variant = RandomDyad{j.at("rho").get<double>()};
  else if (type == "node")
    d.variant = RandomNode{j.at("rho").get<double>()};
  else if (type == "double")
    d.variant = DoubleStandard{j.at("rho0").get<double>(), j.at("rho1").get<double>()};
  else
    throw ConfigError("unknown design '" + type + "'");
  d.symmetric = j.value("symmetric", false);
  d.validate();
  return d;
}

inline json truth_to_json(const GroundTruth& t) {
  return {{"schema_version", kSchemaVersion},
          {"n", t.z_star.size()},
          {"params_star", params_to_json(t.params_star)},
          {"z_star", t.z_star.one_based()},
          {"design", design_to_json(t.design)},
          {"seed", t.seed},
          {"full_values", matrix_to_json(t.full_values)}};
}

inline void check_schema(const json& j) {
  if (j.value("schema_version", -1) != kSchemaVersion) throw ConfigError("unsupported or missing schema_version");
}

inline GroundTruth truth_from_json(const json& j) {
  check_schema(j);
  GroundTruth t;
  t.params_star = params_from_json(j.at("params_star"));
  t.z_star = Assignment::from_one_based(j.at("z_star").get<std::vector<int>>(), t.params_star.num_blocks());
  t.design = design_from_json(j.at("design"));
  t.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("full_values")) t.full_values = matrix_from_json(j.at("full_values"));
  return t;
}

inline json fit_to_json(const FitResult& f) {
  json empty = json::array();
  for (const auto& c : f.empty_cells) empty.push_back({c.q + 1, c.l + 1});
  std::vector<int> floored(f.floored_blocks);
  for (int& b : floored) ++b;
  return {{"schema_version", kSchemaVersion},
          {"params", params_to_json(f.params)},
          {"map_labels", f.map_labels.one_based()},
          {"tau", matrix_to_json(f.tau)},
          {"elbo_trace", f.elbo_trace},
          {"n_iters", f.n_iters},
          {"converged", f.converged},
          {"restart_id", f.restart_id},
          {"diagnostics",
           {{"empty_cells", empty},
            {"floored_blocks", floored},
            {"floor_events", f.floor_events},
            {"elbo_steps", f.elbo_steps},
            {"elbo_decreases", f.elbo_decreases}}}};
}

inline FitResult fit_from_json(const json& j) {
  check_schema(j);
  FitResult f;
  f.params = params_from_json(j.at("params"));
  f.map_labels = Assignment::from_one_based(j.at("map_labels").get<std::vector<int>>(), f.params.num_blocks());
  if (j.contains("tau")) f.tau = matrix_from_json(j.at("tau"));
  f.elbo_trace = j.at("elbo_trace").get<std::vector<double>>();
  f.n_iters = j.at("n_iters").get<int>();
  f.converged = j.at("converged").get<bool>();
  f.restart_id = j.at("restart_id").get<int>();
  return f;
}

inline json read_json(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  try {
    return json::parse(is);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed JSON: ") + e.what(), 0);
  }
}

inline void write_json(const std::string& path, const json& j) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  os << j.dump(2) << '\n';
}

}  // namespace sbm
