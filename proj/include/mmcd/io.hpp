#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "mmcd/error.hpp"
#include "mmcd/estimator.hpp"
#include "mmcd/matrix_stack.hpp"
#include "mmcd/param_set.hpp"
#include "mmcd/simlab.hpp"

namespace mmcd::io {

using nlohmann::json;

/// Shortest form that still round-trips (17 significant digits).
inline std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string format_summary(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

/// Writes to a sibling temporary file and renames it over `path`.
inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot open " + tmp.string() + " for writing");
    out << content;
    out.flush();
    if (!out) throw InputError("failed writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw InputError("cannot replace " + path.string() + ": " + ec.message());
  }
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace detail {

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline bool parse_number(std::string_view tok, double& out) {
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return ec == std::errc() && ptr == tok.data() + tok.size() && std::isfinite(out);
}

inline std::size_t parse_count(std::string_view tok, const std::string& where) {
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size())
    throw InputError(where + ": expected a non-negative integer, got '" + std::string(tok) + "'");
  return v;
}

inline std::vector<std::string_view> lines_of(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    out.push_back(line);
    start = end + 1;
  }
  if (!out.empty() && out.back().empty()) out.pop_back();
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// MXT
// ---------------------------------------------------------------------------

/// Parses `#mxt v1 n=<n> p=<p> q=<q>` followed by n blocks of p lines with q
/// numbers each; blocks are separated by blank lines. Errors name the line.
inline MatrixStack parse_mxt(std::string_view text, const std::string& source = "<mxt>") {
  const auto lines = detail::lines_of(text);
  auto where = [&](std::size_t line_no) { return source + ":" + std::to_string(line_no); };
  if (lines.empty()) throw InputError(source + ": empty file");

  const auto header = detail::split_ws(lines[0]);
  if (header.size() != 5 || header[0] != "#mxt" || header[1] != "v1")
    throw InputError(where(1) + ": expected header '#mxt v1 n=<n> p=<p> q=<q>'");
  std::size_t dims[3] = {0, 0, 0};
  const char* keys[3] = {"n=", "p=", "q="};
  for (int k = 0; k < 3; ++k) {
    if (!header[2 + k].starts_with(keys[k]))
      throw InputError(where(1) + ": expected '" + keys[k] + "...' in header");
    dims[k] = detail::parse_count(header[2 + k].substr(2), where(1));
  }
  const auto [n, p, q] = dims;
  if (n == 0 || p == 0 || q == 0) throw InputError(where(1) + ": n, p and q must be positive");

  std::vector<double> data;
  data.reserve(n * p * q);
  std::size_t li = 1;
  for (std::size_t obs = 0; obs < n; ++obs) {
    if (obs > 0) {
      if (li >= lines.size() || !detail::trim(lines[li]).empty())
        throw InputError(where(li + 1) + ": expected a blank line before observation " + std::to_string(obs));
      ++li;
    }
    for (std::size_t r = 0; r < p; ++r, ++li) {
      if (li >= lines.size())
        throw InputError(where(li + 1) + ": file ends inside observation " + std::to_string(obs) +
                         " (declared n=" + std::to_string(n) + ")");
      const auto toks = detail::split_ws(lines[li]);
      if (toks.size() != q)
        throw InputError(where(li + 1) + ": expected " + std::to_string(q) + " values, found " +
                         std::to_string(toks.size()));
      for (auto tok : toks) {
        double v = 0.0;
        if (!detail::parse_number(tok, v))
          throw InputError(where(li + 1) + ": '" + std::string(tok) + "' is not a finite number");
        data.push_back(v);
      }
    }
  }
  for (; li < lines.size(); ++li)
    if (!detail::trim(lines[li]).empty())
      throw InputError(where(li + 1) + ": content after the declared " + std::to_string(n) + " observations");
  return MatrixStack(p, q, std::move(data));
}

inline MatrixStack read_mxt(const std::filesystem::path& path) { return parse_mxt(read_file(path), path.string()); }

inline std::string format_mxt(const MatrixStack& stack) {
  std::string out = "#mxt v1 n=" + std::to_string(stack.n()) + " p=" + std::to_string(stack.p()) +
                    " q=" + std::to_string(stack.q()) + "\n";
  for (std::size_t i = 0; i < stack.n(); ++i) {
    if (i > 0) out += '\n';
    const auto x = stack[i];
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      for (Eigen::Index c = 0; c < x.cols(); ++c) {
        if (c > 0) out += ' ';
        out += format_double(x(r, c));
      }
      out += '\n';
    }
  }
  return out;
}

inline void write_mxt(const std::filesystem::path& path, const MatrixStack& stack) {
  atomic_write(path, format_mxt(stack));
}

// ---------------------------------------------------------------------------
// CSV observations
// ---------------------------------------------------------------------------

/// One observation per line holding rows*cols values of vec(X), i.e. the
/// matrix read column by column. Lines starting with '#' are comments; a
/// first data line that is not numeric is taken as a header.
inline MatrixStack parse_csv_stack(std::string_view text, std::size_t rows, std::size_t cols,
                                   const std::string& source = "<csv>") {
  if (rows == 0 || cols == 0) throw PreconditionError("--rows and --cols must be positive");
  const std::size_t pq = rows * cols;
  const auto lines = detail::lines_of(text);
  std::vector<double> data;
  bool first = true;
  std::vector<double> vals;
  for (std::size_t li = 0; li < lines.size(); ++li) {
    const auto line = detail::trim(lines[li]);
    if (line.empty() || line.front() == '#') continue;
    vals.clear();
    bool numeric = true;
    std::size_t start = 0;
    std::size_t fields = 0;
    while (true) {
      std::size_t end = line.find(',', start);
      if (end == std::string_view::npos) end = line.size();
      const auto tok = detail::trim(line.substr(start, end - start));
      double v = 0.0;
      ++fields;
      if (detail::parse_number(tok, v)) vals.push_back(v);
      else numeric = false;
      if (end == line.size()) break;
      start = end + 1;
    }
    const bool was_first = first;
    first = false;
    if (!numeric) {
      if (was_first) continue;
      throw InputError(source + ":" + std::to_string(li + 1) + ": non-numeric field");
    }
    if (fields != pq)
      throw InputError(source + ":" + std::to_string(li + 1) + ": expected " + std::to_string(pq) +
                       " values (rows*cols), found " + std::to_string(fields));
    // vec(X) -> row-major storage
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) data.push_back(vals[c * rows + r]);
  }
  if (data.empty()) throw InputError(source + ": no observations");
  return MatrixStack(rows, cols, std::move(data));
}

inline MatrixStack read_csv_stack(const std::filesystem::path& path, std::size_t rows, std::size_t cols) {
  return parse_csv_stack(read_file(path), rows, cols, path.string());
}

// ---------------------------------------------------------------------------
// Fit JSON
// ---------------------------------------------------------------------------

inline json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Matrix matrix_from_json(const json& j, Eigen::Index rows, Eigen::Index cols, const std::string& what) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows)
    throw InputError(what + ": expected " + std::to_string(rows) + " rows");
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const json& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      throw InputError(what + ": row " + std::to_string(r) + " must have " + std::to_string(cols) + " entries");
    for (Eigen::Index c = 0; c < cols; ++c) {
      const json& v = row[static_cast<std::size_t>(c)];
      if (!v.is_number()) throw InputError(what + ": non-numeric entry");
      m(r, c) = v.get<double>();
    }
  }
  return m;
}

inline json params_to_json(const ParamSet& s) {
  return {{"mean", matrix_to_json(s.mean)},
          {"sigma_row", matrix_to_json(s.sigma_row)},
          {"sigma_col", matrix_to_json(s.sigma_col)}};
}

inline ParamSet params_from_json(const json& j, Eigen::Index p, Eigen::Index q, const std::string& what) {
  if (!j.is_object()) throw InputError(what + " must be an object");
  for (const char* k : {"mean", "sigma_row", "sigma_col"})
    if (!j.contains(k)) throw InputError(what + "." + k + " is missing");
  ParamSet s{matrix_from_json(j["mean"], p, q, what + ".mean"),
             matrix_from_json(j["sigma_row"], p, p, what + ".sigma_row"),
             matrix_from_json(j["sigma_col"], q, q, what + ".sigma_col")};
  try {
    s.validate();
  } catch (const Error& e) {
    throw InputError(what + ": " + e.what());
  }
  return s;
}

/// Everything a fit file carries: the shape, the estimate and the settings
/// that produced it.
struct FitRecord {
  std::size_t n = 0;
  std::size_t p = 0;
  std::size_t q = 0;
  std::size_t h = 0;
  ParamSet raw;
  ParamSet reweighted;
  std::vector<std::size_t> h_subset;
  std::vector<std::uint8_t> weights;
  std::vector<double> distances_raw;
  std::vector<double> distances_reweighted;
  double c_raw = 1.0;
  double c_rew = 1.0;
  double objective = 0.0;
  MMCDConfig config;

  static FitRecord from_fit(const MMCDFit& fit, std::size_t n, std::size_t p, std::size_t q,
                            const MMCDConfig& cfg) {
    return {n,        p,          q,        fit.h,     fit.raw, fit.reweighted, fit.h_subset, fit.weights,
            fit.distances_raw, fit.distances_reweighted, fit.c_raw, fit.c_rew, fit.objective, cfg};
  }
};

inline json config_to_json(const MMCDConfig& c, std::size_t h) {
  return {{"h", h},
          {"n_initial_subsets", c.n_initial_subsets},
          {"n_keep", c.n_keep},
          {"initial_iters", c.initial_iters},
          {"cstep_tol", c.cstep_tol},
          {"seed", c.rng_seed},
          {"subsampling", c.subsampling == Subsampling::automatic ? "auto" : "off"},
          {"converge_trials", c.converge_trials},
          {"reweight_quantile", c.reweight_quantile},
          {"detection_quantile", c.detection_quantile}};
}

inline json fit_to_json(const FitRecord& f) {
  json w = json::array();
  for (auto v : f.weights) w.push_back(static_cast<int>(v));
  return {{"format", "mmcd-fit v1"},
          {"shape", {{"n", f.n}, {"p", f.p}, {"q", f.q}}},
          {"h", f.h},
          {"raw", params_to_json(f.raw)},
          {"reweighted", params_to_json(f.reweighted)},
          {"h_subset", f.h_subset},
          {"weights", std::move(w)},
          {"distances_raw", f.distances_raw},
          {"distances_reweighted", f.distances_reweighted},
          {"c_raw", f.c_raw},
          {"c_rew", f.c_rew},
          {"objective", f.objective},
          {"config", config_to_json(f.config, f.h)}};
}

inline FitRecord fit_from_json(const json& j) {
  try {
    if (!j.is_object() || j.value("format", "") != "mmcd-fit v1") throw InputError("not an mmcd fit file");
    FitRecord f;
    const json& shape = j.at("shape");
    f.n = shape.at("n").get<std::size_t>();
    f.p = shape.at("p").get<std::size_t>();
    f.q = shape.at("q").get<std::size_t>();
    if (f.n == 0 || f.p == 0 || f.q == 0) throw InputError("shape entries must be positive");
    const auto ip = static_cast<Eigen::Index>(f.p);
    const auto iq = static_cast<Eigen::Index>(f.q);
    f.h = j.at("h").get<std::size_t>();
    f.raw = params_from_json(j.at("raw"), ip, iq, "raw");
    f.reweighted = params_from_json(j.at("reweighted"), ip, iq, "reweighted");
    f.h_subset = j.at("h_subset").get<std::vector<std::size_t>>();
    for (int v : j.at("weights").get<std::vector<int>>()) {
      if (v != 0 && v != 1) throw InputError("weights must be 0 or 1");
      f.weights.push_back(static_cast<std::uint8_t>(v));
    }
    f.distances_raw = j.at("distances_raw").get<std::vector<double>>();
    f.distances_reweighted = j.at("distances_reweighted").get<std::vector<double>>();
    if (f.h_subset.size() != f.h || f.weights.size() != f.n || f.distances_raw.size() != f.n ||
        f.distances_reweighted.size() != f.n)
      throw InputError("array lengths do not match the declared shape");
    for (std::size_t i : f.h_subset)
      if (i >= f.n) throw InputError("h_subset index out of range");
    f.c_raw = j.at("c_raw").get<double>();
    f.c_rew = j.at("c_rew").get<double>();
    f.objective = j.at("objective").get<double>();
    const json& c = j.at("config");
    f.config.h = c.at("h").get<std::size_t>();
    f.config.n_initial_subsets = c.at("n_initial_subsets").get<std::size_t>();
    f.config.n_keep = c.at("n_keep").get<std::size_t>();
    f.config.initial_iters = c.at("initial_iters").get<int>();
    f.config.cstep_tol = c.at("cstep_tol").get<double>();
    f.config.rng_seed = c.at("seed").get<std::uint64_t>();
    const auto sub = c.at("subsampling").get<std::string>();
    if (sub != "auto" && sub != "off") throw InputError("config.subsampling must be auto or off");
    f.config.subsampling = sub == "auto" ? Subsampling::automatic : Subsampling::off;
    f.config.converge_trials = c.value("converge_trials", false);
    f.config.reweight_quantile = c.at("reweight_quantile").get<double>();
    f.config.detection_quantile = c.at("detection_quantile").get<double>();
    return f;
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed fit file: ") + e.what());
  }
}

inline std::string format_fit(const FitRecord& f) { return fit_to_json(f).dump(2) + "\n"; }

inline FitRecord read_fit(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError(path.string() + ": " + e.what());
  }
  try {
    return fit_from_json(j);
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Detection and explanation output
// ---------------------------------------------------------------------------

inline std::string format_detection(const DetectionResult& d) {
  std::string out = "index,mmd2,cutoff,flag\n";
  const std::string cutoff = format_double(d.cutoff);
  for (std::size_t i = 0; i < d.distances.size(); ++i)
    out += std::to_string(i) + "," + format_double(d.distances[i]) + "," + cutoff + "," + (d.flags[i] ? "1" : "0") + "\n";
  return out;
}

enum class ShapleyLevel { cell, row, col };

inline std::string format_shapley(const ShapleyReport& s, ShapleyLevel level) {
  std::string out;
  double sum = 0.0;
  auto emit_row = [&](const auto& values) {
    for (Eigen::Index k = 0; k < values.size(); ++k) {
      if (k > 0) out += ',';
      out += format_double(values(k));
    }
    out += '\n';
  };
  switch (level) {
    case ShapleyLevel::cell:
      for (Eigen::Index r = 0; r < s.cell.rows(); ++r) emit_row(s.cell.row(r));
      sum = s.cell.sum();
      break;
    case ShapleyLevel::row:
      for (Eigen::Index r = 0; r < s.row.size(); ++r) out += format_double(s.row(r)) + "\n";
      sum = s.row.sum();
      break;
    case ShapleyLevel::col:
      for (Eigen::Index c = 0; c < s.col.size(); ++c) out += format_double(s.col(c)) + "\n";
      sum = s.col.sum();
      break;
  }
  out += "# total=" + format_double(s.total) + " residual=" + format_double(sum - s.total) + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Simulation scenario files and result tables
// ---------------------------------------------------------------------------

enum class Experiment { contamination, efficiency };

struct SimulationPlan {
  Experiment experiment = Experiment::contamination;
  sim::Scenario scenario;
  std::vector<std::size_t> n_grid;  // efficiency experiment
};

namespace detail {

inline sim::CovSpec parse_cov(const std::string& v, std::size_t dim, const std::string& key) {
  if (v == "rnd") return sim::CovSpec::rnd(dim, 0);
  for (auto [prefix, kind] : {std::pair{"fix(", sim::CovSpec::Kind::fix}, std::pair{"mix(", sim::CovSpec::Kind::mix}}) {
    const std::string_view sv(v);
    if (sv.starts_with(prefix) && sv.ends_with(")")) {
      double rho = 0.0;
      if (!parse_number(sv.substr(4, sv.size() - 5), rho) || !(rho > 0.0 && rho < 1.0))
        throw InputError(key + ": correlation must be a number in (0, 1)");
      return {kind, dim, rho, 0};
    }
  }
  throw InputError(key + ": expected rnd, fix(<rho>) or mix(<rho>), got '" + v + "'");
}

}  // namespace detail

/// Flat `key = value` file with [scenario], [covariance], [contamination],
/// [estimators], [detection] and [mmcd] sections. Unknown keys are errors.
inline SimulationPlan parse_scenario(std::string_view text, const std::string& source = "<scenario>") {
  std::map<std::string, std::pair<std::string, std::size_t>> kv;  // "section.key" -> (value, line)
  std::string section;
  const auto lines = detail::lines_of(text);
  for (std::size_t li = 0; li < lines.size(); ++li) {
    const auto line = detail::trim(lines[li]);
    const std::string where = source + ":" + std::to_string(li + 1);
    if (line.empty() || line.front() == '#' || line.front() == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw InputError(where + ": malformed section header");
      section = std::string(detail::trim(line.substr(1, line.size() - 2)));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw InputError(where + ": expected key = value");
    const std::string key = std::string(detail::trim(line.substr(0, eq)));
    const std::string full = section.empty() ? key : section + "." + key;
    if (kv.count(full)) throw InputError(where + ": duplicate key '" + full + "'");
    kv[full] = {std::string(detail::trim(line.substr(eq + 1))), li + 1};
  }

  static const std::vector<std::string> known = {
      "scenario.experiment", "scenario.p", "scenario.q", "scenario.n", "scenario.n_grid", "scenario.reps",
      "scenario.seed", "scenario.threads", "covariance.row", "covariance.col", "contamination.scheme",
      "contamination.epsilon", "contamination.gamma", "contamination.rows", "contamination.cols",
      "contamination.permute_fraction", "contamination.scale", "estimators.list", "detection.quantile",
      "mmcd.h", "mmcd.n_initial_subsets", "mmcd.n_keep", "mmcd.initial_iters", "mmcd.cstep_tol",
      "mmcd.subsampling", "mmcd.converge_trials"};
  for (const auto& [k, v] : kv)
    if (std::find(known.begin(), known.end(), k) == known.end())
      throw InputError(source + ":" + std::to_string(v.second) + ": unknown key '" + k + "'");

  auto where = [&](const std::string& k) { return source + ":" + std::to_string(kv.at(k).second) + ": " + k; };
  auto get_count = [&](const std::string& k, std::size_t fallback) {
    return kv.count(k) ? detail::parse_count(kv.at(k).first, where(k)) : fallback;
  };
  auto get_real = [&](const std::string& k, double fallback) {
    if (!kv.count(k)) return fallback;
    double v = 0.0;
    if (!detail::parse_number(kv.at(k).first, v)) throw InputError(where(k) + ": expected a number");
    return v;
  };

  SimulationPlan plan;
  sim::Scenario& s = plan.scenario;
  if (kv.count("scenario.experiment")) {
    const auto& v = kv.at("scenario.experiment").first;
    if (v == "contamination") plan.experiment = Experiment::contamination;
    else if (v == "efficiency") plan.experiment = Experiment::efficiency;
    else throw InputError(where("scenario.experiment") + ": expected contamination or efficiency");
  }
  s.p = get_count("scenario.p", 5);
  s.q = get_count("scenario.q", 20);
  s.n = get_count("scenario.n", 100);
  s.reps = get_count("scenario.reps", 10);
  s.seed = get_count("scenario.seed", 1);
  s.threads = static_cast<unsigned>(get_count("scenario.threads", 0));
  if (kv.count("scenario.n_grid")) {
    std::string_view rest = kv.at("scenario.n_grid").first;
    while (!rest.empty()) {
      const auto comma = rest.find(',');
      plan.n_grid.push_back(detail::parse_count(detail::trim(rest.substr(0, comma)), where("scenario.n_grid")));
      rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
    }
  } else {
    plan.n_grid = {s.n};
  }

  s.row_cov = kv.count("covariance.row") ? detail::parse_cov(kv.at("covariance.row").first, s.p, where("covariance.row"))
                                         : sim::CovSpec::rnd(s.p, 0);
  s.col_cov = kv.count("covariance.col") ? detail::parse_cov(kv.at("covariance.col").first, s.q, where("covariance.col"))
                                         : sim::CovSpec::mix(s.q, 0.7);

  auto& c = s.contamination;
  if (kv.count("contamination.scheme")) {
    const auto& v = kv.at("contamination.scheme").first;
    if (v == "shift") c.scheme = sim::ContaminationSpec::Scheme::shift;
    else if (v == "block") c.scheme = sim::ContaminationSpec::Scheme::block;
    else if (v == "cell") c.scheme = sim::ContaminationSpec::Scheme::cell;
    else throw InputError(where("contamination.scheme") + ": expected shift, block or cell");
  }
  c.epsilon = get_real("contamination.epsilon", c.epsilon);
  c.gamma = get_real("contamination.gamma", c.gamma);
  c.rows = get_count("contamination.rows", c.rows);
  c.cols = get_count("contamination.cols", c.cols);
  c.permute_fraction = get_real("contamination.permute_fraction", c.permute_fraction);
  c.scale = get_real("contamination.scale", c.scale);

  if (kv.count("estimators.list")) {
    s.estimators.clear();
    std::string_view rest = kv.at("estimators.list").first;
    while (!rest.empty()) {
      const auto comma = rest.find(',');
      const std::string id(detail::trim(rest.substr(0, comma)));
      const auto e = sim::parse_estimator(id);
      if (!e) throw InputError(where("estimators.list") + ": unknown estimator '" + id + "'");
      s.estimators.push_back(*e);
      rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
    }
  }
  s.detection_quantile = get_real("detection.quantile", 0.99);

  if (kv.count("mmcd.h")) s.mmcd.h = get_count("mmcd.h", 0);
  s.mmcd.n_initial_subsets = get_count("mmcd.n_initial_subsets", s.mmcd.n_initial_subsets);
  s.mmcd.n_keep = get_count("mmcd.n_keep", s.mmcd.n_keep);
  s.mmcd.initial_iters = static_cast<int>(get_count("mmcd.initial_iters", static_cast<std::size_t>(s.mmcd.initial_iters)));
  s.mmcd.cstep_tol = get_real("mmcd.cstep_tol", s.mmcd.cstep_tol);
  if (kv.count("mmcd.subsampling")) {
    const auto& v = kv.at("mmcd.subsampling").first;
    if (v == "auto") s.mmcd.subsampling = Subsampling::automatic;
    else if (v == "off") s.mmcd.subsampling = Subsampling::off;
    else throw InputError(where("mmcd.subsampling") + ": expected auto or off");
  }

  // Value checks, reported against the key that carries the bad value.
  auto require = [&](bool ok, const std::string& k, const std::string& what) {
    if (!ok) throw InputError((kv.count(k) ? where(k) : source + ": " + k) + ": " + what);
  };
  require(s.p >= 1, "scenario.p", "must be positive");
  require(s.q >= 1, "scenario.q", "must be positive");
  require(s.reps >= 1, "scenario.reps", "must be positive");
  require(c.epsilon >= 0.0 && c.epsilon < 0.5, "contamination.epsilon", "must lie in [0, 0.5)");
  require(std::isfinite(c.gamma), "contamination.gamma", "must be finite");
  require(c.scale > 0.0 && std::isfinite(c.scale), "contamination.scale", "must be positive");
  if (c.scheme == sim::ContaminationSpec::Scheme::block) {
    require(c.rows >= 1 && c.rows <= s.p, "contamination.rows", "must lie in [1, p]");
    require(c.cols >= 1 && c.cols <= s.q, "contamination.cols", "must lie in [1, q]");
  }
  if (c.scheme == sim::ContaminationSpec::Scheme::cell) {
    require(c.permute_fraction > 0.0 && c.permute_fraction <= 1.0, "contamination.permute_fraction",
            "must lie in (0, 1]");
    require(s.p * s.q >= 2, "contamination.scheme", "cell contamination needs at least two cells");
  }
  require(!s.estimators.empty(), "estimators.list", "no estimators given");
  require(s.detection_quantile > 0.0 && s.detection_quantile < 1.0, "detection.quantile", "must lie in (0, 1)");
  const std::size_t elemental = min_subset_size(s.p, s.q);
  const std::string n_key = plan.experiment == Experiment::efficiency ? "scenario.n_grid" : "scenario.n";
  const std::vector<std::size_t> ns = plan.experiment == Experiment::efficiency ? plan.n_grid
                                                                                : std::vector<std::size_t>{s.n};
  require(s.mmcd.n_initial_subsets >= 1, "mmcd.n_initial_subsets", "must be positive");
  require(s.mmcd.n_keep >= 1 && s.mmcd.n_keep <= s.mmcd.n_initial_subsets, "mmcd.n_keep",
          "must lie in [1, n_initial_subsets]");
  require(s.mmcd.initial_iters >= 1, "mmcd.initial_iters", "must be positive");
  require(s.mmcd.cstep_tol > 0.0, "mmcd.cstep_tol", "must be positive");
  require(!ns.empty(), n_key, "no sample sizes given");
  for (std::size_t n : ns) {
    require(n >= elemental, n_key, "n = " + std::to_string(n) + " is below d + 2 = " + std::to_string(elemental));
    if (s.mmcd.h) {
      const std::size_t hh = *s.mmcd.h;
      require(2 * hh >= n && hh <= n && hh >= elemental, "mmcd.h",
              "h = " + std::to_string(hh) + " must satisfy n/2 <= h <= n and h >= d + 2 for n = " + std::to_string(n));
    }
  }
  if (kv.count("mmcd.converge_trials")) {
    const auto& v = kv.at("mmcd.converge_trials").first;
    require(v == "true" || v == "false", "mmcd.converge_trials", "expected true or false");
    s.mmcd.converge_trials = v == "true";
  }
  return plan;
}

/// One row per (rep, estimator), then `#` comment lines with notices and the
/// median / standard error of every metric.
inline std::string format_sim_result(const sim::SimResult& r, bool efficiency, bool timing) {
  std::string out = "scenario,rep,n,estimator,kl,frobenius,angle,precision,recall,f_score";
  if (efficiency) out += ",efficiency";
  if (timing) out += ",runtime_seconds";
  out += "\n";
  for (const auto& x : r.records) {
    out += std::to_string(x.scenario) + "," + std::to_string(x.rep) + "," + std::to_string(x.n) + "," +
           sim::name(x.estimator);
    for (double v : {x.kl, x.frobenius, x.angle, x.precision, x.recall, x.f_score}) out += "," + format_double(v);
    if (efficiency) out += "," + format_double(x.efficiency);
    if (timing) out += "," + format_double(x.runtime_seconds);
    out += "\n";
  }
  for (const auto& note : r.notices) out += "# notice: " + note + "\n";

  struct Metric {
    const char* label;
    double sim::SimRecord::*field;
  };
  std::vector<Metric> metrics = {{"kl", &sim::SimRecord::kl},           {"frobenius", &sim::SimRecord::frobenius},
                                 {"angle", &sim::SimRecord::angle},     {"precision", &sim::SimRecord::precision},
                                 {"recall", &sim::SimRecord::recall},   {"f_score", &sim::SimRecord::f_score}};
  if (efficiency) metrics.push_back({"efficiency", &sim::SimRecord::efficiency});
  if (timing) metrics.push_back({"runtime_seconds", &sim::SimRecord::runtime_seconds});

  std::vector<std::pair<std::size_t, sim::Estimator>> groups;
  for (const auto& x : r.records)
    if (std::find(groups.begin(), groups.end(), std::pair{x.n, x.estimator}) == groups.end())
      groups.emplace_back(x.n, x.estimator);
  for (const auto& [n, e] : groups) {
    out += "# summary n=" + std::to_string(n) + " estimator=" + sim::name(e);
    for (const auto& m : metrics) {
      const auto col = r.column(e, m.field, n);
      out += std::string(" median_") + m.label + "=" + format_summary(sim::median(col)) + " se_" + m.label + "=" +
             format_summary(sim::standard_error(col));
    }
    out += "\n";
  }
  return out;
}

}  // namespace mmcd::io
