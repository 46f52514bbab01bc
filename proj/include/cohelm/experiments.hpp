// SPDX-License-Identifier: Apache-2.0

#ifndef COHELM_EXPERIMENTS_HPP
#define COHELM_EXPERIMENTS_HPP

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <mutex>
#include <numbers>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Core>

#include "cohelm/analysis.hpp"
#include "cohelm/assembly.hpp"
#include "cohelm/eigen_extremes.hpp"
#include "cohelm/gmres.hpp"
#include "cohelm/linalg.hpp"
#include "cohelm/mesh_space.hpp"

namespace cohelm
{

class ConfigError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

enum class GmresModes
{
  Weighted,
  Unweighted,
  Both
};

//
// Declarative experiment description, read from flat key = value text.
//
struct ExperimentConfig
{
  std::string experiment;  // empty: taken from the CLI subcommand
  int dim = 1;
  std::vector<double> bounds;  // a b  or  x0 x1 y0 y1; default unit domain
  std::optional<Point> center;
  std::optional<double> length;
  std::vector<Formulation> formulations{Formulation::Standard, Formulation::LeastSquares,
                                        Formulation::MsOneThird, Formulation::MsKSquared};
  std::optional<double> a;  // h = C k^-a
  std::vector<double> tau{8.0};
  double k_min = 10.0;
  double k_max = 2000.0;
  int k_samples = 12;
  std::optional<double> k_per_decade;
  std::vector<double> k_list;
  std::optional<double> beta;
  std::string solution = "plane_wave";  // or modulated
  Point direction{1.0, 0.0};

  // projection-table
  double k = 30.0 * std::numbers::pi;
  int n = 100;

  // qo-surface
  double hk_min = 0.2;
  double hk_max = 50.0;
  int h_samples = 30;
  bool estimate_condition = false;

  // gmres and fov
  std::vector<int> j{1};
  double tol = 1e-6;
  int max_iter = 5000;
  PreconditionSide side = PreconditionSide::Left;
  GmresModes modes = GmresModes::Both;
  bool fov = true;

  std::string out;
  int threads = 1;
  std::uint64_t seed = 12345;
  std::vector<std::pair<std::string, std::string>> entries;  // as read, for the CSV echo

  Domain domain() const
  {
    if (dim == 1)
    {
      const double a0 = bounds.empty() ? 0.0 : bounds[0], b0 = bounds.empty() ? 1.0 : bounds[1];
      return Domain::interval(a0, b0, center ? std::optional<double>((*center)[0]) : std::nullopt, length);
    }
    const Point lo = bounds.empty() ? Point{0.0, 0.0} : Point{bounds[0], bounds[2]};
    const Point hi = bounds.empty() ? Point{1.0, 1.0} : Point{bounds[1], bounds[3]};
    return Domain::rectangle(lo, hi, center, length);
  }

  // Exponent a for variant j of the GMRES study.
  double exponent_for(int jj) const
  {
    if (a) return *a;
    return jj == 1 ? 6.0 / 5.0 : 3.0 / 2.0;
  }

  double exponent_for_accuracy() const { return a.value_or(6.0 / 5.0); }
};

namespace detail
{

inline std::string trim(const std::string &s)
{
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string &s)
{
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s)
  {
    if (ch == ',' || ch == ' ' || ch == '\t')
    {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    }
    else
    {
      cur += ch;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

// Real number with optional fraction "p/q" and factor "pi" ("30pi", "30*pi").
inline double parse_number(const std::string &text, const std::string &key)
{
  std::string s = trim(text);
  double factor = 1.0;
  for (const std::string suffix : {"*pi", "pi"})
  {
    if (s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0)
    {
      factor = std::numbers::pi;
      s = trim(s.substr(0, s.size() - suffix.size()));
      if (s.empty()) s = "1";
      break;
    }
  }
  auto to_double = [&](const std::string &t) {
    std::size_t used = 0;
    double v = 0.0;
    try
    {
      v = std::stod(t, &used);
    }
    catch (const std::exception &)
    {
      throw ConfigError("key '" + key + "': cannot parse number '" + text + "'");
    }
    if (used != t.size() || !std::isfinite(v))
    {
      throw ConfigError("key '" + key + "': cannot parse number '" + text + "'");
    }
    return v;
  };
  const auto slash = s.find('/');
  if (slash == std::string::npos)
  {
    return factor * to_double(s);
  }
  const double den = to_double(trim(s.substr(slash + 1)));
  if (den == 0.0)
  {
    throw ConfigError("key '" + key + "': zero denominator");
  }
  return factor * to_double(trim(s.substr(0, slash))) / den;
}

inline int parse_int(const std::string &text, const std::string &key)
{
  const double v = parse_number(text, key);
  if (v != std::floor(v) || std::abs(v) > 1e9)
  {
    throw ConfigError("key '" + key + "': expected an integer, got '" + text + "'");
  }
  return static_cast<int>(v);
}

inline bool parse_bool(const std::string &text, const std::string &key)
{
  const std::string s = trim(text);
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ConfigError("key '" + key + "': expected true or false, got '" + text + "'");
}

inline std::vector<double> parse_numbers(const std::string &text, const std::string &key)
{
  std::vector<double> out;
  for (const auto &t : split_list(text)) out.push_back(parse_number(t, key));
  if (out.empty()) throw ConfigError("key '" + key + "': empty list");
  return out;
}

}  // namespace detail

//
// Parses "key = value" lines; '#' starts a comment. Unknown keys and
// malformed values raise ConfigError.
//
inline ExperimentConfig parse_config(std::istream &in)
{
  using namespace detail;
  ExperimentConfig cfg;
  std::set<std::string> seen;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line))
  {
    lineno++;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
    {
      throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (key.empty() || val.empty())
    {
      throw ConfigError("line " + std::to_string(lineno) + ": empty key or value");
    }
    if (!seen.insert(key).second)
    {
      throw ConfigError("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    }
    cfg.entries.emplace_back(key, val);

    if (key == "experiment")
    {
      cfg.experiment = val;
    }
    else if (key == "dim")
    {
      cfg.dim = parse_int(val, key);
    }
    else if (key == "domain")
    {
      cfg.bounds = parse_numbers(val, key);
    }
    else if (key == "x0")
    {
      const auto v = parse_numbers(val, key);
      if (v.size() > 2) throw ConfigError("key 'x0': at most two coordinates");
      cfg.center = Point{v[0], v.size() > 1 ? v[1] : 0.0};
    }
    else if (key == "length")
    {
      cfg.length = parse_number(val, key);
    }
    else if (key == "formulations")
    {
      cfg.formulations.clear();
      for (const auto &t : split_list(val))
      {
        try
        {
          cfg.formulations.push_back(parse_formulation(t));
        }
        catch (const std::invalid_argument &e)
        {
          throw ConfigError("key 'formulations': " + std::string(e.what()));
        }
      }
    }
    else if (key == "a")
    {
      cfg.a = parse_number(val, key);
    }
    else if (key == "tau")
    {
      cfg.tau = parse_numbers(val, key);
    }
    else if (key == "k_min")
    {
      cfg.k_min = parse_number(val, key);
    }
    else if (key == "k_max")
    {
      cfg.k_max = parse_number(val, key);
    }
    else if (key == "k_samples")
    {
      cfg.k_samples = parse_int(val, key);
    }
    else if (key == "k_per_decade")
    {
      cfg.k_per_decade = parse_number(val, key);
    }
    else if (key == "k_list")
    {
      cfg.k_list = parse_numbers(val, key);
    }
    else if (key == "beta")
    {
      cfg.beta = parse_number(val, key);
    }
    else if (key == "solution")
    {
      if (val != "plane_wave" && val != "modulated")
      {
        throw ConfigError("key 'solution': expected plane_wave or modulated");
      }
      cfg.solution = val;
    }
    else if (key == "direction")
    {
      const auto v = parse_numbers(val, key);
      if (v.size() > 2) throw ConfigError("key 'direction': at most two components");
      cfg.direction = {v[0], v.size() > 1 ? v[1] : 0.0};
    }
    else if (key == "k")
    {
      cfg.k = parse_number(val, key);
    }
    else if (key == "n")
    {
      cfg.n = parse_int(val, key);
    }
    else if (key == "hk_min")
    {
      cfg.hk_min = parse_number(val, key);
    }
    else if (key == "hk_max")
    {
      cfg.hk_max = parse_number(val, key);
    }
    else if (key == "h_samples")
    {
      cfg.h_samples = parse_int(val, key);
    }
    else if (key == "estimate_condition")
    {
      cfg.estimate_condition = parse_bool(val, key);
    }
    else if (key == "j")
    {
      cfg.j.clear();
      for (double v : parse_numbers(val, key))
      {
        if (v != 1.0 && v != 2.0) throw ConfigError("key 'j': variants are 1 and 2");
        cfg.j.push_back(static_cast<int>(v));
      }
    }
    else if (key == "tol")
    {
      cfg.tol = parse_number(val, key);
    }
    else if (key == "max_iter")
    {
      cfg.max_iter = parse_int(val, key);
    }
    else if (key == "side")
    {
      try
      {
        cfg.side = parse_precondition_side(val);
      }
      catch (const std::invalid_argument &e)
      {
        throw ConfigError("key 'side': " + std::string(e.what()));
      }
    }
    else if (key == "weighted")
    {
      if (val == "both")
        cfg.modes = GmresModes::Both;
      else
        cfg.modes = parse_bool(val, key) ? GmresModes::Weighted : GmresModes::Unweighted;
    }
    else if (key == "fov")
    {
      cfg.fov = parse_bool(val, key);
    }
    else if (key == "out")
    {
      cfg.out = val;
    }
    else if (key == "threads")
    {
      cfg.threads = parse_int(val, key);
    }
    else if (key == "seed")
    {
      cfg.seed = static_cast<std::uint64_t>(parse_number(val, key));
    }
    else
    {
      throw ConfigError("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
  }
  return cfg;
}

inline ExperimentConfig parse_config_string(const std::string &text)
{
  std::istringstream in(text);
  return parse_config(in);
}

inline ExperimentConfig load_config(const std::string &path)
{
  std::ifstream in(path);
  if (!in)
  {
    throw ConfigError("cannot open config file '" + path + "'");
  }
  return parse_config(in);
}

inline void validate_config(const ExperimentConfig &cfg)
{
  if (cfg.dim != 1 && cfg.dim != 2) throw ConfigError("dim must be 1 or 2");
  if (!cfg.bounds.empty() && cfg.bounds.size() != static_cast<std::size_t>(2 * cfg.dim))
  {
    throw ConfigError("domain needs " + std::to_string(2 * cfg.dim) + " numbers");
  }
  try
  {
    (void)cfg.domain();
  }
  catch (const std::invalid_argument &e)
  {
    throw ConfigError(std::string("domain: ") + e.what());
  }
  if (cfg.formulations.empty()) throw ConfigError("formulations must not be empty");
  if (cfg.a && !(*cfg.a > 0.0)) throw ConfigError("a must be positive");
  for (double t : cfg.tau)
    if (!(t > 0.0)) throw ConfigError("tau must be positive");
  if (!(cfg.k_min > 0.0) || !(cfg.k_max >= cfg.k_min)) throw ConfigError("need 0 < k_min <= k_max");
  if (cfg.k_samples < 1) throw ConfigError("k_samples must be positive");
  if (cfg.k_per_decade && !(*cfg.k_per_decade > 0.0)) throw ConfigError("k_per_decade must be positive");
  for (double k : cfg.k_list)
    if (!(k > 0.0)) throw ConfigError("k_list entries must be positive");
  if (cfg.beta && !(*cfg.beta > 0.0)) throw ConfigError("beta must be positive");
  if (!(cfg.k > 0.0)) throw ConfigError("k must be positive");
  if (cfg.n < 1) throw ConfigError("n must be positive");
  if (!(cfg.hk_min > 0.0) || !(cfg.hk_max >= cfg.hk_min)) throw ConfigError("need 0 < hk_min <= hk_max");
  if (cfg.h_samples < 1) throw ConfigError("h_samples must be positive");
  if (!(cfg.tol > 0.0 && cfg.tol < 1.0)) throw ConfigError("tol must lie in (0, 1)");
  if (cfg.max_iter < 1) throw ConfigError("max_iter must be positive");
  if (cfg.threads < 1) throw ConfigError("threads must be positive");
  if (cfg.j.empty()) throw ConfigError("j must not be empty");
  if (std::hypot(cfg.direction[0], cfg.dim == 1 ? 0.0 : cfg.direction[1]) == 0.0)
  {
    throw ConfigError("direction must be nonzero");
  }
}

//
// Sample wavenumbers: k_list if given, else log-spaced over [k_min, k_max]
// with k_samples points (or k_per_decade points per decade).
//
inline std::vector<double> sweep_wavenumbers(const ExperimentConfig &cfg)
{
  if (!cfg.k_list.empty())
  {
    return cfg.k_list;
  }
  int count = cfg.k_samples;
  if (cfg.k_per_decade)
  {
    count = std::max(1, static_cast<int>(std::lround(std::log10(cfg.k_max / cfg.k_min) * *cfg.k_per_decade)) + 1);
  }
  if (count == 1 || cfg.k_max == cfg.k_min)
  {
    return {cfg.k_min};
  }
  std::vector<double> ks(count);
  for (int i = 0; i < count; i++)
  {
    ks[i] = cfg.k_min * std::pow(cfg.k_max / cfg.k_min, static_cast<double>(i) / (count - 1));
  }
  ks.back() = cfg.k_max;
  return ks;
}

// C = 4 pi (k_min k_max)^((a-1)/2) / tau, so hk^a = C fixes tau points
// per wavelength at the geometric mean of the sweep.
inline double mesh_constant(double a, double tau, double k_min, double k_max)
{
  return 4.0 * std::numbers::pi * std::pow(k_min * k_max, 0.5 * (a - 1.0)) / tau;
}

inline ExactSolution manufactured(const ExperimentConfig &cfg, double k)
{
  return cfg.solution == "modulated" ? modulated_plane_wave(k, cfg.direction, cfg.dim)
                                     : plane_wave(k, cfg.direction, cfg.dim);
}

inline WaveContext make_context(const ExperimentConfig &cfg, const Domain &domain, double k, Formulation f)
{
  WaveContext ctx = WaveContext::make(domain, k, f);
  if (cfg.beta) ctx.beta = *cfg.beta;
  return ctx;
}

// Runs body(i) for i in [0, n) on up to `threads` workers.
inline void parallel_for(int n, int threads, const std::function<void(int)> &body)
{
  const int workers = std::max(1, std::min(threads, n));
  if (workers == 1)
  {
    for (int i = 0; i < n; i++) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; w++)
  {
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) body(i);
    });
  }
  for (auto &t : pool) t.join();
}

class Stopwatch
{
public:
  double seconds() const
  {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

// ---------------------------------------------------------------------------
// Row types

struct AccuracyRow
{
  double k = 0.0, tau = 0.0, h = 0.0;
  int n = 0, ndofs = 0;
  Formulation formulation = Formulation::Standard;
  NormSet relative;
  double best_h1k = 0.0;  // relative H1k best-approximation error
  double seconds = 0.0;
  std::string error;
};

struct ProjectionRow
{
  NormKind projection = NormKind::L2;
  NormSet relative;
  double gram_condition = 0.0;
  bool ill_conditioned = false;
};

struct QoRow
{
  double k = 0.0, hk = 0.0, h = 0.0;
  int n = 0, ndofs = 0;
  QuasiOptimality qo;
  bool on_ridge = false;
  double seconds = 0.0;
  std::string error;
};

struct GmresRow
{
  double k = 0.0, tau = 0.0, h = 0.0;
  int j = 1, n = 0, ndofs = 0;
  bool weighted = true;
  PreconditionSide side = PreconditionSide::Left;
  int iterations = 0;
  bool converged = false;
  double relative_residual = 0.0;
  bool monotone = true;  // residual history nonincreasing
  std::optional<FovEstimate> fov;
  std::optional<int> elman_bound;
  double seconds = 0.0;
  std::string error;
};

struct FitLine
{
  std::string series;
  FitResult fit;
};

// ---------------------------------------------------------------------------
// Sweeps

inline std::vector<AccuracyRow> run_accuracy_sweep(const ExperimentConfig &cfg)
{
  validate_config(cfg);
  const Domain domain = cfg.domain();
  const auto ks = sweep_wavenumbers(cfg);
  const double a = cfg.exponent_for_accuracy();
  const double kmin = *std::min_element(ks.begin(), ks.end()), kmax = *std::max_element(ks.begin(), ks.end());

  struct Job
  {
    double tau, k;
  };
  std::vector<Job> jobs;
  for (double tau : cfg.tau)
    for (double k : ks) jobs.push_back({tau, k});

  std::vector<std::vector<AccuracyRow>> out(jobs.size());
  parallel_for(static_cast<int>(jobs.size()), cfg.threads, [&](int i) {
    const auto [tau, k] = jobs[i];
    const double h = mesh_constant(a, tau, kmin, kmax) * std::pow(k, -a);
    std::vector<AccuracyRow> rows;
    for (Formulation f : cfg.formulations)
    {
      AccuracyRow r;
      r.k = k;
      r.tau = tau;
      r.formulation = f;
      rows.push_back(r);
    }
    try
    {
      const C1Space s = space_for_meshwidth(domain, h);
      const ExactSolution u = manufactured(cfg, k);
      const ProblemData data = ProblemData::from_exact(u, k);
      const WaveContext base = make_context(cfg, domain, k, Formulation::MsOneThird);
      const auto best = orthogonal_projection(s, u, NormKind::H1k, base, false);
      const double best_h1k = error_norms(s, best.coeffs, u, base).relative.h1k;
      for (AccuracyRow &r : rows)
      {
        Stopwatch sw;
        r.h = s.h();
        r.n = s.elements(0);
        r.ndofs = s.num_dofs();
        r.best_h1k = best_h1k;
        try
        {
          const WaveContext ctx = make_context(cfg, domain, k, r.formulation);
          const AssembledSystem sys = assemble(s, ctx, data, r.formulation);
          const ComplexVector uh = direct_solve(sys.matrix, sys.rhs);
          r.relative = error_norms(s, uh, u, ctx).relative;
        }
        catch (const std::exception &e)
        {
          r.error = e.what();
        }
        r.seconds = sw.seconds();
      }
    }
    catch (const std::exception &e)
    {
      for (AccuracyRow &r : rows) r.error = e.what();
    }
    out[i] = std::move(rows);
  });
  std::vector<AccuracyRow> rows;
  for (auto &v : out)
    for (auto &r : v) rows.push_back(std::move(r));
  return rows;
}

inline std::vector<ProjectionRow> run_projection_table(const ExperimentConfig &cfg)
{
  validate_config(cfg);
  if (cfg.dim != 1)
  {
    throw ConfigError("projection-table is one-dimensional");
  }
  const Domain domain = cfg.domain();
  const C1Space s = build_space_1d(domain, cfg.n);
  const WaveContext ctx = make_context(cfg, domain, cfg.k, Formulation::MsOneThird);
  const ExactSolution u = manufactured(cfg, cfg.k);
  std::vector<ProjectionRow> rows(kAllNorms.size());
  parallel_for(static_cast<int>(kAllNorms.size()), cfg.threads, [&](int i) {
    const ProjectionResult p = orthogonal_projection(s, u, kAllNorms[i], ctx, true);
    rows[i].projection = kAllNorms[i];
    rows[i].relative = error_norms(s, p.coeffs, u, ctx).relative;
    rows[i].gram_condition = p.gram_condition;
    rows[i].ill_conditioned = p.ill_conditioned;
  });
  return rows;
}

//
// Quasi-optimality ratio over a (k, hk) grid; per k the reliable maximum
// over h is marked as the ridge point.
//
inline std::vector<QoRow> run_qo_surface(const ExperimentConfig &cfg)
{
  validate_config(cfg);
  if (cfg.dim != 1)
  {
    throw ConfigError("qo-surface is one-dimensional");
  }
  const Domain domain = cfg.domain();
  const double width = domain.width(0);
  const auto ks = sweep_wavenumbers(cfg);

  std::vector<std::vector<QoRow>> out(ks.size());
  parallel_for(static_cast<int>(ks.size()), cfg.threads, [&](int i) {
    const double k = ks[i];
    std::vector<QoRow> rows;
    int last_n = -1;
    for (int t = 0; t < cfg.h_samples; t++)
    {
      const double hk = cfg.h_samples == 1
                            ? cfg.hk_min
                            : cfg.hk_min * std::pow(cfg.hk_max / cfg.hk_min, static_cast<double>(t) / (cfg.h_samples - 1));
      const int n = std::max(1, static_cast<int>(std::ceil(width * k / hk - 1e-9)));
      if (n == last_n) continue;
      last_n = n;
      QoRow r;
      Stopwatch sw;
      r.k = k;
      r.n = n;
      r.h = width / n;
      r.hk = r.h * k;
      try
      {
        const C1Space s = build_space_1d(domain, n);
        r.ndofs = s.num_dofs();
        const WaveContext ctx = make_context(cfg, domain, k, Formulation::MsOneThird);
        r.qo = quasi_opt_ratio(s, ctx, manufactured(cfg, k), cfg.estimate_condition);
      }
      catch (const std::exception &e)
      {
        r.error = e.what();
      }
      r.seconds = sw.seconds();
      rows.push_back(r);
    }
    QoRow *best = nullptr;
    for (QoRow &r : rows)
    {
      if (!r.error.empty() || r.qo.unreliable) continue;
      if (!best || r.qo.ratio > best->qo.ratio) best = &r;
    }
    if (best) best->on_ridge = true;
    out[i] = std::move(rows);
  });
  std::vector<QoRow> rows;
  for (auto &v : out)
    for (auto &r : v) rows.push_back(std::move(r));
  return rows;
}

inline bool nonincreasing(const std::vector<double> &h)
{
  for (std::size_t i = 1; i < h.size(); i++)
  {
    if (h[i] > h[i - 1] * (1.0 + 1e-12)) return false;
  }
  return true;
}

//
// Iterations of GMRES on the preconditioned multiplier system, per k, per
// weight variant j and per weighting mode.
//
inline std::vector<GmresRow> run_gmres_sweep(const ExperimentConfig &cfg)
{
  validate_config(cfg);
  const Domain domain = cfg.domain();
  const auto ks = sweep_wavenumbers(cfg);
  const double kmin = *std::min_element(ks.begin(), ks.end()), kmax = *std::max_element(ks.begin(), ks.end());
  std::vector<bool> modes;
  if (cfg.modes != GmresModes::Unweighted) modes.push_back(true);
  if (cfg.modes != GmresModes::Weighted) modes.push_back(false);

  struct Job
  {
    int j;
    double tau, k;
  };
  std::vector<Job> jobs;
  for (int j : cfg.j)
    for (double tau : cfg.tau)
      for (double k : ks) jobs.push_back({j, tau, k});

  LanczosOptions lopt;
  lopt.seed = cfg.seed;
  std::vector<std::vector<GmresRow>> out(jobs.size());
  parallel_for(static_cast<int>(jobs.size()), cfg.threads, [&](int i) {
    const auto [j, tau, k] = jobs[i];
    const double a = cfg.exponent_for(j);
    const double h = mesh_constant(a, tau, kmin, kmax) * std::pow(k, -a);
    std::vector<GmresRow> rows;
    for (bool w : modes)
    {
      GmresRow r;
      r.k = k;
      r.tau = tau;
      r.j = j;
      r.weighted = w;
      r.side = cfg.side;
      rows.push_back(r);
    }
    try
    {
      const C1Space s = space_for_meshwidth(domain, h);
      const Formulation f = j == 1 ? Formulation::MsOneThird : Formulation::MsKSquared;
      const WaveContext ctx = make_context(cfg, domain, k, f);
      Stopwatch setup;
      const AssembledSystem sys = assemble_ms(s, ctx, ProblemData::from_exact(manufactured(cfg, k), k));
      const SpdFactor D(assemble_weight(s, ctx, j));
      std::optional<FovEstimate> fov;
      std::optional<int> bound;
      if (cfg.fov)
      {
        fov = fov_constants(sys.matrix, D, lopt);
        bound = elman_iteration_bound(*fov, cfg.tol);
      }
      const double setup_time = setup.seconds();
      for (GmresRow &r : rows)
      {
        Stopwatch sw;
        r.h = s.h();
        r.n = s.elements(0);
        r.ndofs = s.num_dofs();
        r.fov = fov;
        r.elman_bound = bound;
        try
        {
          const GmresResult g = preconditioned_gmres(sys.matrix, sys.rhs, D, cfg.side, r.weighted,
                                                     {cfg.tol, cfg.max_iter});
          r.iterations = g.iterations;
          r.converged = g.converged;
          r.relative_residual = g.relative_residual;
          r.monotone = nonincreasing(g.residual_history);
        }
        catch (const std::exception &e)
        {
          r.error = e.what();
        }
        r.seconds = sw.seconds() + setup_time;
      }
    }
    catch (const std::exception &e)
    {
      for (GmresRow &r : rows) r.error = e.what();
    }
    out[i] = std::move(rows);
  });
  std::vector<GmresRow> rows;
  for (auto &v : out)
    for (auto &r : v) rows.push_back(std::move(r));
  return rows;
}

// FOV constants with the observed weighted iteration count.
inline std::vector<GmresRow> run_fov_report(const ExperimentConfig &cfg)
{
  ExperimentConfig c = cfg;
  c.fov = true;
  c.modes = GmresModes::Weighted;
  return run_gmres_sweep(c);
}

// ---------------------------------------------------------------------------
// Fits

inline std::optional<FitResult> try_fit(const std::vector<double> &ks, const std::vector<double> &v)
{
  try
  {
    return fit_growth_rate(ks, v);
  }
  catch (const std::invalid_argument &)
  {
    return std::nullopt;
  }
}

inline std::vector<FitLine> accuracy_fits(const std::vector<AccuracyRow> &rows)
{
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> series;
  std::vector<std::string> order;
  auto add = [&](const std::string &name, double k, double v) {
    if (!series.count(name)) order.push_back(name);
    auto &s = series[name];
    if (std::find(s.first.begin(), s.first.end(), k) != s.first.end()) return;
    s.first.push_back(k);
    s.second.push_back(v);
  };
  for (const auto &r : rows)
  {
    if (!r.error.empty()) continue;
    std::ostringstream tag;
    tag << "tau=" << r.tau;
    add(to_string(r.formulation) + "_rel_h1k " + tag.str(), r.k, r.relative.h1k);
    add("best_h1k " + tag.str(), r.k, r.best_h1k);
  }
  std::vector<FitLine> out;
  for (const auto &name : order)
  {
    if (auto f = try_fit(series[name].first, series[name].second)) out.push_back({name, *f});
  }
  return out;
}

inline std::optional<FitResult> ridge_fit(const std::vector<QoRow> &rows)
{
  std::vector<double> ks, v;
  for (const auto &r : rows)
  {
    if (r.on_ridge)
    {
      ks.push_back(r.k);
      v.push_back(r.qo.ratio);
    }
  }
  return try_fit(ks, v);
}

inline std::vector<FitLine> gmres_fits(const std::vector<GmresRow> &rows)
{
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> series;
  std::vector<std::string> order;
  for (const auto &r : rows)
  {
    if (!r.error.empty() || r.iterations < 1) continue;
    std::ostringstream name;
    name << "iterations j=" << r.j << " tau=" << r.tau << (r.weighted ? " weighted" : " unweighted");
    if (!series.count(name.str())) order.push_back(name.str());
    series[name.str()].first.push_back(r.k);
    series[name.str()].second.push_back(r.iterations);
    if (r.fov && r.weighted && r.fov->cos_sigma > 0.0)
    {
      std::ostringstream cs;
      cs << "cos_sigma j=" << r.j << " tau=" << r.tau;
      if (!series.count(cs.str())) order.push_back(cs.str());
      series[cs.str()].first.push_back(r.k);
      series[cs.str()].second.push_back(r.fov->cos_sigma);
    }
  }
  std::vector<FitLine> out;
  for (const auto &name : order)
  {
    if (auto f = try_fit(series[name].first, series[name].second)) out.push_back({name, *f});
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV output

namespace detail
{

inline std::string csv_field(const std::string &s)
{
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s)
  {
    if (c == '"') q += '"';
    q += c == '\n' ? ' ' : c;
  }
  return q + "\"";
}

inline std::string num(double v)
{
  std::ostringstream o;
  o << std::setprecision(10) << v;
  return o.str();
}

inline void write_fit(std::ostream &os, const FitLine &f)
{
  os << "# fit " << f.series << ": exponent=" << num(f.fit.exponent) << " intercept=" << num(f.fit.intercept)
     << " residual=" << num(f.fit.residual) << "\n";
}

}  // namespace detail

inline void write_provenance(std::ostream &os, const std::string &experiment, const ExperimentConfig &cfg)
{
  os << "# cohelm_bench " << experiment << "\n";
  os << "# eigen " << EIGEN_WORLD_VERSION << "." << EIGEN_MAJOR_VERSION << "." << EIGEN_MINOR_VERSION << "\n";
  for (const auto &[k, v] : cfg.entries)
  {
    os << "# config " << k << " = " << v << "\n";
  }
  os << "# seed " << cfg.seed << "\n";
}

inline void write_accuracy_csv(std::ostream &os, const ExperimentConfig &cfg, const std::vector<AccuracyRow> &rows)
{
  using detail::num;
  write_provenance(os, "accuracy", cfg);
  os << "# k sampling: log-spaced over [k_min, k_max] unless k_list is set; h = C k^-a, C = 4 pi (k_min k_max)^((a-1)/2) / tau\n";
  os << "k,tau,h,n,N,formulation,rel_l2,rel_h1k,rel_v1,rel_v2,best_h1k,time_s,error\n";
  for (const auto &r : rows)
  {
    os << num(r.k) << "," << num(r.tau) << "," << num(r.h) << "," << r.n << "," << r.ndofs << ","
       << to_string(r.formulation) << "," << num(r.relative.l2) << "," << num(r.relative.h1k) << ","
       << num(r.relative.v1) << "," << num(r.relative.v2) << "," << num(r.best_h1k) << "," << num(r.seconds) << ","
       << detail::csv_field(r.error) << "\n";
  }
  for (const auto &f : accuracy_fits(rows)) detail::write_fit(os, f);
}

inline void write_projection_csv(std::ostream &os, const ExperimentConfig &cfg, const std::vector<ProjectionRow> &rows)
{
  using detail::num;
  write_provenance(os, "projection-table", cfg);
  os << "# rows: projection norm; columns: relative error in each measurement norm\n";
  os << "projection,rel_l2,rel_h1k,rel_v1,rel_v2,gram_condition,ill_conditioned\n";
  for (const auto &r : rows)
  {
    os << to_string(r.projection) << "," << num(r.relative.l2) << "," << num(r.relative.h1k) << ","
       << num(r.relative.v1) << "," << num(r.relative.v2) << "," << num(r.gram_condition) << ","
       << (r.ill_conditioned ? 1 : 0) << "\n";
  }
}

inline void write_qo_csv(std::ostream &os, const ExperimentConfig &cfg, const std::vector<QoRow> &rows)
{
  using detail::num;
  write_provenance(os, "qo-surface", cfg);
  os << "# ratio = ||u - u_N||_V1 / min ||u - v_N||_V1 for the multiplier form with A = 1/3; on_ridge marks the max over h per k\n";
  os << "k,hk,h,n,N,ratio,galerkin_v1,best_v1,gram_condition,unreliable,on_ridge,time_s,error\n";
  for (const auto &r : rows)
  {
    os << num(r.k) << "," << num(r.hk) << "," << num(r.h) << "," << r.n << "," << r.ndofs << "," << num(r.qo.ratio)
       << "," << num(r.qo.galerkin_error) << "," << num(r.qo.best_error) << "," << num(r.qo.gram_condition) << ","
       << (r.qo.unreliable ? 1 : 0) << "," << (r.on_ridge ? 1 : 0) << "," << num(r.seconds) << ","
       << detail::csv_field(r.error) << "\n";
  }
  if (auto f = ridge_fit(rows)) detail::write_fit(os, {"ridge", *f});
}

inline void write_gmres_csv(std::ostream &os, const std::string &experiment, const ExperimentConfig &cfg,
                            const std::vector<GmresRow> &rows)
{
  using detail::num;
  write_provenance(os, experiment, cfg);
  os << "# stopping: relative residual of the preconditioned system <= tol, zero initial guess; weighted runs use the "
        "D norm (left) or D^-1 norm (right), unweighted runs the Euclidean norm\n";
  os << "# k sampling: log-spaced over [k_min, k_max] unless k_list is set; j=1 uses a=6/5, j=2 uses a=3/2 unless a "
        "is set\n";
  os << "k,j,tau,h,n,N,side,weighted,iterations,converged,relative_residual,monotone,coercivity,norm_bound,cos_sigma,"
        "gamma_sigma,elman_bound,time_s,error\n";
  for (const auto &r : rows)
  {
    os << num(r.k) << "," << r.j << "," << num(r.tau) << "," << num(r.h) << "," << r.n << "," << r.ndofs << ","
       << to_string(r.side) << "," << (r.weighted ? 1 : 0) << "," << r.iterations << "," << (r.converged ? 1 : 0)
       << "," << num(r.relative_residual) << "," << (r.monotone ? 1 : 0) << ",";
    if (r.fov)
    {
      os << num(r.fov->coercivity) << "," << num(r.fov->norm_bound) << "," << num(r.fov->cos_sigma) << ","
         << num(r.fov->gamma_sigma) << ",";
    }
    else
    {
      os << ",,,,";
    }
    os << (r.elman_bound ? std::to_string(*r.elman_bound) : std::string()) << "," << num(r.seconds) << ","
       << detail::csv_field(r.error) << "\n";
  }
  for (const auto &f : gmres_fits(rows)) detail::write_fit(os, f);
}

}  // namespace cohelm

#endif  // COHELM_EXPERIMENTS_HPP
