#include "lmspde/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <toml++/toml.hpp>

#include "lmspde/errors.hpp"
#include "lmspde/simulator.hpp"

namespace lmspde {
namespace {

using nlohmann::json;

Point point_from_json(const json& j, int d) {
  if (j.is_number()) {
    if (d != 1) throw ConfigError("scalar point given for dimension " + std::to_string(d));
    Point p(1);
    p[0] = j.get<double>();
    return p;
  }
  if (!j.is_array() || static_cast<int>(j.size()) != d)
    throw ConfigError("point " + j.dump() + " does not have " + std::to_string(d) + " coordinates");
  Point p(d);
  for (int i = 0; i < d; ++i) p[i] = j.at(static_cast<std::size_t>(i)).get<double>();
  return p;
}

std::vector<Point> points_from_json(const json& j, int d) {
  if (!j.is_array()) throw ConfigError("expected an array of points");
  std::vector<Point> out;
  for (const auto& e : j) out.push_back(point_from_json(e, d));
  return out;
}

json point_to_json(const Point& p) {
  json a = json::array();
  for (Eigen::Index i = 0; i < p.size(); ++i) a.push_back(p[i]);
  return a;
}

Point filled(int d, double v) { return Point::Constant(d, v); }

std::vector<double> geometric(double lo, double hi, int count) {
  if (count < 2 || !(lo > 0.0) || !(hi > lo)) throw ConfigError("geometric grid needs 0 < min < max and count >= 2");
  std::vector<double> g(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) g[static_cast<std::size_t>(i)] = lo * std::pow(hi / lo, static_cast<double>(i) / (count - 1));
  return g;
}

std::vector<double> deltas_from_json(const json& j) {
  if (j.is_array()) return j.get<std::vector<double>>();
  // {"base": 2, "from": 4, "to": 7} → 2^-4, ..., 2^-7
  const double base = j.value("base", 2.0);
  const int from = j.at("from").get<int>();
  const int to = j.at("to").get<int>();
  if (to < from) throw ConfigError("delta exponents must increase (from <= to)");
  std::vector<double> out;
  for (int e = from; e <= to; ++e) out.push_back(std::pow(base, -e));
  return out;
}

std::string bandwidth_kind_name(BandwidthRule::Kind k) {
  switch (k) {
    case BandwidthRule::Kind::fixed: return "fixed";
    case BandwidthRule::Kind::delta_power: return "delta_power";
    case BandwidthRule::Kind::n_power: return "n_power";
  }
  return "fixed";
}

BandwidthRule::Kind bandwidth_kind_from(const std::string& s) {
  if (s == "fixed") return BandwidthRule::Kind::fixed;
  if (s == "delta_power") return BandwidthRule::Kind::delta_power;
  if (s == "n_power") return BandwidthRule::Kind::n_power;
  throw ConfigError("unknown bandwidth rule '" + s + "' (fixed | delta_power | n_power)");
}

bool inside_unit_box(const Point& p) { return (p.array() > 0.0).all() && (p.array() < 1.0).all(); }

// Sends every callback to each child; noise only to those that want it.
class FanOut : public StepObserver {
 public:
  explicit FanOut(std::vector<StepObserver*> children) : children_(std::move(children)) {}
  void on_state(int j, const Vector& x) override {
    for (auto* c : children_) c->on_state(j, x);
  }
  bool wants_noise() const override {
    return std::any_of(children_.begin(), children_.end(), [](auto* c) { return c->wants_noise(); });
  }
  void on_noise(int j, const Vector& xi) override {
    for (auto* c : children_)
      if (c->wants_noise()) c->on_noise(j, xi);
  }

 private:
  std::vector<StepObserver*> children_;
};

std::string path_file(const StudyConfig& cfg, int cell, int rep) {
  return (std::filesystem::path(cfg.output_dir) /
          (cfg.name + "_path_c" + std::to_string(cell) + "_r" + std::to_string(rep) + ".bin"))
      .string();
}

StatisticsSet simulate_statistics(const StudyConfig& cfg, const CellSetup& cell, int cell_index, int rep,
                                  std::uint64_t seed) {
  StatisticsAccumulator acc(cell.measurement, cell.grid);
  if (cfg.dump_paths && rep == 0) {
    PathRecorder rec(cell.grid, std::max(1, cell.grid.n_t / 1000));
    FanOut both({&acc, &rec});
    simulate(cfg.model, cell.grid, seed, both);
    SolutionPath path;
    path.grid = cell.grid;
    path.model = cfg.model;
    path.seed = seed;
    path.stride = std::max(1, cell.grid.n_t / 1000);
    path.values = rec.take();
    write_path_binary(path, path_file(cfg, cell_index, rep));
  } else {
    simulate(cfg.model, cell.grid, seed, acc);
  }
  return acc.result();
}

// Replicate-level failures; configuration and contract errors propagate.
template <class F>
bool guarded(F&& f, std::string& message) {
  try {
    f();
    return true;
  } catch (const EstimationError& e) {
    message = e.what();
  } catch (const SimulationError& e) {
    message = e.what();
  } catch (const MeasurementError& e) {
    message = e.what();
  } catch (const QuadratureError& e) {
    message = e.what();
  }
  return false;
}

struct PointWeights {
  std::vector<WeightSet> sets;
  std::vector<bool> fallback;
  std::string error;  ///< non-empty: some point has no usable weights
};

PointWeights weights_for(const StudyConfig& cfg, const CellSetup& cell, const std::vector<Point>& xs,
                         bool allow_fallback) {
  PointWeights pw;
  WeightConfig wc{cell.h, cfg.V, cfg.ridge};
  for (const auto& x : xs) {
    try {
      pw.sets.push_back(compute_weights(x, cell.measurement.locations, wc));
      pw.fallback.push_back(false);
    } catch (const DegenerateDesignError& e) {
      if (!allow_fallback) {
        pw.error = e.what();
        return pw;
      }
      try {
        pw.sets.push_back(nadaraya_watson_weights(x, cell.measurement.locations, wc));
        pw.fallback.push_back(true);
      } catch (const DegenerateDesignError& e2) {
        pw.error = e2.what();
        return pw;
      }
    }
  }
  return pw;
}

std::vector<Point> box_grid(const Box& J, int per_axis) {
  const int d = static_cast<int>(J.lower.size());
  std::vector<double> t(static_cast<std::size_t>(per_axis));
  for (int i = 0; i < per_axis; ++i) t[static_cast<std::size_t>(i)] = per_axis == 1 ? 0.5 : static_cast<double>(i) / (per_axis - 1);
  std::vector<Point> out;
  const int outer = d == 2 ? per_axis : 1;
  for (int i1 = 0; i1 < outer; ++i1)
    for (int i0 = 0; i0 < per_axis; ++i0) {
      Point p(d);
      p[0] = J.lower[0] + t[static_cast<std::size_t>(i0)] * (J.upper[0] - J.lower[0]);
      if (d == 2) p[1] = J.lower[1] + t[static_cast<std::size_t>(i1)] * (J.upper[1] - J.lower[1]);
      out.push_back(p);
    }
  return out;
}

// Distinct projections onto 𝒥 of the midpoint cells used by integrated_risk.
std::vector<Point> risk_points(const Box& J, int cells, int d) {
  std::map<std::vector<double>, int> seen;
  std::vector<Point> out;
  const double h = 1.0 / cells;
  const int outer = d == 2 ? cells : 1;
  Point x(d);
  for (int i1 = 0; i1 < outer; ++i1)
    for (int i0 = 0; i0 < cells; ++i0) {
      x[0] = (i0 + 0.5) * h;
      if (d == 2) x[1] = (i1 + 0.5) * h;
      const Point p = J.project(x);
      std::vector<double> key(p.data(), p.data() + p.size());
      if (seen.emplace(key, static_cast<int>(out.size())).second) out.push_back(p);
    }
  return out;
}

int effective_risk_cells(const StudyConfig& cfg) {
  if (cfg.risk_cells > 0) return cfg.risk_cells;
  return cfg.kind == StudyKind::integrated_risk ? 100 : 0;
}

void report(const ProgressFn& progress, const std::string& msg) {
  if (progress) progress(msg);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string cell_label(const CellSetup& c) {
  std::ostringstream s;
  s << "delta=" << c.delta << " N=" << c.N << " h=" << c.h << " M=" << c.grid.M << " n_t=" << c.grid.n_t;
  return s.str();
}

}  // namespace

std::string to_string(StudyKind k) {
  switch (k) {
    case StudyKind::rate_in_delta: return "rate_in_delta";
    case StudyKind::bandwidth_sweep: return "bandwidth_sweep";
    case StudyKind::trajectory: return "trajectory";
    case StudyKind::integrated_risk: return "integrated_risk";
  }
  return "rate_in_delta";
}

StudyKind study_kind_from_string(const std::string& s) {
  if (s == "rate_in_delta" || s == "rate") return StudyKind::rate_in_delta;
  if (s == "bandwidth_sweep" || s == "sweep") return StudyKind::bandwidth_sweep;
  if (s == "trajectory") return StudyKind::trajectory;
  if (s == "integrated_risk" || s == "risk") return StudyKind::integrated_risk;
  throw ConfigError("unknown study kind '" + s + "'");
}

double BandwidthRule::h(double delta, int N, int dimension) const {
  const double d = dimension;
  switch (kind) {
    case Kind::fixed: return c_h;
    case Kind::delta_power: return c_h * std::pow(delta, exponent ? *exponent : d / (2.0 * beta + d));
    case Kind::n_power: return c_h * std::pow(static_cast<double>(N), -(exponent ? *exponent : 1.0 / (2.0 * beta + d)));
  }
  return c_h;
}

void StudyConfig::validate() const {
  model.validate();
  const int d = dimension();
  if (d != 1 && d != 2) throw ConfigError("studies support d = 1 or 2");
  if (!kernel) throw ConfigError("study has no kernel");
  if (kernel->dimension() != d) throw ConfigError("kernel dimension differs from the model dimension");
  if (deltas.empty()) throw ConfigError("empty delta grid");
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    if (!(deltas[i] > 0.0)) throw ConfigError("delta values must be positive");
    if (i > 0 && !(deltas[i] < deltas[i - 1])) throw ConfigError("delta grid must be strictly decreasing");
  }
  if (replicates < 1) throw ConfigError("replicates must be >= 1");
  if (!(h_rule.c_h > 0.0) || !(h_rule.beta > 0.0)) throw ConfigError("bandwidth rule needs c_h > 0 and beta > 0");
  if (h_rule.exponent && !(*h_rule.exponent > 0.0)) throw ConfigError("bandwidth exponent must be positive");
  if (layout.points.empty()) {
    if (layout.J.lower.size() != d || layout.J.upper.size() != d) throw ConfigError("layout box has the wrong dimension");
    if (!(layout.J.lower.array() < layout.J.upper.array()).all()) throw ConfigError("layout box needs lower < upper");
    if (!(layout.J.lower.array() > 0.0).all() || !(layout.J.upper.array() < 1.0).all())
      throw ConfigError("layout box must lie inside (0,1)^d");
    if (!(layout.margin >= 0.0)) throw ConfigError("layout margin must be nonnegative");
  } else {
    for (const auto& p : layout.points)
      if (p.size() != d || !inside_unit_box(p)) throw ConfigError("explicit measurement location outside (0,1)^d");
  }
  if (kind == StudyKind::rate_in_delta || kind == StudyKind::bandwidth_sweep) {
    if (eval_points.empty()) throw ConfigError("study needs at least one evaluation point");
  }
  for (const auto& p : eval_points)
    if (p.size() != d || !inside_unit_box(p)) throw ConfigError("evaluation point outside (0,1)^d");
  if (kind == StudyKind::bandwidth_sweep) {
    if (deltas.size() != 1) throw ConfigError("a bandwidth sweep runs at a single delta");
    if (h_grid.empty()) throw ConfigError("bandwidth sweep needs an h grid");
    for (std::size_t i = 0; i < h_grid.size(); ++i)
      if (!(h_grid[i] > 0.0) || (i > 0 && !(h_grid[i] > h_grid[i - 1])))
        throw ConfigError("h grid must be positive and strictly increasing");
  }
  if (kind == StudyKind::integrated_risk && layout.points.size() > 0)
    throw ConfigError("integrated risk needs the box layout (it defines the region J)");
  if (trajectory_points < 1) throw ConfigError("trajectory_points must be >= 1");
  if (risk_cells < 0) throw ConfigError("risk_cells must be >= 0");
  if (!(cfl > 0.0 && cfl <= 1.0)) throw ConfigError("cfl must lie in (0, 1]");
  if (!(time_resolution > 0.0) || min_steps < 1) throw ConfigError("time_resolution > 0 and min_steps >= 1 required");
  if (!(resolution_ratio > 0.0)) throw ConfigError("resolution_ratio must be positive");
  if (!(failure_tolerance >= 0.0 && failure_tolerance <= 1.0)) throw ConfigError("failure_tolerance must lie in [0, 1]");
  if (name.empty() || name.find('/') != std::string::npos) throw ConfigError("study name must be a plain file stem");
}

StudyConfig StudyConfig::from_json(const json& j) {
  StudyConfig c;
  try {
    c.kind = study_kind_from_string(j.value("kind", std::string("rate_in_delta")));
    c.name = j.value("name", to_string(c.kind));
    c.model = ModelSpec::from_json(j.at("model"));
    const int d = c.model.dimension;
    c.kernel = std::make_shared<BaseKernel>(j.contains("kernel") ? BaseKernel::from_json(j.at("kernel"))
                                                                 : BaseKernel::polynomial_bump(d));
    if (j.contains("deltas")) c.deltas = deltas_from_json(j.at("deltas"));
    if (j.contains("delta")) c.deltas = {j.at("delta").get<double>()};
    c.replicates = j.value("replicates", c.replicates);
    if (j.contains("bandwidth")) {
      const auto& b = j.at("bandwidth");
      c.h_rule.kind = bandwidth_kind_from(b.value("rule", std::string("delta_power")));
      c.h_rule.beta = b.value("beta", c.h_rule.beta);
      c.h_rule.c_h = b.value("c_h", c.h_rule.c_h);
      if (b.contains("exponent")) c.h_rule.exponent = b.at("exponent").get<double>();
    }
    if (j.contains("h_grid")) {
      const auto& g = j.at("h_grid");
      c.h_grid = g.is_array() ? g.get<std::vector<double>>()
                              : geometric(g.at("min").get<double>(), g.at("max").get<double>(), g.at("count").get<int>());
    }
    c.layout.J = Box{filled(d, 0.2), filled(d, 0.8)};
    if (j.contains("layout")) {
      const auto& l = j.at("layout");
      if (l.contains("J")) {
        const auto& J = l.at("J");
        auto bound = [&](const json& v) { return v.is_number() ? filled(d, v.get<double>()) : point_from_json(v, d); };
        c.layout.J = Box{bound(J.at("lower")), bound(J.at("upper"))};
      }
      c.layout.margin = l.value("margin", c.layout.margin);
      if (l.contains("points")) c.layout.points = points_from_json(l.at("points"), d);
    }
    if (j.contains("eval_points")) c.eval_points = points_from_json(j.at("eval_points"), d);
    else c.eval_points = {0.5 * (c.layout.J.lower + c.layout.J.upper)};
    if (j.contains("weights")) {
      const auto& w = j.at("weights");
      c.V = smoothing_kernel_from_string(w.value("V", to_string(c.V)));
      c.ridge = w.value("ridge", c.ridge);
      c.local_constant_fallback = w.value("local_constant_fallback", c.local_constant_fallback);
    }
    c.estimate_a = j.value("estimate_a", c.estimate_a);
    c.risk_cells = j.value("risk_cells", c.risk_cells);
    c.trajectory_points = j.value("trajectory_points", c.trajectory_points);
    c.seed = j.value("seed", c.seed);
    c.output_dir = j.value("output", c.output_dir);
    if (j.contains("discretization")) {
      const auto& t = j.at("discretization");
      c.scheme = time_scheme_from_string(t.value("scheme", to_string(c.scheme)));
      c.cfl = t.value("cfl", c.cfl);
      c.time_resolution = t.value("time_resolution", c.time_resolution);
      c.min_steps = t.value("min_steps", c.min_steps);
      c.resolution_ratio = t.value("resolution_ratio", c.resolution_ratio);
      c.stencil = stencil_kind_from_string(t.value("stencil", to_string(c.stencil)));
    }
    c.failure_tolerance = j.value("failure_tolerance", c.failure_tolerance);
    c.dump_paths = j.value("dump_paths", c.dump_paths);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("study config: ") + e.what());
  }
  c.validate();
  return c;
}

StudyConfig StudyConfig::load(const std::string& path) {
  const auto ext = std::filesystem::path(path).extension().string();
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  if (ext == ".toml") {
    // same schema as the JSON form; toml++ writes the table out as JSON
    try {
      std::ostringstream as_json;
      as_json << toml::json_formatter{toml::parse(in, path)};
      return from_json(json::parse(as_json.str()));
    } catch (const toml::parse_error& e) {
      std::ostringstream msg;
      msg << path << ":" << e.source().begin.line << ": " << e.description();
      throw ConfigError(msg.str());
    } catch (const json::exception& e) {
      throw ConfigError(path + ": " + e.what());
    }
  }
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return from_json(j);
}

json StudyConfig::to_json() const {
  json j;
  j["kind"] = lmspde::to_string(kind);
  j["name"] = name;
  j["deltas"] = deltas;
  j["replicates"] = replicates;
  j["bandwidth"] = {{"rule", bandwidth_kind_name(h_rule.kind)}, {"beta", h_rule.beta}, {"c_h", h_rule.c_h}};
  if (h_rule.exponent) j["bandwidth"]["exponent"] = *h_rule.exponent;
  if (!h_grid.empty()) j["h_grid"] = h_grid;
  j["model"] = model.to_json();
  j["kernel"] = kernel->to_json();
  json l;
  l["J"] = {{"lower", point_to_json(layout.J.lower)}, {"upper", point_to_json(layout.J.upper)}};
  l["margin"] = layout.margin;
  if (!layout.points.empty()) {
    l["points"] = json::array();
    for (const auto& p : layout.points) l["points"].push_back(point_to_json(p));
  }
  j["layout"] = l;
  j["eval_points"] = json::array();
  for (const auto& p : eval_points) j["eval_points"].push_back(point_to_json(p));
  j["weights"] = {{"V", lmspde::to_string(V)}, {"ridge", ridge}, {"local_constant_fallback", local_constant_fallback}};
  j["estimate_a"] = estimate_a;
  j["risk_cells"] = risk_cells;
  j["trajectory_points"] = trajectory_points;
  j["seed"] = seed;
  j["output"] = output_dir;
  j["discretization"] = {{"scheme", lmspde::to_string(scheme)},
                         {"cfl", cfl},
                         {"time_resolution", time_resolution},
                         {"min_steps", min_steps},
                         {"resolution_ratio", resolution_ratio},
                         {"stencil", lmspde::to_string(stencil)}};
  j["failure_tolerance"] = failure_tolerance;
  j["dump_paths"] = dump_paths;
  return j;
}

std::vector<Point> packed_locations(const Box& J, double support_radius, double margin) {
  const int d = static_cast<int>(J.lower.size());
  std::vector<int> n(static_cast<std::size_t>(d));
  for (int c = 0; c < d; ++c) {
    const double side = J.upper[c] - J.lower[c];
    n[static_cast<std::size_t>(c)] = static_cast<int>(std::floor(side / (2.0 * support_radius * (1.0 + margin))));
    if (n[static_cast<std::size_t>(c)] < 1)
      throw ConfigError("layout box is narrower than one kernel support at support radius " +
                        std::to_string(support_radius));
  }
  auto coord = [&](int c, int i) {
    const int m = n[static_cast<std::size_t>(c)];
    if (m == 1) return 0.5 * (J.lower[c] + J.upper[c]);
    return J.lower[c] + (J.upper[c] - J.lower[c]) * i / (m - 1);
  };
  std::vector<Point> out;
  const int outer = d == 2 ? n[1] : 1;
  for (int i1 = 0; i1 < outer; ++i1)
    for (int i0 = 0; i0 < n[0]; ++i0) {
      Point p(d);
      p[0] = coord(0, i0);
      if (d == 2) p[1] = coord(1, i1);
      out.push_back(p);
    }
  return out;
}

Grid grid_for(const StudyConfig& cfg, double delta) {
  Grid g;
  g.dimension = cfg.dimension();
  g.T = cfg.model.T;
  g.scheme = cfg.scheme;
  g.M = static_cast<int>(std::ceil(cfg.resolution_ratio / (delta * cfg.kernel->support_radius()))) - 1;
  if (g.M < 3) g.M = 3;
  if (cfg.scheme == TimeScheme::explicit_euler) {
    g.n_t = static_cast<int>(std::ceil(g.T / (cfg.cfl * g.explicit_dt_limit(cfg.model.a))));
  } else {
    const double steps = std::ceil(g.T / (cfg.time_resolution * delta * delta));
    g.n_t = std::max(cfg.min_steps, static_cast<int>(steps));
  }
  g.validate();
  return g;
}

CellSetup make_cell(const StudyConfig& cfg, double delta) {
  CellSetup c;
  c.delta = delta;
  c.measurement.delta = delta;
  c.measurement.kernel = cfg.kernel;
  c.measurement.resolution_ratio = cfg.resolution_ratio;
  c.measurement.stencil = cfg.stencil;
  c.measurement.locations = cfg.layout.points.empty()
                                ? packed_locations(cfg.layout.J, delta * cfg.kernel->support_radius(), cfg.layout.margin)
                                : cfg.layout.points;
  c.measurement.validate();
  c.N = c.measurement.size();
  c.h = cfg.h_rule.h(delta, c.N, cfg.dimension());
  c.grid = grid_for(cfg, delta);
  return c;
}

std::uint64_t replicate_seed(std::uint64_t master, int cell, int replicate) {
  std::uint64_t z = (static_cast<std::uint64_t>(static_cast<std::uint32_t>(cell)) << 32) |
                    static_cast<std::uint32_t>(replicate);
  // splitmix64 finalizer
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  z ^= z >> 31;
  return master ^ z;
}

void parallel_for(int n, int workers, const std::function<void(int)>& fn) {
  if (n <= 0) return;
  workers = std::max(1, std::min(workers, n));
  std::atomic<int> next{0};
  std::exception_ptr first;
  std::mutex mu;
  auto run = [&] {
    for (int i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!first) first = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    run();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(run);
    for (auto& t : pool) t.join();
  }
  if (first) std::rethrow_exception(first);
}

SlopeFit fit_loglog_slope(const std::vector<std::pair<double, double>>& pairs) {
  if (pairs.size() < 2) throw ContractError("a log-log slope needs at least two pairs");
  const double n = static_cast<double>(pairs.size());
  double mx = 0.0, my = 0.0;
  for (const auto& [x, y] : pairs) {
    if (!(x > 0.0) || !(y > 0.0)) throw ContractError("log-log fit needs positive values");
    mx += std::log(x);
    my += std::log(y);
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (const auto& [x, y] : pairs) {
    sxx += (std::log(x) - mx) * (std::log(x) - mx);
    sxy += (std::log(x) - mx) * (std::log(y) - my);
  }
  if (!(sxx > 0.0)) throw ContractError("log-log fit needs at least two distinct abscissae");
  SlopeFit f;
  f.points = static_cast<int>(pairs.size());
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  if (pairs.size() >= 3) {
    double ssr = 0.0;
    for (const auto& [x, y] : pairs) {
      const double r = std::log(y) - f.intercept - f.slope * std::log(x);
      ssr += r * r;
    }
    f.stderr_slope = std::sqrt(ssr / (n - 2.0) / sxx);
    f.stderr_defined = true;
  } else {
    f.stderr_slope = std::numeric_limits<double>::quiet_NaN();
  }
  return f;
}

VectorField make_bump_alternative(const Point& x, double h, double beta, double c4) {
  const int d = static_cast<int>(x.size());
  std::vector<ScalarField> zero(static_cast<std::size_t>(d), ScalarField(d));
  return VectorField(std::move(zero), BumpTerm{x, h, beta, c4});
}

ErrorSummary summarize_errors(const std::vector<double>& errors) {
  ErrorSummary s;
  s.count = static_cast<int>(errors.size());
  const double nan = std::numeric_limits<double>::quiet_NaN();
  if (errors.empty()) {
    s.bias = s.std = s.rmse = nan;
    return s;
  }
  double sum = 0.0, sq = 0.0;
  for (double e : errors) {
    sum += e;
    sq += e * e;
  }
  s.bias = sum / s.count;
  s.rmse = std::sqrt(sq / s.count);
  if (s.count > 1) {
    double ss = 0.0;
    for (double e : errors) ss += (e - s.bias) * (e - s.bias);
    s.std = std::sqrt(ss / (s.count - 1));
  } else {
    s.std = nan;
  }
  return s;
}

bool RateCell::valid(double tolerance) const {
  return failures <= tolerance * static_cast<double>(replicates.size());
}

RateStudyResult run_rate_study(const StudyConfig& cfg, int workers, const ProgressFn& progress) {
  cfg.validate();
  if (cfg.kind != StudyKind::rate_in_delta && cfg.kind != StudyKind::integrated_risk)
    throw ConfigError("run_rate_study needs a rate_in_delta or integrated_risk config");
  const int d = cfg.dimension();
  const int n_eval = static_cast<int>(cfg.eval_points.size());
  const int risk_cells = effective_risk_cells(cfg);
  if (cfg.dump_paths) std::filesystem::create_directories(cfg.output_dir);

  RateStudyResult result;
  result.config = cfg;
  for (int ci = 0; ci < static_cast<int>(cfg.deltas.size()); ++ci) {
    const auto t0 = std::chrono::steady_clock::now();
    RateCell cell;
    cell.setup = make_cell(cfg, cfg.deltas[static_cast<std::size_t>(ci)]);
    const CellSetup& setup = cell.setup;
    const PointWeights eval_w = weights_for(cfg, setup, cfg.eval_points, false);
    std::vector<Point> rpoints;
    PointWeights risk_w;
    std::map<std::vector<double>, int> risk_index;
    if (risk_cells > 0) {
      rpoints = risk_points(cfg.layout.J, risk_cells, d);
      risk_w = weights_for(cfg, setup, rpoints, cfg.local_constant_fallback);
      for (std::size_t i = 0; i < rpoints.size(); ++i)
        risk_index.emplace(std::vector<double>(rpoints[i].data(), rpoints[i].data() + d), static_cast<int>(i));
      cell.fallback_points = static_cast<int>(std::count(risk_w.fallback.begin(), risk_w.fallback.end(), true));
    }
    const std::string design_error = !eval_w.error.empty() ? eval_w.error : risk_w.error;
    const double nh = setup.N * std::pow(setup.h, d);

    cell.replicates.resize(static_cast<std::size_t>(cfg.replicates));
    parallel_for(cfg.replicates, workers, [&](int r) {
      ReplicateOutcome& out = cell.replicates[static_cast<std::size_t>(r)];
      out.seed = replicate_seed(cfg.seed, ci, r);
      if (!design_error.empty()) {
        out.ok = false;
        out.error = design_error;
        return;
      }
      out.ok = guarded(
          [&] {
            const StatisticsSet st = simulate_statistics(cfg, setup, ci, r, out.seed);
            for (int p = 0; p < n_eval; ++p) {
              const WeightSet& ws = eval_w.sets[static_cast<std::size_t>(p)];
              out.theta_hat.push_back(weighted_augmented_mle(st, ws, cfg.model.a).theta_hat);
              out.qv_scaled.push_back(martingale_qv(st, ws).diagonal() * nh);
              if (cfg.estimate_a) {
                const double ah = estimate_a(st, &ws);
                if (p == 0) out.a_hat = ah;
                out.theta_hat_plugin.push_back(weighted_augmented_mle(st, ws, ah).theta_hat);
              }
            }
            if (risk_cells > 0) {
              std::vector<Vector> est;
              for (const auto& ws : risk_w.sets) est.push_back(weighted_augmented_mle(st, ws, cfg.model.a).theta_hat);
              auto lookup = [&](const Point& x) {
                return est[static_cast<std::size_t>(risk_index.at(std::vector<double>(x.data(), x.data() + d)))];
              };
              out.risk = integrated_risk(lookup, cfg.model.theta, cfg.layout.J, risk_cells);
            }
          },
          out.error);
    });

    // aggregation in replicate order
    std::vector<const ReplicateOutcome*> ok;
    for (const auto& o : cell.replicates) {
      if (o.ok) {
        ok.push_back(&o);
      } else {
        ++cell.failures;
        if (cell.failure_messages.size() < 5) cell.failure_messages.push_back(o.error);
      }
    }
    cell.known_a.assign(static_cast<std::size_t>(n_eval), {});
    if (cfg.estimate_a) cell.plugin.assign(static_cast<std::size_t>(n_eval), {});
    for (int p = 0; p < n_eval; ++p) {
      const Vector truth = cfg.model.theta.value(cfg.eval_points[static_cast<std::size_t>(p)]);
      Vector qv = Vector::Zero(d);
      for (int c = 0; c < d; ++c) {
        std::vector<double> e, ep;
        for (const auto* o : ok) {
          e.push_back(o->theta_hat[static_cast<std::size_t>(p)][c] - truth[c]);
          if (cfg.estimate_a) ep.push_back(o->theta_hat_plugin[static_cast<std::size_t>(p)][c] - truth[c]);
          qv[c] += o->qv_scaled[static_cast<std::size_t>(p)][c];
        }
        cell.known_a[static_cast<std::size_t>(p)].push_back(summarize_errors(e));
        if (cfg.estimate_a) cell.plugin[static_cast<std::size_t>(p)].push_back(summarize_errors(ep));
      }
      cell.qv_scaled_mean.push_back(ok.empty() ? Vector::Constant(d, std::nan("")) : Vector(qv / ok.size()));
    }
    if (cfg.estimate_a) {
      std::vector<double> ea;
      for (const auto* o : ok) ea.push_back(o->a_hat - cfg.model.a);
      cell.a_hat = summarize_errors(ea);
    }
    if (risk_cells > 0) {
      cell.risk_interior = Vector::Zero(d);
      cell.risk_boundary = Vector::Zero(d);
      for (const auto* o : ok) {
        cell.risk_interior += o->risk->interior;
        cell.risk_boundary += o->risk->boundary;
      }
      if (!ok.empty()) {
        cell.risk_interior /= static_cast<double>(ok.size());
        cell.risk_boundary /= static_cast<double>(ok.size());
      }
    }
    if (!cell.valid(cfg.failure_tolerance)) result.valid = false;
    std::ostringstream msg;
    msg << "cell " << ci + 1 << "/" << cfg.deltas.size() << " " << cell_label(setup) << ": " << ok.size() << "/"
        << cfg.replicates << " ok";
    if (!cell.known_a.empty() && !cell.known_a[0].empty()) msg << ", rmse " << cell.known_a[0][0].rmse;
    msg << " (" << seconds_since(t0) << " s)";
    report(progress, msg.str());
    result.cells.push_back(std::move(cell));
  }

  auto usable = [](const ErrorSummary& s) { return s.count > 0 && s.rmse > 0.0 && std::isfinite(s.rmse); };
  auto fit = [&](auto select) -> std::optional<SlopeFit> {
    std::vector<std::pair<double, double>> pairs;
    for (const auto& c : result.cells) {
      const ErrorSummary* s = select(c);
      if (s && usable(*s)) pairs.emplace_back(c.setup.delta, s->rmse);
    }
    if (pairs.size() < 2) return std::nullopt;
    return fit_loglog_slope(pairs);
  };
  if (result.cells.size() >= 2) {
    for (int p = 0; p < n_eval; ++p) {
      std::vector<SlopeFit> row, row_plugin;
      for (int c = 0; c < d; ++c) {
        if (auto f = fit([&](const RateCell& cell) { return &cell.known_a[static_cast<std::size_t>(p)][static_cast<std::size_t>(c)]; }))
          row.push_back(*f);
        if (cfg.estimate_a)
          if (auto f = fit([&](const RateCell& cell) { return &cell.plugin[static_cast<std::size_t>(p)][static_cast<std::size_t>(c)]; }))
            row_plugin.push_back(*f);
      }
      if (row.size() == static_cast<std::size_t>(d)) result.slope.push_back(row);
      if (row_plugin.size() == static_cast<std::size_t>(d)) result.slope_plugin.push_back(row_plugin);
    }
    if (risk_cells > 0) {
      std::vector<std::pair<double, double>> pairs;
      for (const auto& c : result.cells)
        if (c.failures < static_cast<int>(c.replicates.size()) && c.risk_interior.sum() > 0.0)
          pairs.emplace_back(c.setup.delta, c.risk_interior.sum());
      if (pairs.size() >= 2) result.slope_risk = fit_loglog_slope(pairs);
    }
  }
  return result;
}

bool SweepResult::u_shape(double margin) const {
  int first = -1, last = -1;
  for (int i = 0; i < static_cast<int>(cells.size()); ++i)
    if (!cells[static_cast<std::size_t>(i)].degenerate && !cells[static_cast<std::size_t>(i)].error.empty() &&
        cells[static_cast<std::size_t>(i)].error[0].count > 0) {
      if (first < 0) first = i;
      last = i;
    }
  if (argmin < 0 || argmin == first || argmin == last) return false;
  return left_ratio >= 1.0 + margin && right_ratio >= 1.0 + margin;
}

SweepResult run_bandwidth_sweep(const StudyConfig& cfg, int workers, const ProgressFn& progress) {
  cfg.validate();
  if (cfg.kind != StudyKind::bandwidth_sweep) throw ConfigError("run_bandwidth_sweep needs a bandwidth_sweep config");
  const int d = cfg.dimension();
  const auto t0 = std::chrono::steady_clock::now();
  if (cfg.dump_paths) std::filesystem::create_directories(cfg.output_dir);
  SweepResult res;
  res.config = cfg;
  res.setup = make_cell(cfg, cfg.deltas.front());
  const Point& x = cfg.eval_points.front();
  const int H = static_cast<int>(cfg.h_grid.size());
  std::vector<WeightSet> ws(static_cast<std::size_t>(H));
  res.cells.resize(static_cast<std::size_t>(H));
  for (int i = 0; i < H; ++i) {
    auto& c = res.cells[static_cast<std::size_t>(i)];
    c.h = cfg.h_grid[static_cast<std::size_t>(i)];
    try {
      ws[static_cast<std::size_t>(i)] = compute_weights(x, res.setup.measurement.locations, WeightConfig{c.h, cfg.V, cfg.ridge});
      c.active = ws[static_cast<std::size_t>(i)].active;
    } catch (const DegenerateDesignError& e) {
      c.degenerate = true;
      c.degenerate_message = e.what();
    }
  }
  res.seeds.resize(static_cast<std::size_t>(cfg.replicates));
  res.estimate.assign(static_cast<std::size_t>(cfg.replicates), std::vector<Vector>(static_cast<std::size_t>(H)));
  parallel_for(cfg.replicates, workers, [&](int r) {
    const std::uint64_t seed = replicate_seed(cfg.seed, 0, r);
    res.seeds[static_cast<std::size_t>(r)] = seed;
    std::string err;
    StatisticsSet st;
    if (!guarded([&] { st = simulate_statistics(cfg, res.setup, 0, r, seed); }, err)) return;
    for (int i = 0; i < H; ++i) {
      if (res.cells[static_cast<std::size_t>(i)].degenerate) continue;
      guarded([&] {
        res.estimate[static_cast<std::size_t>(r)][static_cast<std::size_t>(i)] =
            weighted_augmented_mle(st, ws[static_cast<std::size_t>(i)], cfg.model.a).theta_hat;
      }, err);
    }
  });
  const Vector truth = cfg.model.theta.value(x);
  double best = std::numeric_limits<double>::infinity();
  int first = -1, last = -1;
  for (int i = 0; i < H; ++i) {
    auto& c = res.cells[static_cast<std::size_t>(i)];
    if (c.degenerate) continue;
    for (int comp = 0; comp < d; ++comp) {
      std::vector<double> e;
      for (int r = 0; r < cfg.replicates; ++r) {
        const Vector& v = res.estimate[static_cast<std::size_t>(r)][static_cast<std::size_t>(i)];
        if (v.size() == 0) continue;
        e.push_back(v[comp] - truth[comp]);
      }
      c.error.push_back(summarize_errors(e));
    }
    c.failures = cfg.replicates - c.error[0].count;
    if (c.failures > cfg.failure_tolerance * cfg.replicates) res.valid = false;
    if (c.error[0].count == 0) continue;
    if (first < 0) first = i;
    last = i;
    if (c.error[0].rmse < best) {
      best = c.error[0].rmse;
      res.argmin = i;
    }
  }
  if (res.argmin >= 0) {
    res.left_ratio = res.cells[static_cast<std::size_t>(first)].error[0].rmse / best;
    res.right_ratio = res.cells[static_cast<std::size_t>(last)].error[0].rmse / best;
  }
  std::ostringstream msg;
  msg << "sweep " << cell_label(res.setup) << ": " << H << " bandwidths, argmin h = "
      << (res.argmin >= 0 ? res.cells[static_cast<std::size_t>(res.argmin)].h : std::nan("")) << " ("
      << seconds_since(t0) << " s)";
  report(progress, msg.str());
  return res;
}

std::vector<double> TrajectoryCell::sup_errors() const {
  std::vector<double> out;
  for (const auto& rep : estimate) {
    if (rep.empty()) {
      out.push_back(std::nan(""));
      continue;
    }
    double m = 0.0;
    for (std::size_t i = 0; i < rep.size(); ++i) m = std::max(m, (rep[i] - truth[i]).lpNorm<Eigen::Infinity>());
    out.push_back(m);
  }
  return out;
}

double TrajectoryCell::median_sup_error() const {
  std::vector<double> v;
  for (double e : sup_errors())
    if (std::isfinite(e)) v.push_back(e);
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

TrajectoryResult run_trajectory(const StudyConfig& cfg, int workers, const ProgressFn& progress) {
  cfg.validate();
  if (cfg.kind != StudyKind::trajectory) throw ConfigError("run_trajectory needs a trajectory config");
  if (cfg.dump_paths) std::filesystem::create_directories(cfg.output_dir);
  TrajectoryResult res;
  res.config = cfg;
  const std::vector<Point> xs = box_grid(cfg.layout.J, cfg.trajectory_points);
  for (int ci = 0; ci < static_cast<int>(cfg.deltas.size()); ++ci) {
    const auto t0 = std::chrono::steady_clock::now();
    TrajectoryCell cell;
    cell.setup = make_cell(cfg, cfg.deltas[static_cast<std::size_t>(ci)]);
    cell.x = xs;
    for (const auto& x : xs) cell.truth.push_back(cfg.model.theta.value(x));
    const PointWeights pw = weights_for(cfg, cell.setup, xs, cfg.local_constant_fallback);
    cell.fallback = pw.fallback;
    cell.estimate.assign(static_cast<std::size_t>(cfg.replicates), {});
    cell.seeds.resize(static_cast<std::size_t>(cfg.replicates));
    std::vector<std::string> errors(static_cast<std::size_t>(cfg.replicates));
    parallel_for(cfg.replicates, workers, [&](int r) {
      const std::uint64_t seed = replicate_seed(cfg.seed, ci, r);
      cell.seeds[static_cast<std::size_t>(r)] = seed;
      if (!pw.error.empty()) {
        errors[static_cast<std::size_t>(r)] = pw.error;
        return;
      }
      std::vector<Vector> est;
      if (guarded(
              [&] {
                const StatisticsSet st = simulate_statistics(cfg, cell.setup, ci, r, seed);
                for (const auto& ws : pw.sets) est.push_back(weighted_augmented_mle(st, ws, cfg.model.a).theta_hat);
              },
              errors[static_cast<std::size_t>(r)]))
        cell.estimate[static_cast<std::size_t>(r)] = std::move(est);
    });
    for (const auto& e : errors)
      if (!e.empty()) {
        ++cell.failures;
        if (cell.failure_messages.size() < 5) cell.failure_messages.push_back(e);
      }
    if (cell.failures > cfg.failure_tolerance * cfg.replicates) res.valid = false;
    std::ostringstream msg;
    msg << "trajectory cell " << ci + 1 << "/" << cfg.deltas.size() << " " << cell_label(cell.setup)
        << ": median sup error " << cell.median_sup_error() << " (" << seconds_since(t0) << " s)";
    report(progress, msg.str());
    res.cells.push_back(std::move(cell));
  }
  return res;
}

}  // namespace lmspde
