// lmspde: Monte Carlo studies for velocity estimation from local measurements.
//
// exit codes: 0 ok, 1 internal error, 2 configuration error, 3 study invalidated
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "lmspde/errors.hpp"
#include "lmspde/experiments.hpp"

using namespace lmspde;

namespace {

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  int workers = 1;
  std::string out;
  bool dump_paths = false;
  bool quiet = false;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config, "study configuration (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "master seed (overrides the config)");
  cmd->add_option("--workers", o.workers, "worker threads")->check(CLI::PositiveNumber);
  cmd->add_option("--out", o.out, "output directory (overrides the config)");
  cmd->add_flag("--dump-paths", o.dump_paths, "write replicate 0 of every cell as a binary path");
  cmd->add_flag("-q,--quiet", o.quiet, "no progress lines on stderr");
}

StudyConfig load(const CommonOptions& o, StudyKind kind) {
  StudyConfig cfg = StudyConfig::load(o.config);
  if (cfg.kind != kind) {
    // the subcommand decides; the config may be shared between study kinds
    cfg.kind = kind;
  }
  if (o.seed) cfg.seed = *o.seed;
  if (!o.out.empty()) cfg.output_dir = o.out;
  if (o.dump_paths) cfg.dump_paths = true;
  cfg.validate();
  return cfg;
}

ProgressFn progress_for(const CommonOptions& o) {
  if (o.quiet) return {};
  return [](const std::string& msg) { std::cerr << msg << std::endl; };
}

void list_files(const std::vector<std::string>& files) {
  for (const auto& f : files) std::cout << "wrote " << f << '\n';
}

int finish(bool valid, const std::string& what) {
  if (!valid) throw StudyInvalidError(what + ": a cell lost more than the tolerated share of replicates");
  return 0;
}

int cmd_rate(const CommonOptions& o, StudyKind kind) {
  const StudyConfig cfg = load(o, kind);
  const RateStudyResult r = run_rate_study(cfg, o.workers, progress_for(o));
  list_files(write_outputs(r));
  std::cout.precision(6);
  for (const auto& c : r.cells) {
    std::cout << "delta " << c.setup.delta << "  N " << c.setup.N << "  h " << c.setup.h << "  failures " << c.failures;
    if (!c.known_a.empty()) std::cout << "  rmse " << c.known_a[0][0].rmse;
    if (cfg.estimate_a) std::cout << "  a_hat " << cfg.model.a + c.a_hat.bias;
    if (c.risk_interior.size() > 0) std::cout << "  risk(J) " << c.risk_interior.sum();
    std::cout << '\n';
  }
  for (std::size_t p = 0; p < r.slope.size(); ++p)
    for (std::size_t c = 0; c < r.slope[p].size(); ++c) {
      const auto& f = r.slope[p][c];
      std::cout << "slope point " << p << " component " << c << ": " << f.slope;
      if (f.stderr_defined) std::cout << " +- " << f.stderr_slope;
      std::cout << '\n';
    }
  if (r.slope_risk) std::cout << "slope interior risk: " << r.slope_risk->slope << '\n';
  return finish(r.valid, cfg.name);
}

int cmd_sweep(const CommonOptions& o) {
  const StudyConfig cfg = load(o, StudyKind::bandwidth_sweep);
  const SweepResult r = run_bandwidth_sweep(cfg, o.workers, progress_for(o));
  list_files(write_outputs(r));
  for (const auto& c : r.cells) {
    std::cout << "h " << c.h;
    if (c.degenerate) std::cout << "  degenerate design";
    else std::cout << "  active " << c.active << "  rmse " << c.error[0].rmse << "  bias " << c.error[0].bias;
    std::cout << '\n';
  }
  std::cout << "end ratios " << r.left_ratio << " / " << r.right_ratio << "  u-shape "
            << (r.u_shape() ? "yes" : "no") << '\n';
  return finish(r.valid, cfg.name);
}

int cmd_trajectory(const CommonOptions& o) {
  const StudyConfig cfg = load(o, StudyKind::trajectory);
  const TrajectoryResult r = run_trajectory(cfg, o.workers, progress_for(o));
  list_files(write_outputs(r));
  for (const auto& c : r.cells)
    std::cout << "delta " << c.setup.delta << "  median sup error " << c.median_sup_error() << "  failures "
              << c.failures << '\n';
  return finish(r.valid, cfg.name);
}

// Weight checks on the configured layout at every evaluation point (and every h of a sweep).
int cmd_validate_weights(const CommonOptions& o) {
  StudyConfig cfg = StudyConfig::load(o.config);
  if (!o.out.empty()) cfg.output_dir = o.out;
  std::filesystem::create_directories(cfg.output_dir);
  const auto file = (std::filesystem::path(cfg.output_dir) / (cfg.name + "_weights.csv")).string();
  std::ofstream csv(file);
  if (!csv) throw ConfigError("cannot write " + file);
  const int d = cfg.dimension();
  for (int i = 0; i < d; ++i) csv << "x_" << i + 1 << ',';
  csv << "delta,N,h,active,min_eigenvalue,max_scaled,abs_sum,sum_residual,moment_residual,support_violations,pass\n";
  csv.precision(12);
  int failed = 0, checked = 0;
  for (double delta : cfg.deltas) {
    const CellSetup cell = make_cell(cfg, delta);
    std::vector<double> hs = cfg.kind == StudyKind::bandwidth_sweep ? cfg.h_grid : std::vector<double>{cell.h};
    std::vector<Point> xs = cfg.eval_points;
    for (double h : hs)
      for (const auto& x : xs) {
        ++checked;
        for (int i = 0; i < d; ++i) csv << x[i] << ',';
        csv << delta << ',' << cell.N << ',' << h << ',';
        try {
          const WeightSet ws = compute_weights(x, cell.measurement.locations, WeightConfig{h, cfg.V, cfg.ridge});
          const WeightReport rep = validate_weights(ws, cell.measurement.locations);
          csv << ws.active << ',' << ws.min_eigenvalue << ',' << rep.max_scaled << ',' << rep.abs_sum << ','
              << rep.sum_residual << ',' << rep.moment_residual.maxCoeff() << ',' << rep.support_violations << ','
              << (rep.pass() ? 1 : 0) << '\n';
          if (!rep.pass()) ++failed;
        } catch (const DegenerateDesignError& e) {
          csv << ",,,,,,,0\n";
          ++failed;
          std::cerr << "delta " << delta << ": " << e.what() << '\n';
        }
      }
  }
  std::cout << "wrote " << file << '\n' << checked - failed << "/" << checked << " weight sets pass\n";
  if (failed > 0) throw StudyInvalidError(std::to_string(failed) + " weight set(s) failed validation");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monte Carlo studies for velocity estimation in stochastic convection-diffusion equations"};
  app.require_subcommand(1);
  CommonOptions o;
  auto* rate = app.add_subcommand("rate", "RMSE against delta at fixed evaluation points");
  auto* sweep = app.add_subcommand("sweep", "RMSE against the bandwidth at a single delta");
  auto* traj = app.add_subcommand("trajectory", "estimates over the box J against the truth");
  auto* risk = app.add_subcommand("risk", "integrated risk over the domain against delta");
  auto* weights = app.add_subcommand("validate-weights", "check the local-linear weights of a layout");
  for (auto* cmd : {rate, sweep, traj, risk, weights}) add_common(cmd, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (rate->parsed()) return cmd_rate(o, StudyKind::rate_in_delta);
    if (risk->parsed()) return cmd_rate(o, StudyKind::integrated_risk);
    if (sweep->parsed()) return cmd_sweep(o);
    if (traj->parsed()) return cmd_trajectory(o);
    if (weights->parsed()) return cmd_validate_weights(o);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const StudyInvalidError& e) {
    std::cerr << "study invalid: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
