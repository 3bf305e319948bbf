// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 if any fails.
//
//   lmspde_acceptance [--only 1,3,8] [--workers n] [--out dir]
//
// Tolerances are fixed here; the Monte Carlo sizes match the criteria (R = 100, 200, 20).
#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <iostream>
#include <memory>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "lmspde/errors.hpp"
#include "lmspde/estimator.hpp"
#include "lmspde/experiments.hpp"
#include "lmspde/kernel.hpp"
#include "lmspde/simulator.hpp"
#include "lmspde/weights.hpp"
#include "properties.hpp"

using namespace lmspde;

namespace {

// pinned tolerances
constexpr double kSlopeLo = 0.28, kSlopeHi = 0.52;
constexpr double kUShapeMargin = 0.20;
constexpr double kFisherRel = 0.10;
constexpr double kParsevalRel = 1e-6;
constexpr double kReproducing = 1e-10;
constexpr double kNadarayaWatson = 1e-12;
constexpr double kDecompositionRel = 1e-3;
constexpr double kAHatRel = 0.05;
constexpr double kRiskLo = 0.55, kRiskHi = 1.05;

constexpr std::uint64_t kSeed = 20240601;

int failed = 0;

void verdict(int id, bool ok, const std::string& detail) {
  std::cout << "criterion " << id << ": " << (ok ? "PASS" : "FAIL") << "  " << detail << std::endl;
  if (!ok) ++failed;
}

void info(const std::string& msg) { std::cout << "  info: " << msg << std::endl; }

std::string fmt(double v, int prec = 4) {
  std::ostringstream s;
  s << std::setprecision(prec) << v;
  return s.str();
}

Point at(double v) { return Point::Constant(1, v); }

// θ(x) = -0.3 + 1.5x², x = 0.5, h = 0.5 δ^{2/5}, maximal packing on [0.2, 0.8].
StudyConfig quadratic_config(const std::string& out) {
  StudyConfig cfg;
  cfg.kind = StudyKind::rate_in_delta;
  cfg.name = "acceptance_rate";
  cfg.deltas = {std::ldexp(1.0, -4), std::ldexp(1.0, -5), std::ldexp(1.0, -6), std::ldexp(1.0, -7)};
  cfg.replicates = 100;
  cfg.h_rule.kind = BandwidthRule::Kind::delta_power;
  cfg.h_rule.beta = 2.0;
  cfg.h_rule.c_h = 0.5;
  cfg.h_rule.exponent = 0.4;
  cfg.model.a = 1.0;
  cfg.model.T = 1.0;
  cfg.model.theta = VectorField({ScalarField::polynomial({-0.3, 0.0, 1.5})});
  cfg.kernel = std::make_shared<BaseKernel>(BaseKernel::polynomial_bump(1));
  cfg.layout.J = Box{at(0.2), at(0.8)};
  cfg.layout.margin = 0.1;
  cfg.eval_points = {at(0.5)};
  cfg.V = SmoothingKernel::epanechnikov;
  cfg.estimate_a = true;
  cfg.risk_cells = 100;
  cfg.seed = kSeed;
  cfg.output_dir = out;
  cfg.scheme = TimeScheme::explicit_euler;
  cfg.cfl = 0.9;
  cfg.resolution_ratio = 8.0;
  cfg.stencil = StencilKind::discrete;
  cfg.validate();
  return cfg;
}

ProgressFn progress() {
  return [](const std::string& m) { std::cerr << "    " << m << std::endl; };
}

// Criteria 1, 6 and 7 share one rate study.
void rate_criteria(const std::set<int>& only, int workers, const std::string& out) {
  const StudyConfig cfg = quadratic_config(out);
  const RateStudyResult r = run_rate_study(cfg, workers, progress());
  write_outputs(r);
  for (const auto& c : r.cells)
    info("delta " + fmt(c.setup.delta) + " N " + std::to_string(c.setup.N) + " h " + fmt(c.setup.h) + " rmse " +
         fmt(c.known_a[0][0].rmse) + " bias " + fmt(c.known_a[0][0].bias) + " plug-in rmse " +
         fmt(c.plugin[0][0].rmse) + " mean a_hat " + fmt(cfg.model.a + c.a_hat.bias) + " risk(J) " +
         fmt(c.risk_interior.sum()) + " failures " + std::to_string(c.failures));
  const std::string validity = r.valid ? "" : " (study invalidated by failures)";

  if (only.count(1)) {
    const auto& f = r.slope[0][0];
    const bool ok = r.valid && f.slope >= kSlopeLo && f.slope <= kSlopeHi;
    verdict(1, ok, "rate slope " + fmt(f.slope) + " +- " + fmt(f.stderr_slope) + " in [" + fmt(kSlopeLo) + ", " +
                       fmt(kSlopeHi) + "]" + validity);
  }
  if (only.count(6)) {
    const auto& f = r.slope_plugin[0][0];
    const double mean_a = cfg.model.a + r.cells.back().a_hat.bias;
    const double rel = std::abs(mean_a - cfg.model.a) / cfg.model.a;
    const bool ok = r.valid && f.slope >= kSlopeLo && f.slope <= kSlopeHi && rel <= kAHatRel;
    verdict(6, ok, "plug-in slope " + fmt(f.slope) + " +- " + fmt(f.stderr_slope) + ", mean a_hat at delta=2^-7 " +
                       fmt(mean_a, 5) + " (rel " + fmt(rel, 3) + " <= " + fmt(kAHatRel) + ")" + validity);
  }
  if (only.count(7)) {
    bool decreasing = true;
    for (std::size_t i = 1; i < r.cells.size(); ++i)
      decreasing = decreasing && r.cells[i].risk_interior.sum() < r.cells[i - 1].risk_interior.sum();
    const double s = r.slope_risk ? r.slope_risk->slope : std::nan("");
    const bool ok = r.valid && r.slope_risk && decreasing && s >= kRiskLo && s <= kRiskHi;
    verdict(7, ok, "interior risk slope " + fmt(s) + " in [" + fmt(kRiskLo) + ", " + fmt(kRiskHi) + "], decreasing " +
                       (decreasing ? "yes" : "no") + validity);
    // variance scaling: [M]_T · N h^d roughly constant over the grid
    double lo = INFINITY, hi = 0.0;
    for (const auto& c : r.cells) {
      lo = std::min(lo, c.qv_scaled_mean[0][0]);
      hi = std::max(hi, c.qv_scaled_mean[0][0]);
    }
    info("[M]_T N h spread over the delta grid: x" + fmt(hi / lo, 3) + " (within x2: " + (hi / lo <= 2 ? "yes" : "no") + ")");
  }
}

void criterion2(int workers, const std::string& out) {
  StudyConfig cfg = quadratic_config(out);
  cfg.kind = StudyKind::bandwidth_sweep;
  cfg.name = "acceptance_sweep";
  cfg.deltas = {std::ldexp(1.0, -6)};
  cfg.estimate_a = false;
  cfg.risk_cells = 0;
  cfg.h_grid.clear();
  for (int i = 0; i <= 12; ++i) cfg.h_grid.push_back(0.04 * std::pow(2.0, i / 2.0));  // 0.04 .. 2.56
  cfg.validate();
  const SweepResult r = run_bandwidth_sweep(cfg, workers, progress());
  write_outputs(r);
  for (const auto& c : r.cells)
    info("h " + fmt(c.h) + (c.degenerate ? " degenerate" : " rmse " + fmt(c.error[0].rmse) + " bias " + fmt(c.error[0].bias) +
                                                             " std " + fmt(c.error[0].std)));
  const bool ok = r.valid && r.u_shape(kUShapeMargin);
  verdict(2, ok, "end/min RMSE ratios " + fmt(r.left_ratio) + " / " + fmt(r.right_ratio) + ", need both >= " +
                     fmt(1 + kUShapeMargin) + " with an interior minimum (argmin " + std::to_string(r.argmin) + ")");
}

// ℐ with uniform weights 1/N over a maximal packing, Crank–Nicolson at Δt = δ²/4, analytic stencil.
void criterion3(int workers, const std::string& out) {
  const auto K = std::make_shared<BaseKernel>(BaseKernel::polynomial_bump(1));
  const double sigma = fisher_sigma(*K, 1.0, 1.0)(0, 0);
  const double parseval = 0.5 * std::pow(l2_norm(*K), 2);
  const double prel = std::abs(sigma - parseval) / parseval;

  StudyConfig cfg = quadratic_config(out);
  cfg.model.theta = VectorField::zero(1);
  cfg.deltas = {0.01};
  cfg.layout.J = Box{at(0.02), at(0.98)};
  cfg.scheme = TimeScheme::crank_nicolson;
  cfg.time_resolution = 0.25;
  // centred differences of the sampled K lose ~10% of Σ at 8 nodes per support radius; quadrature does not
  cfg.stencil = StencilKind::analytic;
  cfg.validate();
  const CellSetup cell = make_cell(cfg, 0.01);
  WeightSet ws;
  ws.x = at(0.5);
  ws.w = Vector::Constant(cell.N, 1.0 / cell.N);
  ws.active = cell.N;
  const int R = 200;
  std::vector<double> fisher(R);
  parallel_for(R, workers, [&](int rep) {
    StatisticsAccumulator acc(cell.measurement, cell.grid);
    simulate(cfg.model, cell.grid, replicate_seed(kSeed, 3, rep), acc);
    fisher[static_cast<std::size_t>(rep)] = observed_fisher(acc.result(), ws)(0, 0);
  });
  double mean = 0.0;
  for (double f : fisher) mean += f / R;
  const double rel = std::abs(mean - sigma) / sigma;
  info("N " + std::to_string(cell.N) + " (maximal packing), M " + std::to_string(cell.grid.M) + ", n_t " +
       std::to_string(cell.grid.n_t));
  verdict(3, rel <= kFisherRel && prel <= kParsevalRel,
          "mean Fisher " + fmt(mean, 5) + " vs Sigma " + fmt(sigma, 6) + " (rel " + fmt(rel, 3) + " <= " +
              fmt(kFisherRel) + "); Sigma vs Parseval rel " + fmt(prel, 3) + " <= " + fmt(kParsevalRel));
}

void criterion4() {
  std::mt19937_64 rng(kSeed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst_sum = 0.0, worst_moment = 0.0;
  int designs = 0, degenerate = 0;
  while (designs < 1000) {
    const int d = 1 + designs % 2;
    const int N = 5 + static_cast<int>(u(rng) * 60);
    std::vector<Point> locs;
    for (int k = 0; k < N; ++k) {
      Point p(d);
      for (int c = 0; c < d; ++c) p[c] = u(rng);
      locs.push_back(p);
    }
    Point x(d);
    for (int c = 0; c < d; ++c) x[c] = 0.1 + 0.8 * u(rng);
    const WeightConfig wc{0.25 + 0.5 * u(rng), designs % 3 == 0 ? SmoothingKernel::rectangular : SmoothingKernel::epanechnikov,
                          0.0};
    WeightSet ws;
    try {
      ws = compute_weights(x, locs, wc);
    } catch (const DegenerateDesignError&) {
      ++degenerate;  // too few points in the window; draw again
      continue;
    }
    ++designs;
    Vector moment = Vector::Zero(d);
    for (int k = 0; k < N; ++k) moment += (locs[static_cast<std::size_t>(k)] - x) * ws.w[k];
    worst_sum = std::max(worst_sum, std::abs(ws.w.sum() - 1.0));
    worst_moment = std::max(worst_moment, moment.cwiseAbs().maxCoeff());
  }
  // equidistant x_k = (k-1)/(N-1), rectangular V, x on the grid, h < min(x, 1-x)/2
  double worst_nw = 0.0;
  int nw_cases = 0;
  for (int N : {11, 21, 51, 101, 201})
    for (int r = 1; r < N - 1; ++r) {
      std::vector<Point> locs;
      for (int k = 0; k < N; ++k) locs.push_back(at(static_cast<double>(k) / (N - 1)));
      const double x = static_cast<double>(r) / (N - 1);
      for (double frac : {0.3, 0.6, 0.95}) {
        const double h = frac * std::min(x, 1 - x) / 2;
        if (h * (N - 1) < 2.0) continue;  // needs at least three points in the window
        // ties on the window edge are decided by rounding; keep them out of the exact comparison
        const double edge = h / 2 * (N - 1);
        if (std::abs(edge - std::round(edge)) < 1e-6) continue;
        const WeightSet ws = compute_weights(at(x), locs, WeightConfig{h, SmoothingKernel::rectangular, 0.0});
        int count = 0;
        for (int k = 0; k < N; ++k) count += std::abs(locs[static_cast<std::size_t>(k)][0] - x) <= h / 2 ? 1 : 0;
        for (int k = 0; k < N; ++k) {
          const double nw = std::abs(locs[static_cast<std::size_t>(k)][0] - x) <= h / 2 ? 1.0 / count : 0.0;
          worst_nw = std::max(worst_nw, std::abs(ws.w[k] - nw));
        }
        ++nw_cases;
      }
    }
  info(std::to_string(degenerate) + " degenerate draws skipped; " + std::to_string(nw_cases) + " Nadaraya-Watson cases");
  verdict(4, worst_sum < kReproducing && worst_moment < kReproducing && worst_nw < kNadarayaWatson,
          "max |sum w - 1| " + fmt(worst_sum, 3) + ", max |sum (x_k - x) w| " + fmt(worst_moment, 3) + " (< " +
              fmt(kReproducing) + "); max NW deviation " + fmt(worst_nw, 3) + " (< " + fmt(kNadarayaWatson) + ")");
}

void criterion5(int workers, const std::string& out) {
  StudyConfig cfg = quadratic_config(out);
  const double delta = std::ldexp(1.0, -5);
  const CellSetup cell = make_cell(cfg, delta);
  const WeightSet ws = compute_weights(cfg.eval_points[0], cell.measurement.locations, WeightConfig{cell.h, cfg.V, 0.0});
  const int R = 20;
  std::vector<double> err(R), err_nodes(R);
  parallel_for(R, workers, [&](int rep) {
    StatisticsAccumulator acc(cell.measurement, cell.grid, &cfg.model);
    simulate(cfg.model, cell.grid, replicate_seed(kSeed, 5, rep), acc);
    const StatisticsSet st = acc.result();
    const double direct = weighted_augmented_mle(st, ws, cfg.model.a).theta_hat[0];
    const ErrorDecomposition dec = decompose_error(st, ws, cfg.model.theta);
    // relative to the estimate's scale; θ̂ itself can cross zero
    const double scale = std::max(std::abs(direct), std::abs(dec.theta_x[0]));
    err[static_cast<std::size_t>(rep)] = std::abs(dec.reconstruct_discrete()[0] - direct) / scale;
    err_nodes[static_cast<std::size_t>(rep)] = std::abs(dec.reconstruct()[0] - direct) / scale;
  });
  const double worst = *std::max_element(err.begin(), err.end());
  const double worst_nodes = *std::max_element(err_nodes.begin(), err_nodes.end());
  info("with the drift integrand sampled at the nodes instead: max rel " + fmt(worst_nodes, 3));
  verdict(5, worst <= kDecompositionRel,
          "max rel |theta(x) + I^-1 R - I^-1 M||K|| - theta_hat| over " + std::to_string(R) + " replicates " +
              fmt(worst, 3) + " <= " + fmt(kDecompositionRel));
}

void criterion8() {
  bool ok = true;
  std::string failing;
  for (const auto& c : props::all()) {
    info(c.name + ": " + (c.ok ? "ok" : "FAILED") + " (" + c.detail + ")");
    if (!c.ok) {
      ok = false;
      failing += c.name + "; ";
    }
  }
  verdict(8, ok, ok ? "all deterministic property checks pass" : "failing: " + failing);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance gate"};
  std::vector<int> only_list;
  int workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  std::string out = "acceptance_out";
  app.add_option("--only", only_list, "criteria to run (default: all)")->delimiter(',')->check(CLI::Range(1, 8));
  app.add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--out", out, "directory for study outputs");
  CLI11_PARSE(app, argc, argv);
  std::set<int> only(only_list.begin(), only_list.end());
  if (only.empty()) only = {1, 2, 3, 4, 5, 6, 7, 8};

  const auto t0 = std::chrono::steady_clock::now();
  auto timed = [&](std::vector<int> ids, auto&& fn) {
    const auto s = std::chrono::steady_clock::now();
    try {
      fn();
    } catch (const std::exception& e) {
      for (int id : ids)
        if (only.count(id)) verdict(id, false, std::string("aborted: ") + e.what());
    }
    std::cerr << "  [" << std::chrono::duration<double>(std::chrono::steady_clock::now() - s).count() << " s]\n";
  };
  if (only.count(8)) timed({8}, [] { criterion8(); });
  if (only.count(4)) timed({4}, [] { criterion4(); });
  if (only.count(5)) timed({5}, [&] { criterion5(workers, out); });
  if (only.count(3)) timed({3}, [&] { criterion3(workers, out); });
  if (only.count(2)) timed({2}, [&] { criterion2(workers, out); });
  if (only.count(1) || only.count(6) || only.count(7)) timed({1, 6, 7}, [&] { rate_criteria(only, workers, out); });

  std::cout << (failed == 0 ? "ALL PASS" : std::to_string(failed) + " criterion(s) FAILED") << " in "
            << std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() << " s" << std::endl;
  return failed == 0 ? 0 : 1;
}
