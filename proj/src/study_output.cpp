#include <algorithm>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "lmspde/errors.hpp"
#include "lmspde/experiments.hpp"
#include "lmspde/plot.hpp"

namespace lmspde {
namespace {

std::string timestamp() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string out_path(const StudyConfig& cfg, const std::string& stem) {
  return (std::filesystem::path(cfg.output_dir) / (cfg.name + "_" + stem)).string();
}

// The first line is the only one that differs between reruns.
std::ofstream open_csv(const std::string& file) {
  std::ofstream out(file);
  if (!out) throw ConfigError("cannot write " + file);
  out << "# generated " << timestamp() << '\n';
  out.precision(12);
  return out;
}

void write_config(const StudyConfig& cfg, std::vector<std::string>& files) {
  const auto file = out_path(cfg, "config.json");
  std::ofstream out(file);
  if (!out) throw ConfigError("cannot write " + file);
  out << cfg.to_json().dump(2) << '\n';
  files.push_back(file);
}

void prepare(const StudyConfig& cfg) {
  std::error_code ec;
  std::filesystem::create_directories(cfg.output_dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + cfg.output_dir + ": " + ec.message());
}

void put_point(std::ostream& out, const Point& p) {
  for (Eigen::Index i = 0; i < p.size(); ++i) out << p[i] << ',';
}

std::string point_header(int d, const std::string& prefix = "x") {
  std::string s;
  for (int i = 0; i < d; ++i) s += prefix + "_" + std::to_string(i + 1) + ",";
  return s;
}

// Reference power law through the last point.
PlotSeries reference_line(const std::vector<double>& x, const std::vector<double>& y, double slope,
                          const std::string& label) {
  PlotSeries ref;
  ref.label = label;
  ref.dashed = true;
  ref.markers = false;
  if (x.empty()) return ref;
  const double x0 = x.back(), y0 = y.back();
  for (double v : x) {
    ref.x.push_back(v);
    ref.y.push_back(y0 * std::pow(v / x0, slope));
  }
  return ref;
}

// Pointwise rate min(β e, d(1 - e)/2) for h ≍ δ^e and N ≍ δ^{-d}.
double reference_rate(const StudyConfig& cfg) {
  const auto& rule = cfg.h_rule;
  const double d = cfg.dimension();
  double e = 0.0;
  switch (rule.kind) {
    case BandwidthRule::Kind::fixed: return d / 2.0;
    case BandwidthRule::Kind::delta_power: e = rule.exponent ? *rule.exponent : d / (2.0 * rule.beta + d); break;
    case BandwidthRule::Kind::n_power: e = d * (rule.exponent ? *rule.exponent : 1.0 / (2.0 * rule.beta + d)); break;
  }
  return std::min(rule.beta * e, d * (1.0 - e) / 2.0);
}

}  // namespace

std::vector<std::string> write_outputs(const RateStudyResult& r) {
  const StudyConfig& cfg = r.config;
  prepare(cfg);
  std::vector<std::string> files;
  write_config(cfg, files);
  const int d = cfg.dimension();
  const bool risk = !r.cells.empty() && r.cells.front().risk_interior.size() > 0;

  {
    const auto file = out_path(cfg, "cells.csv");
    auto out = open_csv(file);
    out << "delta,N,h,M,n_t,dt,replicates,failures,point," << point_header(d)
        << "component,truth,bias,std,rmse,bias_plugin,std_plugin,rmse_plugin,a_hat_mean,a_hat_std,qv_scaled,"
           "risk_interior,risk_boundary,fallback_points\n";
    for (const auto& c : r.cells) {
      for (std::size_t p = 0; p < cfg.eval_points.size(); ++p) {
        const Vector truth = cfg.model.theta.value(cfg.eval_points[p]);
        for (int comp = 0; comp < d; ++comp) {
          const auto& e = c.known_a[p][static_cast<std::size_t>(comp)];
          out << c.setup.delta << ',' << c.setup.N << ',' << c.setup.h << ',' << c.setup.grid.M << ','
              << c.setup.grid.n_t << ',' << c.setup.grid.dt() << ',' << c.replicates.size() << ',' << c.failures << ','
              << p << ',';
          put_point(out, cfg.eval_points[p]);
          out << comp << ',' << truth[comp] << ',' << e.bias << ',' << e.std << ',' << e.rmse << ',';
          if (cfg.estimate_a) {
            const auto& ep = c.plugin[p][static_cast<std::size_t>(comp)];
            out << ep.bias << ',' << ep.std << ',' << ep.rmse << ',' << cfg.model.a + c.a_hat.bias << ',' << c.a_hat.std
                << ',';
          } else {
            out << ",,,,,";
          }
          out << c.qv_scaled_mean[p][comp] << ',';
          if (risk) out << c.risk_interior[comp] << ',' << c.risk_boundary[comp] << ',';
          else out << ",,";
          out << c.fallback_points << '\n';
        }
      }
    }
    files.push_back(file);
  }
  {
    const auto file = out_path(cfg, "replicates.csv");
    auto out = open_csv(file);
    out << "cell,delta,replicate,seed,ok,point,component,theta_hat,theta_hat_plugin,a_hat,risk_interior,risk_boundary,"
           "error\n";
    for (std::size_t ci = 0; ci < r.cells.size(); ++ci) {
      const auto& c = r.cells[ci];
      for (std::size_t rep = 0; rep < c.replicates.size(); ++rep) {
        const auto& o = c.replicates[rep];
        if (!o.ok) {
          std::string msg = o.error;
          for (char& ch : msg)
            if (ch == ',' || ch == '\n') ch = ';';
          out << ci << ',' << c.setup.delta << ',' << rep << ',' << o.seed << ",0,,,,,,,," << msg << '\n';
          continue;
        }
        for (std::size_t p = 0; p < o.theta_hat.size(); ++p)
          for (int comp = 0; comp < d; ++comp) {
            out << ci << ',' << c.setup.delta << ',' << rep << ',' << o.seed << ",1," << p << ',' << comp << ','
                << o.theta_hat[p][comp] << ',';
            if (cfg.estimate_a) out << o.theta_hat_plugin[p][comp] << ',' << o.a_hat << ',';
            else out << ",,";
            if (o.risk) out << o.risk->interior[comp] << ',' << o.risk->boundary[comp] << ',';
            else out << ",,";
            out << '\n';
          }
      }
    }
    files.push_back(file);
  }
  {
    const auto file = out_path(cfg, "slopes.csv");
    auto out = open_csv(file);
    out << "quantity,point,component,slope,stderr,points\n";
    auto row = [&](const std::string& q, std::size_t p, int comp, const SlopeFit& f) {
      out << q << ',' << p << ',' << comp << ',' << f.slope << ',';
      if (f.stderr_defined) out << f.stderr_slope;
      out << ',' << f.points << '\n';
    };
    for (std::size_t p = 0; p < r.slope.size(); ++p)
      for (int comp = 0; comp < d; ++comp) row("rmse", p, comp, r.slope[p][static_cast<std::size_t>(comp)]);
    for (std::size_t p = 0; p < r.slope_plugin.size(); ++p)
      for (int comp = 0; comp < d; ++comp) row("rmse_plugin", p, comp, r.slope_plugin[p][static_cast<std::size_t>(comp)]);
    if (r.slope_risk) row("risk_interior", 0, -1, *r.slope_risk);
    files.push_back(file);
  }

  const double rate = reference_rate(cfg);
  {
    std::vector<PlotSeries> series;
    std::vector<double> xs, ys;
    for (std::size_t p = 0; p < cfg.eval_points.size(); ++p)
      for (int comp = 0; comp < d; ++comp) {
        PlotSeries s;
        s.label = "RMSE p" + std::to_string(p) + (d > 1 ? " c" + std::to_string(comp) : "");
        PlotSeries sp;
        sp.label = s.label + " (a-hat)";
        sp.dashed = true;
        for (const auto& c : r.cells) {
          s.x.push_back(c.setup.delta);
          s.y.push_back(c.known_a[p][static_cast<std::size_t>(comp)].rmse);
          if (cfg.estimate_a) {
            sp.x.push_back(c.setup.delta);
            sp.y.push_back(c.plugin[p][static_cast<std::size_t>(comp)].rmse);
          }
        }
        if (p == 0 && comp == 0) {
          xs = s.x;
          ys = s.y;
        }
        series.push_back(std::move(s));
        if (cfg.estimate_a) series.push_back(std::move(sp));
      }
    std::ostringstream lab;
    lab << "delta^" << rate;
    series.push_back(reference_line(xs, ys, rate, lab.str()));
    const auto file = out_path(cfg, "rmse.svg");
    write_svg(PlotSpec{cfg.name + ": RMSE against delta", "delta", "RMSE", true, true}, series, file);
    files.push_back(file);
  }
  {
    std::vector<PlotSeries> series;
    for (std::size_t p = 0; p < cfg.eval_points.size(); ++p) {
      PlotSeries s;
      s.label = "[M]_T N h^d p" + std::to_string(p);
      for (const auto& c : r.cells) {
        s.x.push_back(c.setup.delta);
        s.y.push_back(c.qv_scaled_mean[p].mean());
      }
      series.push_back(std::move(s));
    }
    const auto file = out_path(cfg, "qv.svg");
    write_svg(PlotSpec{cfg.name + ": scaled martingale variation", "delta", "[M]_T N h^d", true, false}, series, file);
    files.push_back(file);
  }
  if (risk) {
    PlotSeries in, bd;
    in.label = "interior";
    bd.label = "boundary strip";
    for (const auto& c : r.cells) {
      in.x.push_back(c.setup.delta);
      in.y.push_back(c.risk_interior.sum());
      bd.x.push_back(c.setup.delta);
      bd.y.push_back(c.risk_boundary.sum());
    }
    std::ostringstream lab;
    lab << "delta^" << 2 * rate;
    auto ref = reference_line(in.x, in.y, 2 * rate, lab.str());
    const auto file = out_path(cfg, "risk.svg");
    write_svg(PlotSpec{cfg.name + ": integrated risk", "delta", "risk", true, true}, {in, bd, ref}, file);
    files.push_back(file);
  }
  return files;
}

std::vector<std::string> write_outputs(const SweepResult& r) {
  const StudyConfig& cfg = r.config;
  prepare(cfg);
  std::vector<std::string> files;
  write_config(cfg, files);
  const int d = cfg.dimension();
  const Vector truth = cfg.model.theta.value(cfg.eval_points.front());
  {
    const auto file = out_path(cfg, "sweep.csv");
    auto out = open_csv(file);
    out << "delta,N,h,active,degenerate,failures,component,truth,bias,std,rmse\n";
    for (const auto& c : r.cells) {
      if (c.degenerate) {
        out << r.setup.delta << ',' << r.setup.N << ',' << c.h << ',' << c.active << ",1," << r.seeds.size()
            << ",,,,,\n";
        continue;
      }
      for (int comp = 0; comp < d; ++comp) {
        const auto& e = c.error[static_cast<std::size_t>(comp)];
        out << r.setup.delta << ',' << r.setup.N << ',' << c.h << ',' << c.active << ",0," << c.failures << ',' << comp
            << ',' << truth[comp] << ',' << e.bias << ',' << e.std << ',' << e.rmse << '\n';
      }
    }
    files.push_back(file);
  }
  {
    const auto file = out_path(cfg, "replicates.csv");
    auto out = open_csv(file);
    out << "replicate,seed,h,component,theta_hat\n";
    for (std::size_t rep = 0; rep < r.estimate.size(); ++rep)
      for (std::size_t i = 0; i < r.cells.size(); ++i) {
        const Vector& v = r.estimate[rep][i];
        for (Eigen::Index comp = 0; comp < v.size(); ++comp)
          out << rep << ',' << r.seeds[rep] << ',' << r.cells[i].h << ',' << comp << ',' << v[comp] << '\n';
      }
    files.push_back(file);
  }
  {
    PlotSeries s, b, sd;
    s.label = "RMSE";
    b.label = "|bias|";
    b.dashed = true;
    sd.label = "std";
    sd.dashed = true;
    for (const auto& c : r.cells) {
      if (c.degenerate || c.error.empty()) continue;
      s.x.push_back(c.h);
      s.y.push_back(c.error[0].rmse);
      b.x.push_back(c.h);
      b.y.push_back(std::abs(c.error[0].bias));
      sd.x.push_back(c.h);
      sd.y.push_back(c.error[0].std);
    }
    const auto file = out_path(cfg, "sweep.svg");
    write_svg(PlotSpec{cfg.name + ": RMSE against h", "h", "error", true, true}, {s, b, sd}, file);
    files.push_back(file);
  }
  return files;
}

std::vector<std::string> write_outputs(const TrajectoryResult& r) {
  const StudyConfig& cfg = r.config;
  prepare(cfg);
  std::vector<std::string> files;
  write_config(cfg, files);
  const int d = cfg.dimension();
  {
    const auto file = out_path(cfg, "trajectory.csv");
    auto out = open_csv(file);
    out << "delta,replicate,seed," << point_header(d) << "component,truth,theta_hat,fallback\n";
    for (const auto& c : r.cells)
      for (std::size_t rep = 0; rep < c.estimate.size(); ++rep) {
        if (c.estimate[rep].empty()) continue;
        for (std::size_t i = 0; i < c.x.size(); ++i)
          for (int comp = 0; comp < d; ++comp) {
            out << c.setup.delta << ',' << rep << ',' << c.seeds[rep] << ',';
            put_point(out, c.x[i]);
            out << comp << ',' << c.truth[i][comp] << ',' << c.estimate[rep][i][comp] << ',' << (c.fallback[i] ? 1 : 0)
                << '\n';
          }
      }
    files.push_back(file);
  }
  {
    const auto file = out_path(cfg, "sup.csv");
    auto out = open_csv(file);
    out << "delta,N,h,replicate,seed,sup_error\n";
    for (const auto& c : r.cells) {
      const auto sup = c.sup_errors();
      for (std::size_t rep = 0; rep < sup.size(); ++rep)
        out << c.setup.delta << ',' << c.setup.N << ',' << c.setup.h << ',' << rep << ',' << c.seeds[rep] << ','
            << sup[rep] << '\n';
    }
    files.push_back(file);
  }
  {
    std::vector<PlotSeries> series;
    PlotSeries truth;
    truth.label = "theta";
    truth.markers = false;
    if (!r.cells.empty())
      for (std::size_t i = 0; i < r.cells.front().x.size(); ++i) {
        truth.x.push_back(d == 1 ? r.cells.front().x[i][0] : static_cast<double>(i));
        truth.y.push_back(r.cells.front().truth[i][0]);
      }
    series.push_back(truth);
    for (const auto& c : r.cells) {
      // first successful replicate
      for (const auto& rep : c.estimate) {
        if (rep.empty()) continue;
        PlotSeries s;
        std::ostringstream lab;
        lab << "delta=" << c.setup.delta;
        s.label = lab.str();
        for (std::size_t i = 0; i < rep.size(); ++i) {
          s.x.push_back(d == 1 ? c.x[i][0] : static_cast<double>(i));
          s.y.push_back(rep[i][0]);
        }
        series.push_back(std::move(s));
        break;
      }
    }
    const auto file = out_path(cfg, "trajectory.svg");
    write_svg(PlotSpec{cfg.name + ": estimate against truth", d == 1 ? "x" : "point index", "theta_1", false, false},
              series, file);
    files.push_back(file);
  }
  return files;
}

}  // namespace lmspde
