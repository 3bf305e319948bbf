#include "lmspde/measurements.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include "lmspde/errors.hpp"

namespace lmspde {

void MeasurementConfig::validate() const {
  if (!kernel) throw ConfigError("measurement config has no kernel");
  if (!(delta > 0.0)) throw ConfigError("resolution delta must be positive");
  if (locations.empty()) throw ConfigError("measurement config has no locations");
  const double R = support_radius();
  const int d = dimension();
  for (std::size_t k = 0; k < locations.size(); ++k) {
    const Point& x = locations[k];
    if (x.size() != d) throw ConfigError("location dimension differs from the kernel dimension");
    for (int i = 0; i < d; ++i)
      if (x[i] - R < -1e-12 || x[i] + R > 1.0 + 1e-12) {
        std::ostringstream msg;
        msg << "support of K_{delta,x_" << k << "} leaves the domain (x = " << x.transpose() << ", delta*r_K = " << R
            << ")";
        throw ConfigError(msg.str());
      }
  }
  for (std::size_t k = 0; k < locations.size(); ++k)
    for (std::size_t l = k + 1; l < locations.size(); ++l)
      if (!((locations[k] - locations[l]).norm() > 2.0 * R)) {
        std::ostringstream msg;
        msg << "supports of locations " << k << " and " << l << " overlap (distance "
            << (locations[k] - locations[l]).norm() << " <= 2*delta*r_K = " << 2.0 * R << ")";
        throw ConfigError(msg.str());
      }
}

std::vector<Stencil> build_stencils(const MeasurementConfig& config, const Grid& grid) {
  config.validate();
  const int d = config.dimension();
  if (grid.dimension != d) throw ConfigError("grid and kernel dimensions differ");
  const double h = grid.dx();
  const double R = config.support_radius();
  if (R / h < config.resolution_ratio * (1.0 - 1e-12)) {
    std::ostringstream msg;
    msg << "resolution guard: delta = " << config.delta << " gives delta*r_K/dx = " << R / h << " < "
        << config.resolution_ratio << " (refine the grid to M >= " << std::ceil(config.resolution_ratio / R) - 1
        << ")";
    throw MeasurementError(msg.str());
  }
  const double vol = std::pow(h, d);
  const int M = grid.M;
  std::vector<Stencil> out;
  out.reserve(config.locations.size());
  for (int k = 0; k < config.size(); ++k) {
    const LocalizedKernel K = config.localized(k);
    const Point& x = K.center;
    int lo[2] = {0, 0}, hi[2] = {0, 0};
    for (int i = 0; i < d; ++i) {
      lo[i] = std::max(0, static_cast<int>(std::floor((x[i] - R) / h)) - 2);
      hi[i] = std::min(M - 1, static_cast<int>(std::ceil((x[i] + R) / h)) + 1);
    }
    // K at interior index (i0, i1); indices -1 and M are the boundary nodes
    auto kval = [&](int i0, int i1) {
      Point p(d);
      p[0] = (i0 + 1) * h;
      if (d == 2) p[1] = (i1 + 1) * h;
      return (p - x).norm() < R ? K.value(p) : 0.0;
    };
    Stencil s;
    for (int i1 = lo[1]; i1 <= (d == 2 ? hi[1] : 0); ++i1) {
      for (int i0 = lo[0]; i0 <= hi[0]; ++i0) {
        const int node = i0 + M * i1;
        const Point p = grid.position(node);
        if (config.stencil == StencilKind::analytic) {
          if (!((p - x).norm() < R)) continue;
          s.nodes.push_back(node);
          s.k.push_back(vol * K.value(p));
          s.lap.push_back(vol * K.laplacian(p));
          const Vector g = K.gradient(p);
          for (int c = 0; c < d; ++c) s.grad.push_back(vol * g[c]);
          continue;
        }
        const double k0 = kval(i0, i1);
        double lap = 0.0, g[2] = {0.0, 0.0};
        for (int c = 0; c < d; ++c) {
          const double up = c == 0 ? kval(i0 + 1, i1) : kval(i0, i1 + 1);
          const double dn = c == 0 ? kval(i0 - 1, i1) : kval(i0, i1 - 1);
          lap += (up - 2.0 * k0 + dn) / (h * h);
          g[c] = (up - dn) / (2.0 * h);
        }
        if (k0 == 0.0 && lap == 0.0 && g[0] == 0.0 && g[1] == 0.0) continue;
        s.nodes.push_back(node);
        s.k.push_back(vol * k0);
        s.lap.push_back(vol * lap);
        for (int c = 0; c < d; ++c) s.grad.push_back(vol * g[c]);
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

namespace {

// Writes X, X^∇, X^Δ of location k into row(k, cols 0..d+1).
inline void measure_into(const Vector& field, const Stencil& s, int d, double* row) {
  double X = 0.0, L = 0.0, G[2] = {0.0, 0.0};
  const double* f = field.data();
  for (std::size_t n = 0; n < s.nodes.size(); ++n) {
    const double v = f[s.nodes[n]];
    X += v * s.k[n];
    L += v * s.lap[n];
    for (int c = 0; c < d; ++c) G[c] += v * s.grad[n * static_cast<std::size_t>(d) + static_cast<std::size_t>(c)];
  }
  row[0] = X;
  for (int c = 0; c < d; ++c) row[1 + c] = G[c];
  row[1 + d] = L;
}

}  // namespace

std::string to_string(StencilKind s) { return s == StencilKind::analytic ? "analytic" : "discrete"; }

StencilKind stencil_kind_from_string(const std::string& s) {
  if (s == "analytic") return StencilKind::analytic;
  if (s == "discrete") return StencilKind::discrete;
  throw ConfigError("unknown stencil '" + s + "' (analytic | discrete)");
}

Matrix measure_field(const Vector& field, const std::vector<Stencil>& stencils, int d) {
  Matrix out(static_cast<Eigen::Index>(stencils.size()), d + 2);
  std::vector<double> row(static_cast<std::size_t>(d) + 2);
  for (std::size_t k = 0; k < stencils.size(); ++k) {
    measure_into(field, stencils[k], d, row.data());
    for (int c = 0; c < d + 2; ++c) out(static_cast<Eigen::Index>(k), c) = row[static_cast<std::size_t>(c)];
  }
  return out;
}

MeasurementRecorder::MeasurementRecorder(const MeasurementConfig& config, const Grid& grid)
    : stencils_(build_stencils(config, grid)) {
  set_.config = config;
  set_.dt = grid.dt();
  set_.n_t = grid.n_t;
  const int d = config.dimension();
  set_.series.resize(stencils_.size());
  for (auto& s : set_.series) {
    s.X = Vector::Zero(grid.n_t + 1);
    s.grad = Matrix::Zero(grid.n_t + 1, d);
    s.lap = Vector::Zero(grid.n_t + 1);
  }
}

void MeasurementRecorder::on_state(int j, const Vector& x) {
  const int d = set_.config.dimension();
  double row[4];
  for (std::size_t k = 0; k < stencils_.size(); ++k) {
    measure_into(x, stencils_[k], d, row);
    auto& s = set_.series[k];
    s.X[j] = row[0];
    for (int c = 0; c < d; ++c) s.grad(j, c) = row[1 + c];
    s.lap[j] = row[1 + d];
  }
}

LocalMeasurementSet measure(const SolutionPath& path, const MeasurementConfig& config) {
  if (path.stride != 1) throw MeasurementError("measure needs a path recorded at every time step");
  MeasurementRecorder rec(config, path.grid);
  for (int j = 0; j < path.rows(); ++j) rec.on_state(j, path.values.row(j).transpose());
  return rec.take();
}

double ito_sum(std::span<const double> f, std::span<const double> X) {
  if (f.size() != X.size()) throw ContractError("ito_sum: series lengths differ");
  if (f.size() < 2) throw ContractError("ito_sum: need at least two time points");
  double acc = 0.0;
  for (std::size_t j = 0; j + 1 < f.size(); ++j) acc += f[j] * (X[j + 1] - X[j]);
  return acc;
}

double time_integral(std::span<const double> f, double dt) {
  if (f.size() < 2) throw ContractError("time_integral: need at least two time points");
  double acc = 0.0;
  for (std::size_t j = 0; j + 1 < f.size(); ++j) acc += f[j];
  return acc * dt;
}

namespace {

std::span<const double> span_of(const Vector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

}  // namespace

StatisticsSet statistics(const LocalMeasurementSet& set) {
  const int d = set.config.dimension();
  StatisticsSet out;
  out.T = set.T();
  out.dt = set.dt;
  out.locations = set.config.locations;
  for (const auto& s : set.series) {
    LocationStatistics st;
    st.grad_dX.resize(d);
    st.lap_grad.resize(d);
    st.grad_grad.resize(d, d);
    for (int c = 0; c < d; ++c) {
      const Vector g = s.grad.col(c);
      st.grad_dX[c] = ito_sum(span_of(g), span_of(s.X));
      const Vector lg = s.lap.cwiseProduct(g);
      st.lap_grad[c] = time_integral(span_of(lg), set.dt);
      for (int e = 0; e < d; ++e) {
        const Vector gg = g.cwiseProduct(s.grad.col(e));
        st.grad_grad(c, e) = time_integral(span_of(gg), set.dt);
      }
    }
    st.lap_dX = ito_sum(span_of(s.lap), span_of(s.X));
    const Vector ll = s.lap.cwiseProduct(s.lap);
    st.lap_lap = time_integral(span_of(ll), set.dt);
    out.stats.push_back(std::move(st));
  }
  return out;
}

StatisticsAccumulator::StatisticsAccumulator(const MeasurementConfig& config, const Grid& grid,
                                             const ModelSpec* model)
    : d_(config.dimension()),
      dt_(grid.dt()),
      n_t_(grid.n_t),
      locations_(config.locations),
      stencils_(build_stencils(config, grid)) {
  const int n = static_cast<int>(stencils_.size());
  prev_ = Matrix::Zero(n, d_ + 4);
  cur_ = Matrix::Zero(n, d_ + 4);
  acc_.resize(static_cast<std::size_t>(n));
  for (auto& a : acc_) {
    a.grad_dX = Vector::Zero(d_);
    a.lap_grad = Vector::Zero(d_);
    a.grad_grad = Matrix::Zero(d_, d_);
  }
  if (!model) return;

  decompose_ = true;
  a_ = model->a;
  const SparseMatrix At = SparseMatrix(build_operator(*model, grid).transpose());
  const double vol = std::pow(grid.dx(), d_);
  dec_.resize(static_cast<std::size_t>(n));
  for (auto& t : dec_) {
    t.drift_quadrature = Vector::Zero(d_);
    t.drift_discrete = Vector::Zero(d_);
    t.martingale = Vector::Zero(d_);
  }
  for (int k = 0; k < n; ++k) {
    const Stencil& s = stencils_[static_cast<std::size_t>(k)];
    const LocalizedKernel K = config.localized(k);
    Vector kvec = Vector::Zero(grid.nodes());
    Vector lapvec = Vector::Zero(grid.nodes());
    Vector quad = Vector::Zero(grid.nodes());
    for (std::size_t m = 0; m < s.nodes.size(); ++m) {
      const int node = s.nodes[m];
      const Point p = grid.position(node);
      kvec[node] = s.k[m];
      lapvec[node] = s.lap[m];
      const double phi = model->theta.divergence(p) - model->c.value(p);
      quad[node] = vol * (model->theta.value(p).dot(K.gradient(p)) + phi * K.value(p));
    }
    const Vector disc = a_ * lapvec - At * kvec;
    std::vector<int> nodes;
    std::vector<double> q, dd;
    for (int i = 0; i < grid.nodes(); ++i)
      if (disc[i] != 0.0 || quad[i] != 0.0) {
        nodes.push_back(i);
        q.push_back(quad[i]);
        dd.push_back(disc[i]);
      }
    drift_nodes_.push_back(std::move(nodes));
    drift_quad_.push_back(std::move(q));
    drift_disc_.push_back(std::move(dd));
  }
}

void StatisticsAccumulator::on_state(int j, const Vector& x) {
  const Eigen::Index n = cur_.rows();
  std::swap(prev_, cur_);
  double row[4];
  for (Eigen::Index k = 0; k < n; ++k) {
    measure_into(x, stencils_[static_cast<std::size_t>(k)], d_, row);
    for (int c = 0; c < d_ + 2; ++c) cur_(k, c) = row[c];
    if (decompose_) {
      const auto& nodes = drift_nodes_[static_cast<std::size_t>(k)];
      const auto& q = drift_quad_[static_cast<std::size_t>(k)];
      const auto& dd = drift_disc_[static_cast<std::size_t>(k)];
      double sq = 0.0, sd = 0.0;
      for (std::size_t m = 0; m < nodes.size(); ++m) {
        sq += x[nodes[m]] * q[m];
        sd += x[nodes[m]] * dd[m];
      }
      cur_(k, d_ + 2) = sq;
      cur_(k, d_ + 3) = sd;
    }
  }
  if (j == 0) return;
  for (Eigen::Index k = 0; k < n; ++k) {
    auto& a = acc_[static_cast<std::size_t>(k)];
    const double dX = cur_(k, 0) - prev_(k, 0);
    const double lap = prev_(k, d_ + 1);
    for (int c = 0; c < d_; ++c) {
      const double g = prev_(k, 1 + c);
      a.grad_dX[c] += g * dX;
      a.lap_grad[c] += lap * g;
      for (int e = 0; e < d_; ++e) a.grad_grad(c, e) += g * prev_(k, 1 + e);
    }
    a.lap_dX += lap * dX;
    a.lap_lap += lap * lap;
    if (decompose_) {
      auto& t = dec_[static_cast<std::size_t>(k)];
      for (int c = 0; c < d_; ++c) {
        t.drift_quadrature[c] += prev_(k, 1 + c) * prev_(k, d_ + 2);
        t.drift_discrete[c] += prev_(k, 1 + c) * prev_(k, d_ + 3);
      }
    }
  }
}

void StatisticsAccumulator::on_noise(int /*j*/, const Vector& xi) {
  // cur_ holds the measurements of X_j, the state this increment starts from
  for (std::size_t k = 0; k < stencils_.size(); ++k) {
    const Stencil& s = stencils_[k];
    double z = 0.0;
    for (std::size_t m = 0; m < s.nodes.size(); ++m) z += xi[s.nodes[m]] * s.k[m];
    auto& t = dec_[k];
    for (int c = 0; c < d_; ++c) t.martingale[c] += cur_(static_cast<Eigen::Index>(k), 1 + c) * z;
  }
}

StatisticsSet StatisticsAccumulator::result() const {
  StatisticsSet out;
  out.T = dt_ * n_t_;
  out.dt = dt_;
  out.locations = locations_;
  out.stats = acc_;
  for (auto& s : out.stats) {
    s.lap_grad *= dt_;
    s.grad_grad *= dt_;
    s.lap_lap *= dt_;
  }
  if (decompose_) {
    out.decomposition = dec_;
    for (auto& t : out.decomposition) {
      t.drift_quadrature *= dt_;
      t.drift_discrete *= dt_;
    }
  }
  return out;
}

void write_measurements_csv(const LocalMeasurementSet& set, std::ostream& out) {
  const int d = set.config.dimension();
  out << "t,k,X";
  for (int c = 0; c < d; ++c) out << ",X_grad_" << c + 1;
  out << ",X_lap\n";
  out.precision(17);
  for (std::size_t k = 0; k < set.series.size(); ++k) {
    const auto& s = set.series[k];
    for (Eigen::Index j = 0; j < s.X.size(); ++j) {
      out << static_cast<double>(j) * set.dt << ',' << k << ',' << s.X[j];
      for (int c = 0; c < d; ++c) out << ',' << s.grad(j, c);
      out << ',' << s.lap[j] << '\n';
    }
  }
}

}  // namespace lmspde
