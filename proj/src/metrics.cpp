#include "adamtrack/metrics.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "adamtrack/numeric.hpp"

namespace adamtrack {

const std::vector<std::string>& csv_columns() {
  static const std::vector<std::string> cols = {
      "t",           "tracking_err", "metric",     "delta_sq",
      "r_norm",      "eta_norm_sq",  "pg_norm_sq", "var_inc",
      "bound_hp",    "bound_exp",    "bound_pg"};
  return cols;
}

double weighted_pg_norm_sq(const Vec& g_map, const Vec& precond) {
  if (g_map.size() != precond.size()) {
    throw PreconditionError("weighted_pg_norm_sq: dimension mismatch");
  }
  if (!(precond.array() > 0.0).all()) {
    throw PreconditionError("weighted_pg_norm_sq: preconditioner must be positive");
  }
  return (g_map.cwiseAbs2().array() / precond.array()).sum();
}

double positive_increment(double before, double after) {
  return std::max(after - before, 0.0);
}

std::vector<double> variation_budget(std::span<const double> increments) {
  std::vector<double> out;
  out.reserve(increments.size());
  double acc = 0.0;
  for (double inc : increments) {
    if (inc < 0.0) throw PreconditionError("variation increments must be >= 0");
    acc += inc;
    out.push_back(acc);
  }
  return out;
}

double first_moment_residual(const Vec& m_hat, const Vec& mean_grad) {
  if (m_hat.size() != mean_grad.size()) {
    throw PreconditionError("first_moment_residual: dimension mismatch");
  }
  return (m_hat - mean_grad).norm();
}

ResidualTracker::ResidualTracker(double beta1, Index dim)
    : beta1_(beta1),
      mean_acc_(Vec::Zero(dim)),
      noise_acc_(Vec::Zero(dim)),
      last_mean_(Vec::Zero(dim)) {
  if (!(beta1 > 0.0 && beta1 < 1.0)) {
    throw PreconditionError("ResidualTracker: beta1 must lie in (0, 1)");
  }
}

void ResidualTracker::push(const Vec& mean_grad, const Vec& noise) {
  mean_acc_ = beta1_ * mean_acc_ + (1.0 - beta1_) * mean_grad;
  noise_acc_ = beta1_ * noise_acc_ + (1.0 - beta1_) * noise;
  last_mean_ = mean_grad;
  ++t_;
}

Vec ResidualTracker::bias() const {
  if (t_ == 0) throw PreconditionError("ResidualTracker: no history");
  return mean_acc_ / one_minus_pow(beta1_, t_) - last_mean_;
}

Vec ResidualTracker::noise() const {
  if (t_ == 0) throw PreconditionError("ResidualTracker: no history");
  return noise_acc_ / one_minus_pow(beta1_, t_);
}

double ResidualTracker::decomposition_gap(const Vec& m_hat) const {
  const Vec r = m_hat - last_mean_;
  return (r - bias() - noise()).cwiseAbs().maxCoeff();
}

Vec proximal_gradient_mapping(const Vec& theta, const Vec& smooth_grad,
                              const Vec& precond, double alpha, double lambda,
                              const ProjectionSpec& proj) {
  if (lambda < 0.0) throw PreconditionError("lambda must be >= 0");
  if (lambda == 0.0) {
    return projected_gradient_mapping(theta, smooth_grad, precond, alpha, proj);
  }
  if (!(alpha > 0.0)) throw PreconditionError("alpha must be > 0");
  if (!(precond.array() > 0.0).all()) {
    throw PreconditionError("preconditioner must be positive");
  }
  const Vec z = theta - alpha * precond.cwiseProduct(smooth_grad);
  const Vec thresh = alpha * lambda * precond;
  Vec prox = z.cwiseAbs() - thresh;
  prox = prox.cwiseMax(0.0).cwiseProduct(
      z.unaryExpr([](double x) { return x >= 0.0 ? 1.0 : -1.0; }));
  // The weighted l1 prox and the box clamp separate per coordinate, and
  // clamping the soft-thresholded value solves the combined 1-d problem.
  prox = metric_project(prox, proj);
  return (theta - prox) / alpha;
}

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

namespace {

double parse_number(const std::string& s, const std::string& ctx) {
  if (s == "nan") return kNaN;
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw std::runtime_error(ctx + ": cannot parse number '" + s + "'");
  }
  return v;
}

}  // namespace

std::string run_csv_string(std::span<const StepMetrics> rows) {
  std::string out;
  const auto& cols = csv_columns();
  for (size_t i = 0; i < cols.size(); ++i) {
    if (i) out += ',';
    out += cols[i];
  }
  out += '\n';
  for (const auto& r : rows) {
    out += std::to_string(r.t);
    for (double v : {r.tracking_err, r.metric, r.delta_sq, r.r_norm,
                     r.eta_norm_sq, r.pg_norm_sq, r.var_inc, r.bound_hp,
                     r.bound_exp, r.bound_pg}) {
      out += ',';
      out += format_number(v);
    }
    out += '\n';
  }
  return out;
}

void write_run_csv(const std::filesystem::path& path,
                   std::span<const StepMetrics> rows) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error(path.string() + ": cannot open for writing");
  f << run_csv_string(rows);
  if (!f) throw std::runtime_error(path.string() + ": write failed");
}

std::vector<StepMetrics> read_run_csv(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error(path.string() + ": cannot open for reading");
  std::string line;
  if (!std::getline(f, line)) {
    throw std::runtime_error(path.string() + ": empty file");
  }
  const auto& cols = csv_columns();
  {
    std::stringstream ss(line);
    std::string cell;
    size_t i = 0;
    while (std::getline(ss, cell, ',')) {
      if (i >= cols.size()) {
        throw std::runtime_error(path.string() + ": unexpected column '" +
                                 cell + "'");
      }
      if (cell != cols[i]) {
        throw std::runtime_error(path.string() + ": expected column '" +
                                 cols[i] + "', found '" + cell + "'");
      }
      ++i;
    }
    if (i != cols.size()) {
      throw std::runtime_error(path.string() + ": missing column '" + cols[i] +
                               "'");
    }
  }
  std::vector<StepMetrics> rows;
  long lineno = 1;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string ctx = path.string() + ":" + std::to_string(lineno);
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != cols.size()) {
      throw std::runtime_error(ctx + ": expected " + std::to_string(cols.size()) +
                               " fields, found " + std::to_string(cells.size()));
    }
    StepMetrics r;
    r.t = static_cast<long>(parse_number(cells[0], ctx));
    double* fields[] = {&r.tracking_err, &r.metric,    &r.delta_sq,
                        &r.r_norm,       &r.eta_norm_sq, &r.pg_norm_sq,
                        &r.var_inc,      &r.bound_hp,  &r.bound_exp,
                        &r.bound_pg};
    for (size_t i = 0; i < 10; ++i) *fields[i] = parse_number(cells[i + 1], ctx);
    rows.push_back(r);
  }
  return rows;
}

}  // namespace adamtrack
