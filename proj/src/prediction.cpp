#include "hodmd/prediction.hpp"

#include "hodmd/embedding.hpp"
#include "hodmd/error.hpp"
#include "hodmd/io_util.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace hodmd {

Trajectory Forecast::trajectory() const { return Trajectory(schema, dt, t0, values); }

std::string Forecast::csv() const { return samples_csv(schema, dt, t0, values); }

Forecast reconstruct(const HodmdModel& model, const Eigen::MatrixXd& window, int steps, double t0) {
  if (!model.has_phi()) throw DataError("model has no stored Phi; refit or save with Phi");
  const Eigen::Index n = model.state_size();
  if (window.rows() != n || window.cols() != model.order)
    throw DataError("initial window must be " + std::to_string(n) + " x " + std::to_string(model.order) + ", got " +
                    std::to_string(window.rows()) + " x " + std::to_string(window.cols()));
  if (steps < 1) throw DataError("steps must be at least 1");

  // The newest snapshot sits in the last block of the stacked state.
  const Eigen::MatrixXcd newest = model.phi.bottomRows(n);
  Eigen::VectorXcd b = model.project(stack_window(window, 0, model.order, model.center));

  Eigen::MatrixXd out(n, steps);
  for (int k = 0; k < steps; ++k) {
    out.col(k) = (newest * b).real();
    b = b.cwiseProduct(model.lambdas);
  }
  if (model.center) out.colwise() += model.center->values;
  if (!out.allFinite()) throw NumericalError("forecast overflowed");
  return {model.schema, model.dt, t0 + static_cast<double>(model.order - 1) * model.dt, std::move(out)};
}

Trajectory reconstruct_full(const HodmdModel& model, const Trajectory& reference) {
  if (reference.schema() != model.schema) throw DataError("trajectory schema does not match model");
  const Eigen::Index t = reference.samples();
  const int d = model.order;
  if (t < d) throw DataError("trajectory shorter than model order");
  const Eigen::Index steps = t - d + 1;
  const Forecast forecast =
      reconstruct(model, reference.values().leftCols(d), static_cast<int>(steps), reference.t0());
  Eigen::MatrixXd values(reference.values().rows(), t);
  values.leftCols(d - 1) = reference.values().leftCols(d - 1);
  values.rightCols(steps) = forecast.values;
  return Trajectory(reference.schema(), reference.dt(), reference.t0(), std::move(values), reference.fault_time());
}

namespace {

struct ErrorSums {
  double numerator = 0.0;
  double denominator = 0.0;
};

ErrorSums error_sums(const Eigen::MatrixXd& reference, const Eigen::MatrixXd& predicted, const SteadyState& steady) {
  if (reference.rows() != predicted.rows() || reference.cols() != predicted.cols())
    throw DataError("shape mismatch between reference and prediction");
  if (steady.values.size() != reference.rows()) throw DataError("steady state length does not match schema");
  ErrorSums s;
  s.numerator = (reference - predicted).squaredNorm();
  s.denominator = (reference.colwise() - steady.values).squaredNorm();
  return s;
}

ErrorSums error_sums(const Trajectory& reference, const Trajectory& predicted, const SteadyState& steady) {
  if (reference.schema() != predicted.schema()) throw DataError("schema mismatch between reference and prediction");
  return error_sums(reference.values(), predicted.values(), steady);
}

double ratio(const ErrorSums& s) {
  if (!(s.denominator > 0.0)) throw DataError("degenerate reference: identically at steady state");
  return std::sqrt(s.numerator / s.denominator);
}

}  // namespace

double rrmse(const TrajectorySet& reference, const TrajectorySet& predicted, const SteadyState& steady) {
  if (reference.size() != predicted.size()) throw DataError("trajectory count mismatch between reference and prediction");
  ErrorSums total;
  for (std::size_t q = 0; q < reference.size(); ++q) {
    const ErrorSums s = error_sums(reference[q], predicted[q], steady);
    total.numerator += s.numerator;
    total.denominator += s.denominator;
  }
  return ratio(total);
}

double rrmse(const Trajectory& reference, const Trajectory& predicted, const SteadyState& steady) {
  return ratio(error_sums(reference, predicted, steady));
}

double rrmse(const Eigen::MatrixXd& reference, const Eigen::MatrixXd& predicted, const SteadyState& steady) {
  return ratio(error_sums(reference, predicted, steady));
}

namespace {

void score(const HodmdModel& model, const TrajectorySet& set, const SteadyState& steady, double& overall,
           std::vector<double>& per_trajectory) {
  std::vector<Trajectory> predicted;
  predicted.reserve(set.size());
  for (const auto& traj : set.trajectories()) {
    predicted.push_back(reconstruct_full(model, traj));
    per_trajectory.push_back(rrmse(traj, predicted.back(), steady));
  }
  overall = rrmse(set, TrajectorySet(std::move(predicted)), steady);
}

}  // namespace

PredictionReport evaluate(const HodmdModel& model, const TrajectorySet& train, const TrajectorySet* test,
                          const SteadyState& steady) {
  PredictionReport report;
  report.d = model.order;
  report.r = model.rank;
  score(model, train, steady, report.rrmse_train, report.per_trajectory_train);
  if (test) {
    double value = 0.0;
    score(model, *test, steady, value, report.per_trajectory_test);
    report.rrmse_test = value;
  }
  return report;
}

SweepReport sweep_order(const TrajectorySet& train, const TrajectorySet& test, std::span<const int> d_values,
                        const RankSpec& spec, const SteadyState& steady, bool center) {
  if (d_values.empty()) throw DataError("no orders to sweep");
  std::vector<int> orders(d_values.begin(), d_values.end());
  std::sort(orders.begin(), orders.end());
  if (std::adjacent_find(orders.begin(), orders.end()) != orders.end()) throw DataError("orders must be unique");
  if (train.schema() != test.schema()) throw DataError("train and test schemas differ");
  const Eigen::Index shortest = std::min(train.min_samples(), test.min_samples());
  if (orders.front() < 1 || orders.back() >= shortest)
    throw DataError("orders must lie in [1, " + std::to_string(shortest - 1) + "]");

  const std::optional<SteadyState> fit_center = center ? std::optional<SteadyState>(steady) : std::nullopt;
  SweepReport report;
  for (const int d : orders) {
    const auto start = std::chrono::steady_clock::now();
    const HodmdModel model = fit(build_embedded_pair(train, d, fit_center), spec);
    const auto stop = std::chrono::steady_clock::now();
    const PredictionReport scores = evaluate(model, train, &test, steady);
    report.rows.push_back({d, model.rank, scores.rrmse_train, *scores.rrmse_test,
                           std::chrono::duration<double>(stop - start).count()});
  }
  return report;
}

std::string sweep_csv(const SweepReport& report) {
  std::string csv = "d,r,rrmse_train,rrmse_test,fit_seconds\n";
  for (const auto& row : report.rows)
    csv += std::to_string(row.d) + ',' + std::to_string(row.r) + ',' + format_number(row.rrmse_train) + ',' +
           format_number(row.rrmse_test) + ',' + format_number(row.fit_seconds) + '\n';
  return csv;
}

}  // namespace hodmd
