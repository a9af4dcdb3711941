#pragma once

#include "hodmd/decomposition.hpp"
#include "hodmd/trajectory.hpp"

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace hodmd {

/// Forecast samples. Unlike Trajectory this may hold a single sample.
struct Forecast {
  ChannelSchema schema;
  double dt = 0.0;
  double t0 = 0.0;
  Eigen::MatrixXd values;  // 2N x steps

  Eigen::Index samples() const { return values.cols(); }
  Trajectory trajectory() const;  // needs at least two samples
  std::string csv() const;
};

/// Forecast from a 2N x d window of consecutive samples.
///
/// Output sample k (k = 1..steps) is x_{k+d-1}, so the first output equals
/// the window's last column up to truncation error. `t0` is the time of the
/// window's first column; the result starts at t0 + (d-1) dt.
Forecast reconstruct(const HodmdModel& model, const Eigen::MatrixXd& window, int steps, double t0 = 0.0);

/// Full-length reconstruction of `reference` from its own first d samples:
/// the window is kept as-is and the remaining samples are forecast.
Trajectory reconstruct_full(const HodmdModel& model, const Trajectory& reference);

/// sqrt(sum ||x - x_pred||^2 / sum ||x - xbar||^2) over every trajectory and
/// channel. Throws "degenerate reference" when the denominator is zero.
double rrmse(const TrajectorySet& reference, const TrajectorySet& predicted, const SteadyState& steady);
double rrmse(const Trajectory& reference, const Trajectory& predicted, const SteadyState& steady);
double rrmse(const Eigen::MatrixXd& reference, const Eigen::MatrixXd& predicted, const SteadyState& steady);

struct PredictionReport {
  double rrmse_train = 0.0;
  std::optional<double> rrmse_test;
  std::vector<double> per_trajectory_train;
  std::vector<double> per_trajectory_test;
  int d = 0;
  int r = 0;
};

PredictionReport evaluate(const HodmdModel& model, const TrajectorySet& train, const TrajectorySet* test,
                          const SteadyState& steady);

struct SweepRow {
  int d = 0;
  int r = 0;
  double rrmse_train = 0.0;
  double rrmse_test = 0.0;
  double fit_seconds = 0.0;
};

struct SweepReport {
  std::vector<SweepRow> rows;
};

/// Fits one model per order and scores full-length reconstructions of
/// every training and test trajectory. `steady` is the RRMSE reference and,
/// when `center` is set, is also removed before fitting.
SweepReport sweep_order(const TrajectorySet& train, const TrajectorySet& test, std::span<const int> d_values,
                        const RankSpec& spec, const SteadyState& steady, bool center = true);

std::string sweep_csv(const SweepReport& report);

}  // namespace hodmd
