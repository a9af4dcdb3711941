#pragma once

#include "hodmd/trajectory.hpp"

#include <Eigen/Dense>

#include <optional>
#include <vector>

namespace hodmd {

struct ColumnRange {
  Eigen::Index begin;  // first column of the trajectory's block
  Eigen::Index end;    // one past the last
};

/// Delay-embedded training pair stitched across trajectories.
///
/// Rows stack d consecutive snapshots, oldest first:
///   x~_k = [x_k; x_{k+1}; ...; x_{k+d-1}]
/// Trajectory q contributes T_q - d columns to both X and Y, with Y's
/// column j equal to x~ one step after X's column j. No column straddles
/// two trajectories.
struct EmbeddedPair {
  Eigen::MatrixXd X;
  Eigen::MatrixXd Y;
  int order = 1;
  ChannelSchema schema;
  double dt = 0.0;
  std::vector<ColumnRange> boundaries;
  std::vector<Eigen::VectorXd> firsts;  // x~_1 per trajectory (centered if center is set)
  std::optional<SteadyState> center;
};

/// Stacked vector of d consecutive samples starting at column `first`, with
/// `center` (if any) removed from each sample.
Eigen::VectorXd stack_window(const Eigen::MatrixXd& samples, Eigen::Index first, int order,
                             const std::optional<SteadyState>& center);

EmbeddedPair build_embedded_pair(const TrajectorySet& set, int order,
                                 const std::optional<SteadyState>& center = std::nullopt);

}  // namespace hodmd
