#include "hodmd/embedding.hpp"

#include "hodmd/error.hpp"

namespace hodmd {

Eigen::VectorXd stack_window(const Eigen::MatrixXd& samples, Eigen::Index first, int order,
                             const std::optional<SteadyState>& center) {
  const Eigen::Index n = samples.rows();
  Eigen::VectorXd stacked(n * order);
  for (int j = 0; j < order; ++j) {
    auto block = stacked.segment(j * n, n);
    block = samples.col(first + j);
    if (center) block -= center->values;
  }
  return stacked;
}

EmbeddedPair build_embedded_pair(const TrajectorySet& set, int order, const std::optional<SteadyState>& center) {
  if (order < 1) throw DataError("embedding order must be at least 1");
  const auto n = static_cast<Eigen::Index>(set.schema().channel_count());
  if (center && center->values.size() != n) throw DataError("center length does not match schema");

  Eigen::Index columns = 0;
  for (const auto& traj : set.trajectories()) {
    if (traj.samples() <= order)
      throw DataError("trajectory too short for order " + std::to_string(order) + " (" +
                      std::to_string(traj.samples()) + " samples)");
    columns += traj.samples() - order;
  }

  EmbeddedPair pair;
  pair.order = order;
  pair.schema = set.schema();
  pair.dt = set.dt();
  pair.center = center;
  pair.X.resize(n * order, columns);
  pair.Y.resize(n * order, columns);

  Eigen::Index col = 0;
  for (const auto& traj : set.trajectories()) {
    Eigen::MatrixXd samples = traj.values();
    if (center) samples.colwise() -= center->values;
    const Eigen::Index width = traj.samples() - order;
    for (int j = 0; j < order; ++j) {
      pair.X.block(j * n, col, n, width) = samples.middleCols(j, width);
      pair.Y.block(j * n, col, n, width) = samples.middleCols(j + 1, width);
    }
    pair.boundaries.push_back({col, col + width});
    pair.firsts.push_back(stack_window(traj.values(), 0, order, center));
    col += width;
  }
  return pair;
}

}  // namespace hodmd
