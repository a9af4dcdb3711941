#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hodmd {

enum class Quantity { omega, delta };

/// Channel layout shared by every trajectory of a set.
///
/// Buses are kept in ascending id order and each bus owns two adjacent
/// channels, omega first: (omega_1, delta_1, ..., omega_N, delta_N).
class ChannelSchema {
 public:
  ChannelSchema() = default;
  explicit ChannelSchema(std::vector<int> bus_ids);

  const std::vector<int>& buses() const { return buses_; }
  std::size_t bus_count() const { return buses_.size(); }
  std::size_t channel_count() const { return 2 * buses_.size(); }

  static std::size_t omega_channel(std::size_t bus_pos) { return 2 * bus_pos; }
  static std::size_t delta_channel(std::size_t bus_pos) { return 2 * bus_pos + 1; }

  std::string channel_name(std::size_t channel) const;
  std::optional<std::size_t> channel_index(std::string_view name) const;
  std::optional<std::size_t> bus_position(int bus_id) const;

  friend bool operator==(const ChannelSchema&, const ChannelSchema&) = default;

 private:
  std::vector<int> buses_;
};

/// One uniformly sampled perturbation scenario. Columns are samples.
class Trajectory {
 public:
  Trajectory(ChannelSchema schema, double dt, double t0, Eigen::MatrixXd values,
             std::optional<double> fault_time = std::nullopt);

  const ChannelSchema& schema() const { return schema_; }
  double dt() const { return dt_; }
  double t0() const { return t0_; }
  const Eigen::MatrixXd& values() const { return values_; }
  std::optional<double> fault_time() const { return fault_time_; }

  Eigen::Index samples() const { return values_.cols(); }
  double time(Eigen::Index k) const { return t0_ + static_cast<double>(k) * dt_; }

  /// Samples with t >= t_from (within half a step). Keeps fault metadata.
  Trajectory slice_from(double t_from) const;

 private:
  ChannelSchema schema_;
  double dt_;
  double t0_;
  Eigen::MatrixXd values_;
  std::optional<double> fault_time_;
};

/// Q >= 1 trajectories sharing schema and sampling interval.
class TrajectorySet {
 public:
  explicit TrajectorySet(std::vector<Trajectory> trajectories, double dt_tolerance = 1e-9);

  const std::vector<Trajectory>& trajectories() const { return trajectories_; }
  const Trajectory& operator[](std::size_t q) const { return trajectories_[q]; }
  std::size_t size() const { return trajectories_.size(); }
  const ChannelSchema& schema() const { return trajectories_.front().schema(); }
  double dt() const { return trajectories_.front().dt(); }
  Eigen::Index total_samples() const;
  Eigen::Index min_samples() const;

  TrajectorySet slice_from(double t_from) const;

 private:
  std::vector<Trajectory> trajectories_;
};

enum class SteadyStatePolicy { pre_fault_mean, explicit_value, final_window_mean };

struct SteadyState {
  Eigen::VectorXd values;
  SteadyStatePolicy source = SteadyStatePolicy::explicit_value;
};

/// Per-channel steady state.
///
/// pre_fault_mean averages the samples of the first trajectory that precede
/// its fault time; final_window_mean averages the last 10% of every
/// trajectory; explicit_value validates and passes `explicit_values` through.
SteadyState compute_steady_state(const TrajectorySet& set, SteadyStatePolicy policy,
                                 const std::optional<Eigen::VectorXd>& explicit_values = std::nullopt);

/// pre_fault_mean when the first trajectory carries usable fault metadata,
/// final_window_mean otherwise.
SteadyState compute_steady_state_auto(const TrajectorySet& set);

/// Adds zero-mean Gaussian noise with per-channel standard deviation
/// 10^(-snr_db/20) * RMS(x - steady) over the whole set, so the expected
/// noisy-vs-clean RRMSE equals 10^(-snr_db/20). snr_db = +inf is a no-op.
TrajectorySet inject_noise(const TrajectorySet& set, double snr_db, const SteadyState& steady,
                           std::uint64_t seed);

// ---- files ---------------------------------------------------------------

Trajectory read_trajectory_csv(const std::filesystem::path& path, double dt_tolerance = 1e-9,
                               std::optional<double> fault_time = std::nullopt);
std::string trajectory_csv(const Trajectory& trajectory);
/// CSV for raw samples (any sample count), same layout as trajectory_csv.
std::string samples_csv(const ChannelSchema& schema, double dt, double t0, const Eigen::MatrixXd& values);
void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& trajectory);

struct Manifest {
  double dt_tolerance = 1e-9;
  std::optional<double> fault_time;
  std::vector<std::filesystem::path> trajectories;  // as written in the file
};

Manifest read_manifest(const std::filesystem::path& path);
std::string manifest_json(const Manifest& manifest);

/// Reads a manifest and every CSV it lists. Relative CSV paths resolve
/// against the manifest's directory.
TrajectorySet load_trajectory_set(const std::filesystem::path& manifest_path);

}  // namespace hodmd
