#pragma once

#include "hodmd/trajectory.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace hodmd {

/// Classical lossless generator network.
///
/// Each generator i obeys
///   d(delta_i)/dt = omega0 * (omega_i - 1)
///   J_i d(omega_i)/dt = Pm_i - sum_j B_ij sin(delta_i - delta_j) - D_i (omega_i - 1)
/// with omega in per-unit and delta in radians. Pm is balanced to zero mean
/// before use, since a lossless network has no other slack.
struct SwingNetwork {
  std::vector<int> bus_ids;
  Eigen::VectorXd inertia;        // J
  Eigen::VectorXd damping;        // D
  Eigen::VectorXd mechanical_power;  // Pm as given
  Eigen::MatrixXd coupling;       // B, symmetric, zero diagonal
  double omega0 = 100.0 * 3.14159265358979323846;

  std::size_t size() const { return bus_ids.size(); }
  std::size_t index_of(int bus_id) const;
  Eigen::VectorXd balanced_power() const;
  bool is_connected() const;
  ChannelSchema schema() const { return ChannelSchema(bus_ids); }

  /// Throws DataError on J <= 0, D < 0, asymmetric or negative coupling,
  /// non-zero diagonal, or mismatched sizes.
  void validate() const;
};

struct SwingState {
  Eigen::VectorXd delta;
  Eigen::VectorXd omega;
};

enum class FaultMode { power_sink, coupling_drop };

struct FaultSpec {
  int bus = 0;  // bus id of the faulted generator
  double t_start = 1.0;
  double duration = 0.1;
  FaultMode mode = FaultMode::power_sink;
  // power_sink: p.u. drawn at the bus; coupling_drop: factor in [0, 1)
  // applied to the bus's row and column of B.
  double magnitude = 0.5;
};

struct SimConfig {
  double dt_out = 0.01;
  double dt_int = 1e-3;
  double horizon = 10.0;
  double record_from = 0.0;  // first output time
  std::optional<SwingState> initial;  // equilibrium when empty
};

/// Newton solve of Pm - Pe(delta) = 0 with delta_1 = 0 and omega = 1.
/// Residual infinity-norm is below 1e-10 on return.
SwingState solve_equilibrium(const SwingNetwork& net);

/// Right-hand side of the swing equations, optionally with a fault applied.
SwingState swing_derivative(const SwingNetwork& net, const SwingState& x, const FaultSpec* active_fault = nullptr);

/// Energy function sum_i (J_i omega0 / 2)(omega_i - 1)^2 - sum_{i<j} B_ij cos(delta_i - delta_j)
/// - sum_i Pm_i delta_i (balanced Pm). Conserved when D = 0 and no fault is active.
double swing_energy(const SwingNetwork& net, const SwingState& x);

/// Fixed-step RK4 integration with the fault applied on the integration-grid
/// window nearest to [t_start, t_start + duration). Throws NumericalError
/// ("instability") when any |omega_i - 1| exceeds 0.5 p.u.
Trajectory simulate(const SwingNetwork& net, const FaultSpec& fault, const SimConfig& config);

struct SkippedScenario {
  FaultSpec fault;
  std::string reason;
};

struct ScenarioBatch {
  TrajectorySet set;
  std::vector<SkippedScenario> skipped;
};

/// One trajectory per fault; unstable scenarios are skipped and reported.
/// Throws NumericalError when every scenario is unstable.
ScenarioBatch generate_scenarios(const SwingNetwork& net, std::span<const FaultSpec> faults,
                                 const SimConfig& config);

/// The template fault applied at each listed bus in turn.
ScenarioBatch generate_scenarios(const SwingNetwork& net, std::span<const int> buses, const SimConfig& config,
                                 const FaultSpec& fault_template);

SwingNetwork read_network_json(const std::filesystem::path& path);
SwingNetwork parse_network_json(const std::string& text);
std::string network_json(const SwingNetwork& net);

}  // namespace hodmd
