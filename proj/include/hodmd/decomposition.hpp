#pragma once

#include "hodmd/embedding.hpp"
#include "hodmd/trajectory.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace hodmd {

/// Truncation rule for the SVD of the embedded snapshot matrix.
struct RankSpec {
  enum class Kind { fixed, tolerance };
  Kind kind = Kind::tolerance;
  int rank = 0;              // fixed
  double tolerance = 1e-8;   // keep sigma_r / sigma_1 > tolerance

  static RankSpec fixed(int r) { return {Kind::fixed, r, 0.0}; }
  static RankSpec relative(double eps = 1e-8) { return {Kind::tolerance, 0, eps}; }
  void validate() const;
};

/// Largest r with sigma_r / sigma_1 > tolerance, or min(r, count) for a
/// fixed rank. `singular_values` must be non-empty and non-increasing.
int select_rank(const Eigen::VectorXd& singular_values, const RankSpec& spec);

/// A fitted higher-order DMD model.
///
/// Eigenvalues are discrete-time (one sample step). Columns of `phi` are the
/// stacked eigenvectors U W; `spatial_modes` are the first-snapshot blocks of
/// those columns scaled to unit norm, with the removed scale in `mode_norms`.
struct HodmdModel {
  int order = 1;
  double dt = 0.0;
  ChannelSchema schema;
  int rank = 0;
  Eigen::VectorXcd lambdas;
  Eigen::MatrixXcd phi;       // 2Nd x r, empty when loaded without it
  Eigen::MatrixXcd phi_pinv;  // r x 2Nd, left inverse of phi
  Eigen::MatrixXd basis;      // U, 2Nd x r; in-memory only
  Eigen::MatrixXcd spatial_modes;  // 2N x r
  Eigen::VectorXd mode_norms;
  std::vector<int> dropped_modes;  // modes with mode_norm < 1e-12, not reported
  std::optional<SteadyState> center;
  Eigen::MatrixXd amplitudes;  // Q x r
  Eigen::VectorXd singular_values;  // full spectrum of X, for diagnostics

  bool has_phi() const { return phi.size() > 0; }
  bool is_dropped(int m) const;
  Eigen::Index state_size() const { return static_cast<Eigen::Index>(schema.channel_count()); }

  /// Mode coefficients b = Phi^+ x~ for a stacked (already centered) vector.
  Eigen::VectorXcd project(const Eigen::VectorXd& stacked) const;
};

HodmdModel fit(const EmbeddedPair& pair, const RankSpec& spec);

std::string model_json(const HodmdModel& model, bool store_phi = true);
HodmdModel parse_model_json(const std::string& text);
HodmdModel read_model_json(const std::filesystem::path& path);

}  // namespace hodmd
