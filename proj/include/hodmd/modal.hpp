#pragma once

#include "hodmd/decomposition.hpp"
#include "hodmd/trajectory.hpp"

#include <Eigen/Dense>

#include <complex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hodmd {

/// Frequencies below this are treated as non-oscillatory.
inline constexpr double kMinFrequencyHz = 1e-3;

struct ContinuousMode {
  std::complex<double> s;  // ln(lambda) / dt, principal branch
  double frequency = 0.0;  // Hz
  double decay = 0.0;      // 1/s, -Re(s)
  std::optional<double> damping_pct;  // absent when frequency < f_min
};

ContinuousMode continuous_parameters(std::complex<double> lambda, double dt, double f_min = kMinFrequencyHz);

enum class ModeKind { local, global, non_oscillatory };

struct Classification {
  ModeKind kind = ModeKind::global;
  std::vector<int> buses;  // local modes only
  double ipr = 0.0;
};

/// Per-bus energy shares p_i of a mode shape (sum of |u|^2 over the bus's
/// two channels, normalised to sum to one).
Eigen::VectorXd bus_participation(const Eigen::VectorXcd& mode, const ChannelSchema& schema);

/// IPR = sum p_i^2. Local when IPR >= ipr_threshold, naming buses with
/// p_i >= 0.25; global otherwise.
Classification classify_mode(const Eigen::VectorXcd& mode, const ChannelSchema& schema, double ipr_threshold = 0.5);

enum class AmplitudeAggregate { max, mean };

struct RankOptions {
  int top_n = 30;
  double ipr_threshold = 0.5;
  AmplitudeAggregate aggregate = AmplitudeAggregate::max;
  double f_min = kMinFrequencyHz;
  double pair_tolerance = 1e-9;  // relative, for matching conjugate pairs
};

struct ModeSummary {
  int index = 0;  // position in the model's eigenvalue list
  std::complex<double> lambda;
  double frequency = 0.0;
  double decay = 0.0;
  std::optional<double> damping_pct;
  double amplitude = 0.0;
  Classification classification;
};

/// One entry per conjugate pair (the Im > 0 member) or real eigenvalue,
/// sorted by aggregated amplitude, largest first. Dropped modes are skipped.
std::vector<ModeSummary> rank_modes(const HodmdModel& model, const RankOptions& options = {});

std::string mode_table_csv(const std::vector<ModeSummary>& modes);

// ---- FFT -----------------------------------------------------------------

enum class Window { none, hann };

struct Spectrum {
  Eigen::VectorXd freqs;       // Hz, bins 0 .. floor(T/2)
  Eigen::VectorXd magnitudes;  // |X_k| of the (windowed) mean-removed signal
  std::size_t channel = 0;
  std::string channel_name;
  double resolution = 0.0;  // 1 / (T dt)
  Eigen::Index length = 0;  // T

  /// sum_k |X_k|^2 over the full two-sided spectrum, recovered from the
  /// one-sided half. Equals T * sum (x - mean)^2 for Window::none.
  double energy() const;
};

Spectrum fft_spectrum(const Trajectory& trajectory, std::size_t channel, Window window = Window::hann);
Spectrum fft_spectrum(const Trajectory& trajectory, std::string_view channel_name, Window window = Window::hann);

struct Peak {
  Eigen::Index bin = 0;
  double frequency = 0.0;
  double magnitude = 0.0;
};

/// Interior local maxima with magnitude >= relative_threshold * max,
/// largest first.
std::vector<Peak> find_peaks(const Spectrum& spectrum, double relative_threshold = 0.1);

std::string spectrum_csv(const Spectrum& spectrum);

}  // namespace hodmd
