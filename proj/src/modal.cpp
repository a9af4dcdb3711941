#include "hodmd/modal.hpp"

#include "hodmd/error.hpp"
#include "hodmd/io_util.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace hodmd {

ContinuousMode continuous_parameters(std::complex<double> lambda, double dt, double f_min) {
  if (lambda == 0.0) throw DataError("eigenvalue is zero; continuous-time exponent undefined");
  if (!(dt > 0.0)) throw DataError("dt must be positive");
  ContinuousMode mode;
  mode.s = std::log(lambda) / dt;
  mode.frequency = std::abs(mode.s.imag()) / (2.0 * std::numbers::pi);
  mode.decay = -mode.s.real();
  if (mode.frequency >= f_min) mode.damping_pct = 100.0 * mode.decay / std::abs(mode.s);
  return mode;
}

Eigen::VectorXd bus_participation(const Eigen::VectorXcd& mode, const ChannelSchema& schema) {
  if (static_cast<std::size_t>(mode.size()) != schema.channel_count())
    throw DataError("mode length does not match schema");
  const double total = mode.squaredNorm();
  if (!(total > 0.0)) throw DataError("zero mode vector");
  Eigen::VectorXd p(static_cast<Eigen::Index>(schema.bus_count()));
  for (std::size_t i = 0; i < schema.bus_count(); ++i) {
    p(static_cast<Eigen::Index>(i)) = (std::norm(mode(static_cast<Eigen::Index>(ChannelSchema::omega_channel(i)))) +
                                       std::norm(mode(static_cast<Eigen::Index>(ChannelSchema::delta_channel(i))))) /
                                      total;
  }
  return p;
}

Classification classify_mode(const Eigen::VectorXcd& mode, const ChannelSchema& schema, double ipr_threshold) {
  const Eigen::VectorXd p = bus_participation(mode, schema);
  Classification c;
  c.ipr = p.squaredNorm();
  if (c.ipr >= ipr_threshold) {
    c.kind = ModeKind::local;
    for (Eigen::Index i = 0; i < p.size(); ++i)
      if (p(i) >= 0.25) c.buses.push_back(schema.buses()[static_cast<std::size_t>(i)]);
  } else {
    c.kind = ModeKind::global;
  }
  return c;
}

std::vector<ModeSummary> rank_modes(const HodmdModel& model, const RankOptions& options) {
  const auto r = static_cast<int>(model.lambdas.size());
  std::vector<ModeSummary> out;
  for (int m = 0; m < r; ++m) {
    if (model.is_dropped(m)) continue;
    const std::complex<double> lambda = model.lambdas(m);
    if (lambda.imag() < 0.0) {
      // Represented by its Im > 0 partner when one exists.
      const double tol = options.pair_tolerance * std::max(1.0, std::abs(lambda));
      bool paired = false;
      for (int j = 0; j < r && !paired; ++j)
        paired = j != m && !model.is_dropped(j) && std::abs(model.lambdas(j) - std::conj(lambda)) <= tol;
      if (paired) continue;
    }
    const ContinuousMode cm = continuous_parameters(lambda, model.dt, options.f_min);
    ModeSummary s;
    s.index = m;
    s.lambda = lambda;
    s.frequency = cm.frequency;
    s.decay = cm.decay;
    s.damping_pct = cm.damping_pct;
    if (model.amplitudes.rows() > 0) {
      const auto column = model.amplitudes.col(m);
      s.amplitude = options.aggregate == AmplitudeAggregate::max ? column.maxCoeff() : column.mean();
    }
    s.classification = classify_mode(model.spatial_modes.col(m), model.schema, options.ipr_threshold);
    if (s.frequency < options.f_min) {
      s.classification.kind = ModeKind::non_oscillatory;
      s.classification.buses.clear();
    }
    out.push_back(std::move(s));
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const ModeSummary& a, const ModeSummary& b) { return a.amplitude > b.amplitude; });
  if (options.top_n >= 0 && out.size() > static_cast<std::size_t>(options.top_n))
    out.resize(static_cast<std::size_t>(options.top_n));
  return out;
}

std::string mode_table_csv(const std::vector<ModeSummary>& modes) {
  std::string csv = "mode_index,frequency_hz,decay,damping_pct,amplitude,classification,buses\n";
  for (const auto& m : modes) {
    csv += std::to_string(m.index) + ',' + format_number(m.frequency) + ',' + format_number(m.decay) + ',';
    if (m.damping_pct) csv += format_number(*m.damping_pct);
    csv += ',' + format_number(m.amplitude) + ',';
    switch (m.classification.kind) {
      case ModeKind::local: csv += "local"; break;
      case ModeKind::global: csv += "global"; break;
      case ModeKind::non_oscillatory: csv += "non_oscillatory"; break;
    }
    csv += ',';
    for (std::size_t i = 0; i < m.classification.buses.size(); ++i) {
      if (i) csv += ';';
      csv += std::to_string(m.classification.buses[i]);
    }
    csv += '\n';
  }
  return csv;
}

// ---- FFT -----------------------------------------------------------------

double Spectrum::energy() const {
  double e = 0.0;
  for (Eigen::Index k = 0; k < magnitudes.size(); ++k) {
    const bool unpaired = k == 0 || (length % 2 == 0 && k == length / 2);
    e += (unpaired ? 1.0 : 2.0) * magnitudes(k) * magnitudes(k);
  }
  return e;
}

Spectrum fft_spectrum(const Trajectory& trajectory, std::size_t channel, Window window) {
  if (channel >= trajectory.schema().channel_count())
    throw DataError("unknown channel index " + std::to_string(channel));
  const Eigen::Index t = trajectory.samples();
  if (t < 8) throw DataError("FFT needs at least 8 samples");

  const Eigen::VectorXd row = trajectory.values().row(static_cast<Eigen::Index>(channel)).transpose();
  std::vector<double> signal(static_cast<std::size_t>(t));
  const double mean = row.mean();
  for (Eigen::Index k = 0; k < t; ++k) {
    double w = 1.0;
    if (window == Window::hann)
      w = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(t - 1)));
    signal[static_cast<std::size_t>(k)] = w * (row(k) - mean);
  }

  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> bins;
  fft.fwd(bins, signal);

  Spectrum s;
  s.channel = channel;
  s.channel_name = trajectory.schema().channel_name(channel);
  s.length = t;
  s.resolution = 1.0 / (static_cast<double>(t) * trajectory.dt());
  const Eigen::Index half = t / 2 + 1;
  s.freqs.resize(half);
  s.magnitudes.resize(half);
  for (Eigen::Index k = 0; k < half; ++k) {
    s.freqs(k) = static_cast<double>(k) * s.resolution;
    s.magnitudes(k) = std::abs(bins[static_cast<std::size_t>(k)]);
  }
  return s;
}

Spectrum fft_spectrum(const Trajectory& trajectory, std::string_view channel_name, Window window) {
  const auto index = trajectory.schema().channel_index(channel_name);
  if (!index) throw DataError("unknown channel '" + std::string(channel_name) + "'");
  return fft_spectrum(trajectory, *index, window);
}

std::vector<Peak> find_peaks(const Spectrum& spectrum, double relative_threshold) {
  const Eigen::VectorXd& m = spectrum.magnitudes;
  std::vector<Peak> peaks;
  if (m.size() < 3) return peaks;
  const double floor = relative_threshold * m.maxCoeff();
  for (Eigen::Index k = 1; k + 1 < m.size(); ++k) {
    if (m(k) > m(k - 1) && m(k) >= m(k + 1) && m(k) >= floor && m(k) > 0.0)
      peaks.push_back({k, spectrum.freqs(k), m(k)});
  }
  std::stable_sort(peaks.begin(), peaks.end(), [](const Peak& a, const Peak& b) { return a.magnitude > b.magnitude; });
  return peaks;
}

std::string spectrum_csv(const Spectrum& spectrum) {
  std::string csv = "freq_hz,magnitude\n";
  for (Eigen::Index k = 0; k < spectrum.freqs.size(); ++k)
    csv += format_number(spectrum.freqs(k)) + ',' + format_number(spectrum.magnitudes(k)) + '\n';
  return csv;
}

}  // namespace hodmd
