#include "hodmd/trajectory.hpp"

#include "hodmd/error.hpp"
#include "hodmd/io_util.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <sstream>

namespace hodmd {

ChannelSchema::ChannelSchema(std::vector<int> bus_ids) : buses_(std::move(bus_ids)) {
  if (buses_.empty()) throw DataError("channel schema needs at least one bus");
  std::sort(buses_.begin(), buses_.end());
  if (std::adjacent_find(buses_.begin(), buses_.end()) != buses_.end())
    throw DataError("duplicate bus id in channel schema");
}

std::string ChannelSchema::channel_name(std::size_t channel) const {
  const int bus = buses_.at(channel / 2);
  return (channel % 2 == 0 ? "omega_" : "delta_") + std::to_string(bus);
}

std::optional<std::size_t> ChannelSchema::channel_index(std::string_view name) const {
  for (std::size_t c = 0; c < channel_count(); ++c)
    if (channel_name(c) == name) return c;
  return std::nullopt;
}

std::optional<std::size_t> ChannelSchema::bus_position(int bus_id) const {
  const auto it = std::lower_bound(buses_.begin(), buses_.end(), bus_id);
  if (it == buses_.end() || *it != bus_id) return std::nullopt;
  return static_cast<std::size_t>(it - buses_.begin());
}

Trajectory::Trajectory(ChannelSchema schema, double dt, double t0, Eigen::MatrixXd values,
                       std::optional<double> fault_time)
    : schema_(std::move(schema)), dt_(dt), t0_(t0), values_(std::move(values)), fault_time_(fault_time) {
  if (!(dt_ > 0.0) || !std::isfinite(dt_)) throw DataError("sampling interval must be positive");
  if (!std::isfinite(t0_)) throw DataError("start time must be finite");
  if (static_cast<std::size_t>(values_.rows()) != schema_.channel_count())
    throw DataError("trajectory has " + std::to_string(values_.rows()) + " channels, schema expects " +
                    std::to_string(schema_.channel_count()));
  if (values_.cols() == 0) throw DataError("empty trajectory");
  if (values_.cols() < 2) throw DataError("trajectory needs at least two samples");
  if (!values_.allFinite()) throw DataError("trajectory contains non-finite values");
}

Trajectory Trajectory::slice_from(double t_from) const {
  const double k = std::ceil((t_from - t0_) / dt_ - 1e-6);
  const Eigen::Index first = std::max<Eigen::Index>(0, static_cast<Eigen::Index>(k));
  if (first >= samples()) throw DataError("slice start lies beyond the trajectory");
  return Trajectory(schema_, dt_, time(first), values_.rightCols(samples() - first), fault_time_);
}

TrajectorySet::TrajectorySet(std::vector<Trajectory> trajectories, double dt_tolerance)
    : trajectories_(std::move(trajectories)) {
  if (trajectories_.empty()) throw DataError("trajectory set is empty");
  const auto& first = trajectories_.front();
  for (const auto& traj : trajectories_) {
    if (!(traj.schema() == first.schema())) throw DataError("header mismatch across trajectories");
    if (std::abs(traj.dt() - first.dt()) > dt_tolerance * first.dt())
      throw DataError("non-uniform sampling: dt " + format_number(traj.dt()) + " vs " +
                      format_number(first.dt()));
  }
}

Eigen::Index TrajectorySet::total_samples() const {
  Eigen::Index total = 0;
  for (const auto& traj : trajectories_) total += traj.samples();
  return total;
}

Eigen::Index TrajectorySet::min_samples() const {
  Eigen::Index m = std::numeric_limits<Eigen::Index>::max();
  for (const auto& traj : trajectories_) m = std::min(m, traj.samples());
  return m;
}

TrajectorySet TrajectorySet::slice_from(double t_from) const {
  std::vector<Trajectory> out;
  out.reserve(trajectories_.size());
  for (const auto& traj : trajectories_) out.push_back(traj.slice_from(t_from));
  return TrajectorySet(std::move(out));
}

SteadyState compute_steady_state(const TrajectorySet& set, SteadyStatePolicy policy,
                                 const std::optional<Eigen::VectorXd>& explicit_values) {
  const auto channels = static_cast<Eigen::Index>(set.schema().channel_count());
  switch (policy) {
    case SteadyStatePolicy::explicit_value: {
      if (!explicit_values) throw DataError("explicit steady state requires a value vector");
      if (explicit_values->size() != channels)
        throw DataError("steady-state vector has length " + std::to_string(explicit_values->size()) +
                        ", expected " + std::to_string(channels));
      if (!explicit_values->allFinite()) throw DataError("steady-state vector is not finite");
      return {*explicit_values, policy};
    }
    case SteadyStatePolicy::pre_fault_mean: {
      const auto& traj = set[0];
      const auto fault = traj.fault_time();
      if (!fault || !(*fault > traj.t0() + traj.dt()))
        throw DataError("no pre-fault samples: fault time must exceed t0 + dt");
      // Deviations from the first sample are averaged so constant data stays exact.
      const Eigen::VectorXd anchor = traj.values().col(0);
      Eigen::VectorXd sum = Eigen::VectorXd::Zero(channels);
      Eigen::Index count = 0;
      for (Eigen::Index k = 0; k < traj.samples() && traj.time(k) < *fault; ++k, ++count)
        sum += traj.values().col(k) - anchor;
      return {anchor + sum / static_cast<double>(count), policy};
    }
    case SteadyStatePolicy::final_window_mean: {
      const Eigen::VectorXd anchor = set[0].values().col(set[0].samples() - 1);
      Eigen::VectorXd sum = Eigen::VectorXd::Zero(channels);
      Eigen::Index count = 0;
      for (const auto& traj : set.trajectories()) {
        const auto window = std::max<Eigen::Index>(
            1, static_cast<Eigen::Index>(std::ceil(0.1 * static_cast<double>(traj.samples()))));
        sum += (traj.values().rightCols(window).colwise() - anchor).rowwise().sum();
        count += window;
      }
      return {anchor + sum / static_cast<double>(count), policy};
    }
  }
  throw DataError("unknown steady-state policy");
}

SteadyState compute_steady_state_auto(const TrajectorySet& set) {
  const auto& traj = set[0];
  if (traj.fault_time() && *traj.fault_time() > traj.t0() + traj.dt())
    return compute_steady_state(set, SteadyStatePolicy::pre_fault_mean);
  return compute_steady_state(set, SteadyStatePolicy::final_window_mean);
}

TrajectorySet inject_noise(const TrajectorySet& set, double snr_db, const SteadyState& steady,
                           std::uint64_t seed) {
  if (std::isnan(snr_db) || snr_db == -std::numeric_limits<double>::infinity())
    throw DataError("SNR must be finite or +inf");
  const auto channels = static_cast<Eigen::Index>(set.schema().channel_count());
  if (steady.values.size() != channels) throw DataError("steady-state length does not match schema");
  if (std::isinf(snr_db)) return set;

  Eigen::VectorXd power = Eigen::VectorXd::Zero(channels);
  for (const auto& traj : set.trajectories())
    power += (traj.values().colwise() - steady.values).rowwise().squaredNorm();
  const Eigen::VectorXd sigma =
      std::pow(10.0, -snr_db / 20.0) * (power / static_cast<double>(set.total_samples())).cwiseSqrt();

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Trajectory> noisy;
  noisy.reserve(set.size());
  for (const auto& traj : set.trajectories()) {
    Eigen::MatrixXd values = traj.values();
    for (Eigen::Index k = 0; k < values.cols(); ++k)
      for (Eigen::Index c = 0; c < channels; ++c) values(c, k) += sigma(c) * normal(rng);
    noisy.emplace_back(traj.schema(), traj.dt(), traj.t0(), std::move(values), traj.fault_time());
  }
  return TrajectorySet(std::move(noisy));
}

// ---- files ---------------------------------------------------------------

namespace {

struct Column {
  int bus;
  Quantity quantity;
};

Column parse_header_field(std::string_view field) {
  auto parse_bus = [&](std::string_view digits) {
    int bus = 0;
    const auto [end, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), bus);
    if (digits.empty() || ec != std::errc{} || end != digits.data() + digits.size())
      throw DataError("bad channel header '" + std::string(field) + "'");
    return bus;
  };
  if (field.starts_with("omega_")) return {parse_bus(field.substr(6)), Quantity::omega};
  if (field.starts_with("delta_")) return {parse_bus(field.substr(6)), Quantity::delta};
  throw DataError("bad channel header '" + std::string(field) + "'");
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.remove_suffix(1);
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  return s;
}

}  // namespace

Trajectory read_trajectory_csv(const std::filesystem::path& path, double dt_tolerance,
                               std::optional<double> fault_time) {
  if (!std::filesystem::exists(path)) throw DataError("missing file: " + path.string());
  std::string text = read_file(path);
  if (text.starts_with("\xEF\xBB\xBF")) text.erase(0, 3);

  std::vector<std::string_view> lines;
  for (auto line : split(text, '\n')) {
    line = trim(line);
    if (!line.empty()) lines.push_back(line);
  }
  if (lines.empty()) throw DataError(path.string() + ": missing header");

  const auto header = split(lines[0], ',');
  if (trim(header[0]) != "t") throw DataError(path.string() + ": first column must be 't'");
  std::vector<Column> columns;
  std::map<int, int> seen;
  for (std::size_t i = 1; i < header.size(); ++i) {
    columns.push_back(parse_header_field(trim(header[i])));
    seen[columns.back().bus] |= columns.back().quantity == Quantity::omega ? 1 : 2;
  }
  std::vector<int> buses;
  for (const auto& [bus, mask] : seen) {
    if (mask != 3) throw DataError(path.string() + ": bus " + std::to_string(bus) + " needs omega and delta");
    buses.push_back(bus);
  }
  if (columns.size() != 2 * buses.size()) throw DataError(path.string() + ": duplicate channel header");
  ChannelSchema schema(buses);

  const auto samples = static_cast<Eigen::Index>(lines.size() - 1);
  if (samples == 0) throw DataError(path.string() + ": empty trajectory");
  Eigen::MatrixXd values(static_cast<Eigen::Index>(schema.channel_count()), samples);
  std::vector<double> times(static_cast<std::size_t>(samples));
  for (Eigen::Index k = 0; k < samples; ++k) {
    const auto fields = split(lines[static_cast<std::size_t>(k) + 1], ',');
    if (fields.size() != header.size())
      throw DataError(path.string() + ": row " + std::to_string(k + 1) + " has wrong field count");
    try {
      times[static_cast<std::size_t>(k)] = parse_number(fields[0]);
      for (std::size_t i = 0; i < columns.size(); ++i) {
        const auto pos = *schema.bus_position(columns[i].bus);
        const auto channel = columns[i].quantity == Quantity::omega ? ChannelSchema::omega_channel(pos)
                                                                    : ChannelSchema::delta_channel(pos);
        values(static_cast<Eigen::Index>(channel), k) = parse_number(fields[i + 1]);
      }
    } catch (const DataError& e) {
      throw DataError(path.string() + ": row " + std::to_string(k + 1) + ": " + e.what());
    }
  }
  if (samples < 2) throw DataError(path.string() + ": trajectory needs at least two samples");

  const double dt = times[1] - times[0];
  if (!(dt > 0.0)) throw DataError(path.string() + ": time stamps must increase");
  for (std::size_t k = 1; k < times.size(); ++k)
    if (std::abs((times[k] - times[k - 1]) - dt) > dt_tolerance * dt)
      throw DataError(path.string() + ": non-uniform sampling at row " + std::to_string(k + 1));
  return Trajectory(std::move(schema), dt, times[0], std::move(values), fault_time);
}

std::string samples_csv(const ChannelSchema& schema, double dt, double t0, const Eigen::MatrixXd& values) {
  if (values.rows() != static_cast<Eigen::Index>(schema.channel_count()))
    throw DataError("sample rows do not match schema");
  std::string out = "t";
  for (std::size_t c = 0; c < schema.channel_count(); ++c) out += "," + schema.channel_name(c);
  out += '\n';
  for (Eigen::Index k = 0; k < values.cols(); ++k) {
    out += format_number(t0 + static_cast<double>(k) * dt);
    for (Eigen::Index c = 0; c < values.rows(); ++c) {
      out += ',';
      out += format_number(values(c, k));
    }
    out += '\n';
  }
  return out;
}

std::string trajectory_csv(const Trajectory& trajectory) {
  return samples_csv(trajectory.schema(), trajectory.dt(), trajectory.t0(), trajectory.values());
}

void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& trajectory) {
  write_file_atomic(path, trajectory_csv(trajectory));
}

Manifest read_manifest(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw DataError("missing file: " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": invalid JSON: " + e.what());
  }
  Manifest manifest;
  try {
    if (doc.contains("dt_tolerance")) manifest.dt_tolerance = doc.at("dt_tolerance").get<double>();
    if (doc.contains("fault_time") && !doc.at("fault_time").is_null())
      manifest.fault_time = doc.at("fault_time").get<double>();
    for (const auto& entry : doc.at("trajectories")) manifest.trajectories.emplace_back(entry.get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": malformed manifest: " + e.what());
  }
  if (manifest.trajectories.empty()) throw DataError(path.string() + ": manifest lists no trajectories");
  if (!(manifest.dt_tolerance > 0.0)) throw DataError(path.string() + ": dt_tolerance must be positive");
  return manifest;
}

std::string manifest_json(const Manifest& manifest) {
  nlohmann::ordered_json doc;
  doc["dt_tolerance"] = manifest.dt_tolerance;
  doc["fault_time"] = manifest.fault_time ? nlohmann::ordered_json(*manifest.fault_time) : nullptr;
  doc["trajectories"] = nlohmann::ordered_json::array();
  for (const auto& p : manifest.trajectories) doc["trajectories"].push_back(p.generic_string());
  return doc.dump(2) + "\n";
}

TrajectorySet load_trajectory_set(const std::filesystem::path& manifest_path) {
  const auto manifest = read_manifest(manifest_path);
  const auto base = manifest_path.parent_path();
  std::vector<Trajectory> trajectories;
  for (const auto& rel : manifest.trajectories) {
    const auto full = rel.is_absolute() ? rel : base / rel;
    trajectories.push_back(read_trajectory_csv(full, manifest.dt_tolerance, manifest.fault_time));
  }
  return TrajectorySet(std::move(trajectories), manifest.dt_tolerance);
}

}  // namespace hodmd
