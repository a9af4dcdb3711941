#include "cli.hpp"

#include "hodmd/decomposition.hpp"
#include "hodmd/embedding.hpp"
#include "hodmd/error.hpp"
#include "hodmd/io_util.hpp"
#include "hodmd/modal.hpp"
#include "hodmd/prediction.hpp"
#include "hodmd/simulator.hpp"
#include "hodmd/trajectory.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace hodmd {
namespace {

// Raised for option combinations CLI11 cannot express; exits with code 1.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void require_file(const fs::path& path) {
  if (!fs::is_regular_file(path)) throw DataError("missing file: " + path.string());
}

void require_output_parent(const fs::path& path) {
  const fs::path parent = path.parent_path();
  if (!parent.empty() && !fs::is_directory(parent)) throw DataError("output directory does not exist: " + parent.string());
}

int parse_int(std::string_view text) {
  double v = 0.0;
  try {
    v = parse_number(text);
  } catch (const DataError&) {
    throw UsageError("expected an integer, got '" + std::string(text) + "'");
  }
  if (v != std::floor(v) || std::abs(v) > 1e9) throw UsageError("expected an integer, got '" + std::string(text) + "'");
  return static_cast<int>(v);
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  for (const auto part : split(text, ',')) out.push_back(parse_int(part));
  return out;
}

// "a:b" inclusive range, "a,b,c" list, or a single value.
std::vector<int> parse_orders(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) return parse_int_list(text);
  const int lo = parse_int(std::string_view(text).substr(0, colon));
  const int hi = parse_int(std::string_view(text).substr(colon + 1));
  if (lo > hi) throw UsageError("empty order range " + text);
  std::vector<int> out;
  for (int d = lo; d <= hi; ++d) out.push_back(d);
  return out;
}

FaultMode parse_fault_mode(const std::string& text) {
  if (text == "power-sink") return FaultMode::power_sink;
  if (text == "coupling-drop") return FaultMode::coupling_drop;
  throw UsageError("unknown fault mode '" + text + "'");
}

SteadyState steady_state_for(const TrajectorySet& set, const std::string& policy) {
  if (policy == "auto") return compute_steady_state_auto(set);
  if (policy == "pre-fault") return compute_steady_state(set, SteadyStatePolicy::pre_fault_mean);
  if (policy == "final-window") return compute_steady_state(set, SteadyStatePolicy::final_window_mean);
  throw UsageError("unknown steady-state policy '" + policy + "'");
}

RankSpec rank_spec(std::optional<int> rank, std::optional<double> tolerance) {
  if (rank) return RankSpec::fixed(*rank);
  return RankSpec::relative(tolerance.value_or(1e-8));
}

TrajectorySet maybe_slice(const TrajectorySet& set, std::optional<double> from) {
  return from ? set.slice_from(*from) : set;
}

// Writes a batch of files; removes the ones already written if a later one fails.
void write_all(const std::vector<std::pair<fs::path, std::string>>& files) {
  std::vector<fs::path> written;
  try {
    for (const auto& [path, content] : files) {
      write_file_atomic(path, content);
      written.push_back(path);
    }
  } catch (...) {
    std::error_code ignored;
    for (const auto& p : written) fs::remove(p, ignored);
    throw;
  }
}

fs::path relative_to(const fs::path& target, const fs::path& base_dir) {
  const fs::path base = fs::weakly_canonical(fs::absolute(base_dir.empty() ? fs::path(".") : base_dir));
  return fs::weakly_canonical(fs::absolute(target)).lexically_relative(base);
}

struct FaultOptions {
  double start = 1.0;
  double duration = 0.1;
  double magnitude = 0.5;
  std::string mode = "power-sink";

  void attach(CLI::App* cmd) {
    cmd->add_option("--fault-start", start, "fault onset (s)")->capture_default_str();
    cmd->add_option("--fault-dur", duration, "fault duration (s)")->capture_default_str();
    cmd->add_option("--fault-mag", magnitude, "power drawn (power-sink) or coupling factor (coupling-drop)")
        ->capture_default_str();
    cmd->add_option("--fault-mode", mode, "power-sink | coupling-drop")->capture_default_str();
  }
  FaultSpec spec(int bus) const { return {bus, start, duration, parse_fault_mode(mode), magnitude}; }
};

struct SimOptions {
  double horizon = 10.0;
  double dt = 0.01;
  double dt_int = 1e-3;
  double record_from = 0.0;

  void attach(CLI::App* cmd) {
    cmd->add_option("--horizon", horizon, "simulated time (s)")->capture_default_str();
    cmd->add_option("--dt", dt, "output sampling interval (s)")->capture_default_str();
    cmd->add_option("--dt-int", dt_int, "RK4 step (s)")->capture_default_str();
    cmd->add_option("--record-from", record_from, "first recorded time (s)")->capture_default_str();
  }
  SimConfig config() const {
    SimConfig c;
    c.horizon = horizon;
    c.dt_out = dt;
    c.dt_int = dt_int;
    c.record_from = record_from;
    return c;
  }
};

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Higher-order DMD for networked oscillator dynamics", "hodmd"};
  app.require_subcommand(1);

  // simulate
  auto* simulate_cmd = app.add_subcommand("simulate", "simulate one fault scenario");
  fs::path sim_network, sim_out;
  int sim_bus = 0;
  FaultOptions sim_fault;
  SimOptions sim_opts;
  simulate_cmd->add_option("--network", sim_network, "network JSON")->required();
  simulate_cmd->add_option("--fault-bus", sim_bus, "faulted bus id")->required();
  simulate_cmd->add_option("--out", sim_out, "trajectory CSV")->required();
  sim_fault.attach(simulate_cmd);
  sim_opts.attach(simulate_cmd);

  // scenarios
  auto* scenarios_cmd = app.add_subcommand("scenarios", "simulate one fault per bus and write a manifest");
  fs::path scen_network, scen_out, scen_manifest;
  std::string scen_buses;
  FaultOptions scen_fault;
  SimOptions scen_opts;
  scenarios_cmd->add_option("--network", scen_network, "network JSON")->required();
  scenarios_cmd->add_option("--buses", scen_buses, "comma-separated bus ids (default: all)");
  scenarios_cmd->add_option("--out", scen_out, "output directory")->required();
  scenarios_cmd->add_option("--manifest", scen_manifest, "manifest path (default: <out>/manifest.json)");
  scen_fault.attach(scenarios_cmd);
  scen_opts.attach(scenarios_cmd);

  // fit
  auto* fit_cmd = app.add_subcommand("fit", "fit a model");
  fs::path fit_train, fit_model;
  int fit_d = 1;
  std::optional<int> fit_rank;
  std::optional<double> fit_tol, fit_from;
  std::string fit_center = "on", fit_steady = "auto";
  bool fit_no_phi = false;
  fit_cmd->add_option("--train", fit_train, "training manifest")->required();
  fit_cmd->add_option("--d", fit_d, "embedding order")->required();
  auto* fit_rank_opt = fit_cmd->add_option("--rank", fit_rank, "fixed truncation rank");
  fit_cmd->add_option("--rank-tol", fit_tol, "relative singular value threshold (default 1e-8)")->excludes(fit_rank_opt);
  fit_cmd->add_option("--center", fit_center, "on | off")->capture_default_str();
  fit_cmd->add_option("--steady-state", fit_steady, "auto | pre-fault | final-window")->capture_default_str();
  fit_cmd->add_option("--from", fit_from, "drop samples before this time");
  fit_cmd->add_flag("--no-phi", fit_no_phi, "omit stacked eigenvectors from the model file");
  fit_cmd->add_option("--model", fit_model, "model JSON")->required();

  // predict
  auto* predict_cmd = app.add_subcommand("predict", "forecast from the first d samples of a trajectory");
  fs::path pred_model, pred_init, pred_out, pred_ref, pred_metrics;
  std::optional<int> pred_steps;
  std::optional<double> pred_from;
  predict_cmd->add_option("--model", pred_model, "model JSON")->required();
  predict_cmd->add_option("--init", pred_init, "trajectory CSV providing the initial window")->required();
  predict_cmd->add_option("--steps", pred_steps, "forecast length (default: rest of --init)");
  predict_cmd->add_option("--out", pred_out, "predicted trajectory CSV")->required();
  predict_cmd->add_option("--reference", pred_ref, "reference trajectory CSV");
  predict_cmd->add_option("--metrics", pred_metrics, "metrics JSON (needs --reference)");
  predict_cmd->add_option("--from", pred_from, "drop samples of --init and --reference before this time");

  // modes
  auto* modes_cmd = app.add_subcommand("modes", "tabulate the largest modes");
  fs::path modes_model, modes_out;
  int modes_top = 30;
  double modes_ipr = 0.5;
  std::string modes_aggregate = "max";
  modes_cmd->add_option("--model", modes_model, "model JSON")->required();
  modes_cmd->add_option("--top", modes_top, "number of modes")->capture_default_str();
  modes_cmd->add_option("--ipr-threshold", modes_ipr, "local/global IPR threshold")->capture_default_str();
  modes_cmd->add_option("--aggregate", modes_aggregate, "max | mean")->capture_default_str();
  modes_cmd->add_option("--out", modes_out, "mode table CSV")->required();

  // sweep-d
  auto* sweep_cmd = app.add_subcommand("sweep-d", "score a range of embedding orders");
  fs::path sweep_train, sweep_test, sweep_out;
  std::string sweep_d, sweep_center = "on", sweep_steady = "auto";
  std::optional<int> sweep_rank;
  std::optional<double> sweep_tol, sweep_from;
  sweep_cmd->add_option("--train", sweep_train, "training manifest")->required();
  sweep_cmd->add_option("--test", sweep_test, "test manifest")->required();
  sweep_cmd->add_option("--d", sweep_d, "orders: a:b, a,b,c or a")->required();
  auto* sweep_rank_opt = sweep_cmd->add_option("--rank", sweep_rank, "fixed truncation rank");
  sweep_cmd->add_option("--rank-tol", sweep_tol, "relative singular value threshold (default 1e-8)")
      ->excludes(sweep_rank_opt);
  sweep_cmd->add_option("--center", sweep_center, "on | off")->capture_default_str();
  sweep_cmd->add_option("--steady-state", sweep_steady, "auto | pre-fault | final-window")->capture_default_str();
  sweep_cmd->add_option("--from", sweep_from, "drop samples before this time");
  sweep_cmd->add_option("--out", sweep_out, "sweep CSV")->required();

  // noise
  auto* noise_cmd = app.add_subcommand("noise", "add Gaussian noise at a given SNR");
  fs::path noise_in, noise_out;
  double noise_snr = 20.0;
  std::uint64_t noise_seed = 0;
  std::string noise_steady = "auto";
  noise_cmd->add_option("--in", noise_in, "input manifest")->required();
  noise_cmd->add_option("--snr-db", noise_snr, "signal-to-noise ratio (dB)")->required();
  noise_cmd->add_option("--seed", noise_seed, "random seed")->capture_default_str();
  noise_cmd->add_option("--steady-state", noise_steady, "auto | pre-fault | final-window")->capture_default_str();
  noise_cmd->add_option("--out", noise_out, "output directory")->required();

  // fft
  auto* fft_cmd = app.add_subcommand("fft", "magnitude spectrum of one channel");
  fs::path fft_traj, fft_out;
  std::string fft_channel, fft_window = "hann";
  fft_cmd->add_option("--traj", fft_traj, "trajectory CSV")->required();
  fft_cmd->add_option("--channel", fft_channel, "channel name, e.g. omega_3")->required();
  fft_cmd->add_option("--window", fft_window, "hann | none")->capture_default_str();
  fft_cmd->add_option("--out", fft_out, "spectrum CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*simulate_cmd) {
      require_file(sim_network);
      require_output_parent(sim_out);
      const SwingNetwork net = read_network_json(sim_network);
      const Trajectory traj = simulate(net, sim_fault.spec(sim_bus), sim_opts.config());
      write_trajectory_csv(sim_out, traj);
    } else if (*scenarios_cmd) {
      require_file(scen_network);
      const fs::path manifest_path = scen_manifest.empty() ? scen_out / "manifest.json" : scen_manifest;
      const SwingNetwork net = read_network_json(scen_network);
      const std::vector<int> buses = scen_buses.empty() ? net.bus_ids : parse_int_list(scen_buses);
      const ScenarioBatch batch =
          generate_scenarios(net, std::span<const int>(buses), scen_opts.config(), scen_fault.spec(0));
      for (const auto& skipped : batch.skipped)
        std::cerr << "skipped bus " << skipped.fault.bus << ": " << skipped.reason << "\n";

      fs::create_directories(scen_out);
      if (!manifest_path.parent_path().empty()) fs::create_directories(manifest_path.parent_path());
      std::set<int> skipped_buses;
      for (const auto& s : batch.skipped) skipped_buses.insert(s.fault.bus);
      std::vector<std::pair<fs::path, std::string>> files;
      Manifest manifest;
      manifest.fault_time = scen_fault.start;
      std::size_t q = 0;
      for (const int bus : buses) {
        if (skipped_buses.count(bus)) continue;
        const fs::path csv = scen_out / ("fault_bus_" + std::to_string(bus) + ".csv");
        files.emplace_back(csv, trajectory_csv(batch.set[q++]));
        manifest.trajectories.push_back(relative_to(csv, manifest_path.parent_path()));
      }
      files.emplace_back(manifest_path, manifest_json(manifest));
      write_all(files);
    } else if (*fit_cmd) {
      require_file(fit_train);
      require_output_parent(fit_model);
      if (fit_center != "on" && fit_center != "off") throw UsageError("--center must be on or off");
      const TrajectorySet raw = load_trajectory_set(fit_train);
      std::optional<SteadyState> center;
      if (fit_center == "on") center = steady_state_for(raw, fit_steady);
      const TrajectorySet train = maybe_slice(raw, fit_from);
      const HodmdModel model = fit(build_embedded_pair(train, fit_d, center), rank_spec(fit_rank, fit_tol));
      write_file_atomic(fit_model, model_json(model, !fit_no_phi));
      std::cerr << "fitted d=" << model.order << " r=" << model.rank << "\n";
    } else if (*predict_cmd) {
      require_file(pred_model);
      require_file(pred_init);
      if (!pred_ref.empty()) require_file(pred_ref);
      if (!pred_metrics.empty() && pred_ref.empty()) throw UsageError("--metrics needs --reference");
      require_output_parent(pred_out);
      if (!pred_metrics.empty()) require_output_parent(pred_metrics);

      const HodmdModel model = read_model_json(pred_model);
      const Trajectory init =
          pred_from ? read_trajectory_csv(pred_init).slice_from(*pred_from) : read_trajectory_csv(pred_init);
      if (init.schema() != model.schema) throw DataError("initial trajectory schema does not match model");
      if (init.samples() < model.order) throw DataError("initial trajectory has fewer than d samples");
      const int steps = pred_steps.value_or(static_cast<int>(init.samples() - model.order + 1));
      const Forecast predicted = reconstruct(model, init.values().leftCols(model.order), steps, init.t0());

      std::vector<std::pair<fs::path, std::string>> files{{pred_out, predicted.csv()}};
      if (!pred_ref.empty()) {
        const Trajectory reference_full =
            pred_from ? read_trajectory_csv(pred_ref).slice_from(*pred_from) : read_trajectory_csv(pred_ref);
        if (reference_full.schema() != model.schema) throw DataError("reference schema does not match model");
        const Eigen::Index offset = model.order - 1;
        if (reference_full.samples() < offset + steps)
          throw DataError("reference is shorter than the forecast horizon");
        const SteadyState steady =
            model.center ? *model.center : compute_steady_state_auto(TrajectorySet({reference_full}));
        const double error = rrmse(Eigen::MatrixXd(reference_full.values().middleCols(offset, steps)),
                                   predicted.values, steady);
        nlohmann::ordered_json metrics;
        metrics["rrmse"] = error;
        metrics["d"] = model.order;
        metrics["r"] = model.rank;
        metrics["steps"] = steps;
        std::cerr << "rrmse " << format_number(error) << "\n";
        if (!pred_metrics.empty()) files.emplace_back(pred_metrics, metrics.dump(2) + "\n");
      }
      write_all(files);
    } else if (*modes_cmd) {
      require_file(modes_model);
      require_output_parent(modes_out);
      RankOptions options;
      options.top_n = modes_top;
      options.ipr_threshold = modes_ipr;
      if (modes_aggregate == "max") {
        options.aggregate = AmplitudeAggregate::max;
      } else if (modes_aggregate == "mean") {
        options.aggregate = AmplitudeAggregate::mean;
      } else {
        throw UsageError("--aggregate must be max or mean");
      }
      const HodmdModel model = read_model_json(modes_model);
      write_file_atomic(modes_out, mode_table_csv(rank_modes(model, options)));
    } else if (*sweep_cmd) {
      require_file(sweep_train);
      require_file(sweep_test);
      require_output_parent(sweep_out);
      if (sweep_center != "on" && sweep_center != "off") throw UsageError("--center must be on or off");
      const std::vector<int> orders = parse_orders(sweep_d);
      const TrajectorySet raw_train = load_trajectory_set(sweep_train);
      const TrajectorySet raw_test = load_trajectory_set(sweep_test);
      const SteadyState steady = steady_state_for(raw_train, sweep_steady);
      const SweepReport report =
          sweep_order(maybe_slice(raw_train, sweep_from), maybe_slice(raw_test, sweep_from), orders,
                      rank_spec(sweep_rank, sweep_tol), steady, sweep_center == "on");
      write_file_atomic(sweep_out, sweep_csv(report));
    } else if (*noise_cmd) {
      require_file(noise_in);
      const Manifest source = read_manifest(noise_in);
      const TrajectorySet clean = load_trajectory_set(noise_in);
      const SteadyState steady = steady_state_for(clean, noise_steady);
      const TrajectorySet noisy = inject_noise(clean, noise_snr, steady, noise_seed);

      Manifest out_manifest = source;
      out_manifest.trajectories.clear();
      std::vector<std::pair<fs::path, std::string>> files;
      std::set<fs::path> names;
      for (std::size_t q = 0; q < noisy.size(); ++q) {
        const fs::path name = source.trajectories[q].filename();
        if (!names.insert(name).second) throw DataError("duplicate trajectory file name " + name.string());
        files.emplace_back(noise_out / name, trajectory_csv(noisy[q]));
        out_manifest.trajectories.push_back(name);
      }
      if (names.count("manifest.json")) throw DataError("trajectory file named manifest.json");
      files.emplace_back(noise_out / "manifest.json", manifest_json(out_manifest));
      fs::create_directories(noise_out);
      write_all(files);
    } else if (*fft_cmd) {
      require_file(fft_traj);
      require_output_parent(fft_out);
      Window window;
      if (fft_window == "hann") {
        window = Window::hann;
      } else if (fft_window == "none") {
        window = Window::none;
      } else {
        throw UsageError("--window must be hann or none");
      }
      const Trajectory traj = read_trajectory_csv(fft_traj);
      write_file_atomic(fft_out, spectrum_csv(fft_spectrum(traj, fft_channel, window)));
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace hodmd
