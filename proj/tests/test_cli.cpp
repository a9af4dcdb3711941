#include "cli.hpp"

#include "hodmd/decomposition.hpp"
#include "hodmd/io_util.hpp"
#include "hodmd/prediction.hpp"
#include "hodmd/trajectory.hpp"
#include "oracles.hpp"
#include "temp_dir.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

using namespace hodmd;
namespace fs = std::filesystem;

namespace {

const fs::path kNetwork = fs::path(HODMD_TEST_DATA) / "five_gen.json";

int run(std::vector<std::string> args) {
  args.insert(args.begin(), "hodmd");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

// Writes the trajectories as fault_<q>.csv plus manifest.json in `dir`.
fs::path write_set(const fs::path& dir, const std::vector<Trajectory>& trajectories,
                   std::optional<double> fault_time = std::nullopt) {
  fs::create_directories(dir);
  Manifest m;
  m.fault_time = fault_time;
  for (std::size_t q = 0; q < trajectories.size(); ++q) {
    const std::string name = "traj_" + std::to_string(q) + ".csv";
    write_trajectory_csv(dir / name, trajectories[q]);
    m.trajectories.push_back(name);
  }
  write_file_atomic(dir / "manifest.json", manifest_json(m));
  return dir / "manifest.json";
}

std::map<fs::path, std::string> snapshot(const fs::path& dir) {
  std::map<fs::path, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) files[e.path()] = read_file(e.path());
  return files;
}

std::vector<std::vector<std::string>> read_csv_rows(const fs::path& path) {
  std::vector<std::vector<std::string>> rows;
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    for (const auto c : split(line, ',')) cells.emplace_back(c);
    rows.push_back(std::move(cells));
  }
  return rows;
}

Trajectory geometric_trajectory() {
  Eigen::MatrixXd A(4, 4);
  A << 0.9, 0.1, 0.0, 0.0,
      -0.1, 0.9, 0.0, 0.0,
       0.0, 0.0, 0.8, 0.05,
       0.0, 0.0, 0.0, 0.7;
  return oracle::linear_trajectory(A, Eigen::Vector4d(1.0, -0.5, 0.25, 2.0), 60, 0.05);
}

}  // namespace

TEST(Cli, HelpAndUsage) {
  EXPECT_EQ(run({"--help"}), 0);
  EXPECT_EQ(run({"fit", "--help"}), 0);
  EXPECT_EQ(run({"no-such-command"}), 1);
  EXPECT_EQ(run({"fit", "--train", "x.json"}), 1);  // missing required options
}

TEST(Cli, FitPredictReproducesLinearData) {
  TempDir tmp;
  const fs::path manifest = write_set(tmp / "train", {geometric_trajectory()});
  const fs::path csv = tmp / "train" / "traj_0.csv";
  ASSERT_EQ(run({"fit", "--train", manifest.string(), "--d", "1", "--center", "off", "--model",
                 (tmp / "model.json").string()}),
            0);
  ASSERT_EQ(run({"predict", "--model", (tmp / "model.json").string(), "--init", csv.string(), "--out",
                 (tmp / "pred.csv").string(), "--reference", csv.string(), "--metrics",
                 (tmp / "metrics.json").string()}),
            0);
  const auto metrics = nlohmann::json::parse(read_file(tmp / "metrics.json"));
  EXPECT_LT(metrics.at("rrmse").get<double>(), 1e-8);
  EXPECT_EQ(metrics.at("d").get<int>(), 1);
  EXPECT_EQ(metrics.at("r").get<int>(), 4);
  EXPECT_EQ(metrics.at("steps").get<int>(), 60);

  const Trajectory predicted = read_trajectory_csv(tmp / "pred.csv");
  const Trajectory reference = read_trajectory_csv(csv);
  EXPECT_EQ(predicted.samples(), 60);
  EXPECT_LT((predicted.values() - reference.values()).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Cli, PredictSingleStep) {
  TempDir tmp;
  const fs::path manifest = write_set(tmp / "train", {geometric_trajectory()});
  const fs::path csv = tmp / "train" / "traj_0.csv";
  ASSERT_EQ(run({"fit", "--train", manifest.string(), "--d", "3", "--center", "off", "--model",
                 (tmp / "model.json").string()}),
            0);
  ASSERT_EQ(run({"predict", "--model", (tmp / "model.json").string(), "--init", csv.string(), "--steps", "1",
                 "--out", (tmp / "pred.csv").string()}),
            0);
  EXPECT_EQ(read_csv_rows(tmp / "pred.csv").size(), 2u);  // header + one sample
}

TEST(Cli, ExitCodes) {
  TempDir tmp;
  const fs::path manifest = write_set(tmp / "train", {geometric_trajectory()});
  const std::string model = (tmp / "model.json").string();

  // data errors
  EXPECT_EQ(run({"fit", "--train", (tmp / "missing.json").string(), "--d", "1", "--model", model}), 2);
  EXPECT_EQ(run({"fit", "--train", manifest.string(), "--d", "100", "--model", model}), 2);
  EXPECT_EQ(run({"fit", "--train", manifest.string(), "--d", "1", "--model", (tmp / "nodir" / "m.json").string()}),
            2);
  write_file_atomic(tmp / "broken.json", "{ not json");
  EXPECT_EQ(run({"simulate", "--network", (tmp / "broken.json").string(), "--fault-bus", "1", "--out",
                 (tmp / "x.csv").string()}),
            2);

  // usage errors
  EXPECT_EQ(run({"fit", "--train", manifest.string(), "--d", "1", "--center", "maybe", "--model", model}), 1);
  EXPECT_EQ(run({"fit", "--train", manifest.string(), "--d", "1", "--rank", "2", "--rank-tol", "1e-6", "--model",
                 model}),
            1);
  EXPECT_EQ(run({"sweep-d", "--train", manifest.string(), "--test", manifest.string(), "--d", "4:2", "--out",
                 (tmp / "s.csv").string()}),
            1);
  EXPECT_EQ(run({"fft", "--traj", (tmp / "train" / "traj_0.csv").string(), "--channel", "omega_1", "--window",
                 "box", "--out", (tmp / "f.csv").string()}),
            1);

  // numerical failure: nothing to decompose
  const fs::path zeros =
      write_set(tmp / "zeros", {oracle::scalar_trajectory(Eigen::VectorXd::Zero(20), 0.1)});
  EXPECT_EQ(run({"fit", "--train", zeros.string(), "--d", "1", "--center", "off", "--model", model}), 3);

  EXPECT_FALSE(fs::exists(model));
  EXPECT_FALSE(fs::exists(tmp / "s.csv"));
  EXPECT_FALSE(fs::exists(tmp / "f.csv"));
  EXPECT_FALSE(fs::exists(tmp / "x.csv"));
}

TEST(Cli, FailedPredictLeavesNoOutputs) {
  TempDir tmp;
  const fs::path manifest = write_set(tmp / "train", {geometric_trajectory()});
  const std::string csv = (tmp / "train" / "traj_0.csv").string();
  ASSERT_EQ(run({"fit", "--train", manifest.string(), "--d", "2", "--center", "off", "--no-phi", "--model",
                 (tmp / "slim.json").string()}),
            0);
  // a model without Phi cannot forecast
  EXPECT_EQ(run({"predict", "--model", (tmp / "slim.json").string(), "--init", csv, "--out",
                 (tmp / "pred.csv").string()}),
            2);
  EXPECT_FALSE(fs::exists(tmp / "pred.csv"));

  ASSERT_EQ(run({"fit", "--train", manifest.string(), "--d", "2", "--center", "off", "--model",
                 (tmp / "model.json").string()}),
            0);
  // reference too short for the requested horizon
  EXPECT_EQ(run({"predict", "--model", (tmp / "model.json").string(), "--init", csv, "--steps", "500", "--out",
                 (tmp / "pred.csv").string(), "--reference", csv, "--metrics", (tmp / "metrics.json").string()}),
            2);
  EXPECT_FALSE(fs::exists(tmp / "pred.csv"));
  EXPECT_FALSE(fs::exists(tmp / "metrics.json"));
  EXPECT_EQ(run({"predict", "--model", (tmp / "model.json").string(), "--init", csv, "--out",
                 (tmp / "pred.csv").string(), "--metrics", (tmp / "metrics.json").string()}),
            1);
  EXPECT_FALSE(fs::exists(tmp / "pred.csv"));
}

TEST(Cli, ScenarioPipelineIsDeterministicAndReadOnly) {
  TempDir tmp;
  const std::vector<std::string> scenarios{"scenarios", "--network", kNetwork.string(), "--horizon", "4",
                                           "--buses", "1,3,5", "--out", (tmp / "runs").string()};
  ASSERT_EQ(run(scenarios), 0);
  const fs::path manifest = tmp / "runs" / "manifest.json";
  const Manifest m = read_manifest(manifest);
  ASSERT_EQ(m.trajectories.size(), 3u);
  EXPECT_EQ(m.trajectories[1], fs::path("fault_bus_3.csv"));
  ASSERT_TRUE(m.fault_time.has_value());
  EXPECT_DOUBLE_EQ(*m.fault_time, 1.0);

  const auto inputs = snapshot(tmp / "runs");
  const std::string network_before = read_file(kNetwork);
  const std::vector<std::string> fit_args{"fit", "--train", manifest.string(), "--d", "4", "--from", "1.1",
                                          "--model", (tmp / "m1.json").string()};
  ASSERT_EQ(run(fit_args), 0);
  std::vector<std::string> again = fit_args;
  again.back() = (tmp / "m2.json").string();
  ASSERT_EQ(run(again), 0);
  EXPECT_EQ(read_file(tmp / "m1.json"), read_file(tmp / "m2.json"));

  ASSERT_EQ(run(scenarios), 0);  // rerun overwrites with identical bytes
  EXPECT_EQ(snapshot(tmp / "runs"), inputs);
  EXPECT_EQ(read_file(kNetwork), network_before);

  const std::string csv = (tmp / "runs" / "fault_bus_3.csv").string();
  ASSERT_EQ(run({"predict", "--model", (tmp / "m1.json").string(), "--init", csv, "--from", "1.1", "--out",
                 (tmp / "pred.csv").string(), "--reference", csv, "--metrics", (tmp / "metrics.json").string()}),
            0);
  const auto metrics = nlohmann::json::parse(read_file(tmp / "metrics.json"));
  EXPECT_LT(metrics.at("rrmse").get<double>(), 0.05);
  EXPECT_EQ(snapshot(tmp / "runs"), inputs);

  ASSERT_EQ(run({"modes", "--model", (tmp / "m1.json").string(), "--top", "5", "--out",
                 (tmp / "modes.csv").string()}),
            0);
  const auto rows = read_csv_rows(tmp / "modes.csv");
  ASSERT_GE(rows.size(), 2u);
  EXPECT_LE(rows.size(), 6u);
  EXPECT_EQ(rows[0][0], "mode_index");
  EXPECT_EQ(rows[0].back(), "buses");
}

TEST(Cli, SweepOrderImprovesOnMultiTone) {
  TempDir tmp;
  const double dt = 0.01;
  const std::vector<oracle::Tone> tones{{0.3, 0.05}, {1.0, 0.1}, {2.2, 0.2}};
  const fs::path manifest =
      write_set(tmp / "tones", {oracle::scalar_trajectory(oracle::damped_tones(tones, dt, 1000), dt)});
  ASSERT_EQ(run({"sweep-d", "--train", manifest.string(), "--test", manifest.string(), "--d", "1:8", "--center",
                 "off", "--out", (tmp / "sweep.csv").string()}),
            0);
  const auto rows = read_csv_rows(tmp / "sweep.csv");
  ASSERT_EQ(rows.size(), 9u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"d", "r", "rrmse_train", "rrmse_test", "fit_seconds"}));
  const double first = parse_number(rows[1][2]);
  const double last = parse_number(rows[8][2]);
  EXPECT_EQ(rows[8][0], "8");
  EXPECT_GT(first, 0.5);
  EXPECT_LT(last, 1e-6);
  EXPECT_LT(last, first);
}

TEST(Cli, NoiseMatchesRequestedSnr) {
  TempDir tmp;
  ASSERT_EQ(run({"scenarios", "--network", kNetwork.string(), "--out", (tmp / "clean").string()}), 0);
  ASSERT_EQ(run({"noise", "--in", (tmp / "clean" / "manifest.json").string(), "--snr-db", "10", "--seed", "3",
                 "--out", (tmp / "noisy").string()}),
            0);
  const TrajectorySet clean = load_trajectory_set(tmp / "clean" / "manifest.json");
  const TrajectorySet noisy = load_trajectory_set(tmp / "noisy" / "manifest.json");
  ASSERT_GE(clean.total_samples() * static_cast<Eigen::Index>(clean.schema().channel_count()), 10000);
  const double measured = rrmse(clean, noisy, compute_steady_state_auto(clean));
  EXPECT_NEAR(measured, std::pow(10.0, -0.5), 0.05 * std::pow(10.0, -0.5));
  EXPECT_EQ(read_manifest(tmp / "noisy" / "manifest.json").fault_time, 1.0);
}

TEST(Cli, FftWritesSpectrum) {
  TempDir tmp;
  const double dt = 0.01;
  const fs::path manifest =
      write_set(tmp / "tone", {oracle::scalar_trajectory(oracle::damped_tones({{2.0, 0.0}}, dt, 1000), dt)});
  ASSERT_EQ(run({"fft", "--traj", (tmp / "tone" / "traj_0.csv").string(), "--channel", "omega_1", "--out",
                 (tmp / "spec.csv").string()}),
            0);
  const auto rows = read_csv_rows(tmp / "spec.csv");
  ASSERT_EQ(rows.size(), 502u);  // header + 501 one-sided bins
  EXPECT_EQ(rows[0], (std::vector<std::string>{"freq_hz", "magnitude"}));
  std::size_t best = 1;
  for (std::size_t i = 1; i < rows.size(); ++i)
    if (parse_number(rows[i][1]) > parse_number(rows[best][1])) best = i;
  EXPECT_NEAR(parse_number(rows[best][0]), 2.0, 0.1);
  EXPECT_EQ(run({"fft", "--traj", (tmp / "tone" / "traj_0.csv").string(), "--channel", "omega_9", "--out",
                 (tmp / "bad.csv").string()}),
            2);
}
