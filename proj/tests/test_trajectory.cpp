#include "hodmd/error.hpp"
#include "hodmd/io_util.hpp"
#include "hodmd/trajectory.hpp"
#include "oracles.hpp"
#include "temp_dir.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

using namespace hodmd;

namespace {

Trajectory constant_trajectory(double value, Eigen::Index samples, std::optional<double> fault = std::nullopt) {
  return Trajectory(ChannelSchema({1, 2}), 0.01, 0.0, Eigen::MatrixXd::Constant(4, samples, value), fault);
}

}  // namespace

TEST(ChannelSchema, InterleavesOmegaAndDeltaInAscendingBusOrder) {
  const ChannelSchema schema({7, 3});
  EXPECT_EQ(schema.buses(), (std::vector<int>{3, 7}));
  EXPECT_EQ(schema.channel_count(), 4u);
  EXPECT_EQ(schema.channel_name(0), "omega_3");
  EXPECT_EQ(schema.channel_name(1), "delta_3");
  EXPECT_EQ(schema.channel_name(2), "omega_7");
  EXPECT_EQ(schema.channel_index("delta_7"), 3u);
  EXPECT_FALSE(schema.channel_index("omega_4").has_value());
  EXPECT_FALSE(schema.channel_index("bogus").has_value());
}

TEST(ChannelSchema, RejectsDuplicateBuses) { EXPECT_THROW(ChannelSchema({1, 1}), DataError); }

TEST(Trajectory, ValidatesShape) {
  EXPECT_THROW(Trajectory(ChannelSchema({1}), 0.01, 0.0, Eigen::MatrixXd::Zero(2, 1)), DataError);
  EXPECT_THROW(Trajectory(ChannelSchema({1}), 0.01, 0.0, Eigen::MatrixXd::Zero(3, 5)), DataError);
  EXPECT_THROW(Trajectory(ChannelSchema({1}), 0.0, 0.0, Eigen::MatrixXd::Zero(2, 5)), DataError);
  Eigen::MatrixXd bad = Eigen::MatrixXd::Zero(2, 5);
  bad(1, 3) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(Trajectory(ChannelSchema({1}), 0.01, 0.0, bad), DataError);
}

TEST(Trajectory, SliceFromKeepsLaterSamples) {
  Eigen::MatrixXd v(2, 5);
  v << 0, 1, 2, 3, 4, 5, 6, 7, 8, 9;
  const Trajectory t(ChannelSchema({1}), 0.5, 1.0, v, 1.2);
  const Trajectory s = t.slice_from(2.0);
  EXPECT_EQ(s.samples(), 3);
  EXPECT_DOUBLE_EQ(s.t0(), 2.0);
  EXPECT_EQ(s.values()(0, 0), 2.0);
  EXPECT_EQ(s.fault_time(), 1.2);
}

TEST(TrajectorySet, RejectsMixedSchemaAndSampling) {
  const Trajectory a = constant_trajectory(1.0, 5);
  const Trajectory b(ChannelSchema({1, 3}), 0.01, 0.0, Eigen::MatrixXd::Zero(4, 5));
  const Trajectory c(ChannelSchema({1, 2}), 0.02, 0.0, Eigen::MatrixXd::Zero(4, 5));
  EXPECT_THROW(TrajectorySet({a, b}), DataError);
  EXPECT_THROW(TrajectorySet({a, c}), DataError);
  EXPECT_THROW(TrajectorySet({}), DataError);
  const TrajectorySet ok({a, constant_trajectory(2.0, 7)});
  EXPECT_EQ(ok.total_samples(), 12);
  EXPECT_EQ(ok.min_samples(), 5);
}

TEST(SteadyState, ConstantSignalUnderEveryPolicy) {
  const TrajectorySet set({constant_trajectory(0.7, 200, 1.0)});
  for (auto policy : {SteadyStatePolicy::pre_fault_mean, SteadyStatePolicy::final_window_mean}) {
    const SteadyState s = compute_steady_state(set, policy);
    EXPECT_EQ(s.source, policy);
    for (Eigen::Index c = 0; c < 4; ++c) EXPECT_DOUBLE_EQ(s.values(c), 0.7);
  }
  const Eigen::VectorXd given = Eigen::VectorXd::Constant(4, 0.7);
  EXPECT_EQ(compute_steady_state(set, SteadyStatePolicy::explicit_value, given).values, given);
}

TEST(SteadyState, PreFaultMeanAveragesSamplesBeforeFault) {
  Eigen::MatrixXd v = Eigen::MatrixXd::Constant(2, 4, 5.0);
  v(0, 0) = 0.9;
  v(0, 1) = 1.1;
  v(1, 0) = 0.2;
  v(1, 1) = 0.4;
  const TrajectorySet set({Trajectory(ChannelSchema({1}), 0.01, 0.0, v, 0.015)});
  const SteadyState s = compute_steady_state(set, SteadyStatePolicy::pre_fault_mean);
  EXPECT_DOUBLE_EQ(s.values(0), 1.0);
  EXPECT_DOUBLE_EQ(s.values(1), 0.3);
}

TEST(SteadyState, PreFaultMeanOfEquilibriumIsExact) {
  Eigen::MatrixXd v(2, 300);
  v.row(0).setConstant(1.0);
  v.row(1).setConstant(0.123456789012345);
  v.rightCols(150).setRandom();
  const TrajectorySet set({Trajectory(ChannelSchema({4}), 0.01, 0.0, v, 1.0)});
  const SteadyState s = compute_steady_state(set, SteadyStatePolicy::pre_fault_mean);
  EXPECT_EQ(s.values(0), 1.0);
  EXPECT_EQ(s.values(1), 0.123456789012345);
}

TEST(SteadyState, Errors) {
  const TrajectorySet no_fault({constant_trajectory(1.0, 20)});
  EXPECT_THROW(compute_steady_state(no_fault, SteadyStatePolicy::pre_fault_mean), DataError);
  const TrajectorySet early({constant_trajectory(1.0, 20, 0.01)});
  EXPECT_THROW(compute_steady_state(early, SteadyStatePolicy::pre_fault_mean), DataError);
  EXPECT_THROW(compute_steady_state(no_fault, SteadyStatePolicy::explicit_value, Eigen::VectorXd::Zero(3)), DataError);
  EXPECT_THROW(compute_steady_state(no_fault, SteadyStatePolicy::explicit_value), DataError);
  EXPECT_EQ(compute_steady_state_auto(no_fault).source, SteadyStatePolicy::final_window_mean);
  EXPECT_EQ(compute_steady_state_auto(TrajectorySet({constant_trajectory(1.0, 20, 0.1)})).source,
            SteadyStatePolicy::pre_fault_mean);
}

TEST(SteadyState, FinalWindowUsesLastTenPercent) {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(20);
  x(18) = 2.0;
  x(19) = 4.0;
  const SteadyState s =
      compute_steady_state(TrajectorySet({oracle::scalar_trajectory(x, 0.1)}), SteadyStatePolicy::final_window_mean);
  EXPECT_DOUBLE_EQ(s.values(0), 3.0);
}

namespace {

TrajectorySet oscillating_set(Eigen::Index samples_each, int count) {
  std::vector<Trajectory> out;
  for (int q = 0; q < count; ++q) {
    const Eigen::VectorXd x =
        oracle::damped_tones({{0.7 + 0.1 * q, 0.05, 1.0}, {1.9, 0.02, 0.3, 1.0}}, 0.01, samples_each);
    Eigen::MatrixXd v(4, samples_each);
    v.row(0) = (1.0 + 0.01 * x.array()).matrix().transpose();
    v.row(1) = x.transpose();
    v.row(2) = (1.0 - 0.02 * x.array()).matrix().transpose();
    v.row(3) = (0.5 + x.array().square()).matrix().transpose();
    out.emplace_back(ChannelSchema({1, 2}), 0.01, 0.0, std::move(v));
  }
  return TrajectorySet(std::move(out));
}

double noise_rrmse(const TrajectorySet& clean, const TrajectorySet& noisy, const SteadyState& s) {
  double num = 0.0, den = 0.0;
  for (std::size_t q = 0; q < clean.size(); ++q) {
    num += (noisy[q].values() - clean[q].values()).squaredNorm();
    den += (clean[q].values().colwise() - s.values).squaredNorm();
  }
  return std::sqrt(num / den);
}

}  // namespace

TEST(InjectNoise, MatchesSnrDefinition) {
  const TrajectorySet clean = oscillating_set(4000, 3);
  const SteadyState s = compute_steady_state(clean, SteadyStatePolicy::final_window_mean);
  for (double snr : {20.0, 10.0, 30.0}) {
    const double expected = std::pow(10.0, -snr / 20.0);
    EXPECT_NEAR(noise_rrmse(clean, inject_noise(clean, snr, s, 11), s), expected, 0.05 * expected) << snr;
  }
}

TEST(InjectNoise, ReproducibleUnderSeedAndNoOpAtInfinity) {
  const TrajectorySet clean = oscillating_set(500, 2);
  const SteadyState s = compute_steady_state(clean, SteadyStatePolicy::final_window_mean);
  const TrajectorySet a = inject_noise(clean, 15.0, s, 42);
  const TrajectorySet b = inject_noise(clean, 15.0, s, 42);
  const TrajectorySet c = inject_noise(clean, 15.0, s, 43);
  EXPECT_EQ(a[1].values(), b[1].values());
  EXPECT_NE(a[1].values(), c[1].values());
  EXPECT_EQ(inject_noise(clean, std::numeric_limits<double>::infinity(), s, 1)[0].values(), clean[0].values());
  EXPECT_THROW(inject_noise(clean, std::numeric_limits<double>::quiet_NaN(), s, 1), DataError);
}

TEST(Csv, RoundTripIsBitIdentical) {
  TempDir dir;
  Eigen::MatrixXd v = oracle::random_matrix(4, 50, 3);
  v(0, 0) = 1.0 / 3.0;
  v(3, 7) = -1e-300;
  const Trajectory t(ChannelSchema({2, 5}), 0.01, 0.25, v);
  write_trajectory_csv(dir / "t.csv", t);
  const Trajectory back = read_trajectory_csv(dir / "t.csv");
  EXPECT_EQ(back.schema(), t.schema());
  EXPECT_EQ(back.values(), t.values());
  EXPECT_NEAR(back.dt(), 0.01, 1e-15);
  EXPECT_EQ(back.t0(), 0.25);
}

TEST(Csv, NormalisesColumnOrder) {
  TempDir dir;
  write_file_atomic(dir / "t.csv", "t,delta_2,omega_1,omega_2,delta_1\n0,1,2,3,4\n0.5,5,6,7,8\n");
  const Trajectory t = read_trajectory_csv(dir / "t.csv");
  EXPECT_EQ(t.values().col(0), (Eigen::Vector4d(2, 4, 3, 1)));
  EXPECT_DOUBLE_EQ(t.dt(), 0.5);
}

TEST(Csv, RejectsMalformedInput) {
  TempDir dir;
  auto reject = [&](const std::string& content) {
    write_file_atomic(dir / "bad.csv", content);
    EXPECT_THROW(read_trajectory_csv(dir / "bad.csv"), DataError) << content;
  };
  reject("");
  reject("time,omega_1,delta_1\n0,1,0\n0.01,1,0\n");
  reject("t,omega_1\n0,1\n0.01,1\n");
  reject("t,omega_1,delta_1\n");
  reject("t,omega_1,delta_1\n0,1,0\n");
  reject("t,omega_1,delta_1\n0,nan,0\n0.01,1,0\n");
  reject("t,omega_1,delta_1\n0,inf,0\n0.01,1,0\n");
  reject("t,omega_1,delta_1\n0,1,0\n0.01,1\n");
  reject("t,omega_1,delta_1\n0,1,0\n0.01,1,0\n0.03,1,0\n");
  reject("t,omega_1,delta_1,omega_1\n0,1,0,1\n0.01,1,0,1\n");
  EXPECT_THROW(read_trajectory_csv(dir / "missing.csv"), DataError);
}

TEST(Manifest, MinimalSet) {
  TempDir dir;
  write_file_atomic(dir / "a.csv", "t,omega_1,delta_1\n0,1,0\n0.01,1.001,0.002\n");
  write_file_atomic(dir / "m.json", R"({"dt_tolerance": 1e-9, "fault_time": null, "trajectories": ["a.csv"]})");
  const TrajectorySet set = load_trajectory_set(dir / "m.json");
  EXPECT_EQ(set.size(), 1u);
  EXPECT_EQ(set.schema().bus_count(), 1u);
  EXPECT_NEAR(set.dt(), 0.01, 1e-15);
  EXPECT_EQ(set.total_samples(), 2);
}

TEST(Manifest, MixedSamplingIsRejected) {
  TempDir dir;
  write_file_atomic(dir / "a.csv", "t,omega_1,delta_1\n0,1,0\n0.01,1,0\n0.02,1,0\n");
  write_file_atomic(dir / "b.csv", "t,omega_1,delta_1\n0,1,0\n0.02,1,0\n0.04,1,0\n");
  write_file_atomic(dir / "m.json", R"({"trajectories": ["a.csv", "b.csv"]})");
  EXPECT_THROW(load_trajectory_set(dir / "m.json"), DataError);
}

TEST(Manifest, FaultTimeAndRoundTrip) {
  TempDir dir;
  Manifest m;
  m.fault_time = 1.0;
  m.trajectories = {"x.csv", "sub/y.csv"};
  write_file_atomic(dir / "m.json", manifest_json(m));
  const Manifest back = read_manifest(dir / "m.json");
  EXPECT_EQ(back.fault_time, 1.0);
  EXPECT_EQ(back.trajectories, m.trajectories);
  EXPECT_THROW(read_manifest(dir / "none.json"), DataError);
  write_file_atomic(dir / "bad.json", "{");
  EXPECT_THROW(read_manifest(dir / "bad.json"), DataError);
  write_file_atomic(dir / "empty.json", R"({"trajectories": []})");
  EXPECT_THROW(read_manifest(dir / "empty.json"), DataError);
}

TEST(IoUtil, NumberFormatting) {
  EXPECT_EQ(parse_number(format_number(0.1)), 0.1);
  EXPECT_EQ(parse_number(" +2.5e-3\r"), 2.5e-3);
  EXPECT_THROW(parse_number("1.0x"), DataError);
  EXPECT_THROW(parse_number(""), DataError);
  EXPECT_THROW(parse_number("NaN"), DataError);
}
