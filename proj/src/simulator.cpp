#include "hodmd/simulator.hpp"

#include "hodmd/error.hpp"
#include "hodmd/io_util.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

namespace hodmd {

std::size_t SwingNetwork::index_of(int bus_id) const {
  for (std::size_t i = 0; i < bus_ids.size(); ++i)
    if (bus_ids[i] == bus_id) return i;
  throw DataError("bus " + std::to_string(bus_id) + " is not a generator bus");
}

Eigen::VectorXd SwingNetwork::balanced_power() const {
  return mechanical_power.array() - mechanical_power.mean();
}

bool SwingNetwork::is_connected() const {
  const auto n = static_cast<Eigen::Index>(size());
  std::vector<bool> seen(size(), false);
  std::vector<Eigen::Index> stack{0};
  seen[0] = true;
  while (!stack.empty()) {
    const auto i = stack.back();
    stack.pop_back();
    for (Eigen::Index j = 0; j < n; ++j)
      if (coupling(i, j) > 0.0 && !seen[static_cast<std::size_t>(j)]) {
        seen[static_cast<std::size_t>(j)] = true;
        stack.push_back(j);
      }
  }
  return std::all_of(seen.begin(), seen.end(), [](bool s) { return s; });
}

void SwingNetwork::validate() const {
  const auto n = static_cast<Eigen::Index>(size());
  if (n == 0) throw DataError("network has no generators");
  if (inertia.size() != n || damping.size() != n || mechanical_power.size() != n || coupling.rows() != n ||
      coupling.cols() != n)
    throw DataError("network parameter sizes do not match the generator count");
  ChannelSchema check(bus_ids);  // rejects duplicate ids
  (void)check;
  if (!(omega0 > 0.0)) throw DataError("omega0 must be positive");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(inertia(i) > 0.0)) throw DataError("inertia must be positive");
    if (!(damping(i) >= 0.0)) throw DataError("damping must be non-negative");
    if (!std::isfinite(mechanical_power(i))) throw DataError("mechanical power must be finite");
    if (coupling(i, i) != 0.0) throw DataError("coupling matrix must have a zero diagonal");
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!(coupling(i, j) >= 0.0)) throw DataError("coupling coefficients must be non-negative");
      if (coupling(i, j) != coupling(j, i)) throw DataError("coupling matrix must be symmetric");
    }
  }
}

namespace {

Eigen::VectorXd electrical_power(const Eigen::MatrixXd& coupling, const Eigen::VectorXd& delta) {
  const auto n = delta.size();
  Eigen::VectorXd pe = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (coupling(i, j) != 0.0) pe(i) += coupling(i, j) * std::sin(delta(i) - delta(j));
  return pe;
}

// The network as seen while `fault` is active.
struct FaultedNetwork {
  Eigen::VectorXd power;
  Eigen::MatrixXd coupling;
};

FaultedNetwork apply_fault(const SwingNetwork& net, const Eigen::VectorXd& power, const FaultSpec& fault) {
  FaultedNetwork out{power, net.coupling};
  const auto b = static_cast<Eigen::Index>(net.index_of(fault.bus));
  if (fault.mode == FaultMode::power_sink) {
    out.power(b) -= fault.magnitude;
  } else {
    out.coupling.row(b) *= fault.magnitude;
    out.coupling.col(b) *= fault.magnitude;
  }
  return out;
}

SwingState derivative(const SwingNetwork& net, const Eigen::VectorXd& power, const Eigen::MatrixXd& coupling,
                      const SwingState& x) {
  const Eigen::VectorXd slip = x.omega.array() - 1.0;
  SwingState dx;
  dx.delta = net.omega0 * slip;
  dx.omega = ((power - electrical_power(coupling, x.delta)).array() - net.damping.array() * slip.array()) /
             net.inertia.array();
  return dx;
}

SwingState axpy(const SwingState& x, double h, const SwingState& k) {
  return {x.delta + h * k.delta, x.omega + h * k.omega};
}

}  // namespace

SwingState swing_derivative(const SwingNetwork& net, const SwingState& x, const FaultSpec* active_fault) {
  const Eigen::VectorXd power = net.balanced_power();
  if (active_fault) {
    const auto faulted = apply_fault(net, power, *active_fault);
    return derivative(net, faulted.power, faulted.coupling, x);
  }
  return derivative(net, power, net.coupling, x);
}

double swing_energy(const SwingNetwork& net, const SwingState& x) {
  const auto n = static_cast<Eigen::Index>(net.size());
  const Eigen::VectorXd power = net.balanced_power();
  double energy = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double slip = x.omega(i) - 1.0;
    energy += 0.5 * net.inertia(i) * net.omega0 * slip * slip - power(i) * x.delta(i);
    for (Eigen::Index j = i + 1; j < n; ++j) energy -= net.coupling(i, j) * std::cos(x.delta(i) - x.delta(j));
  }
  return energy;
}

SwingState solve_equilibrium(const SwingNetwork& net) {
  net.validate();
  const auto n = static_cast<Eigen::Index>(net.size());
  const Eigen::VectorXd power = net.balanced_power();
  Eigen::VectorXd delta = Eigen::VectorXd::Zero(n);
  auto residual = [&](const Eigen::VectorXd& d) -> Eigen::VectorXd {
    return power - electrical_power(net.coupling, d);
  };

  Eigen::VectorXd f = residual(delta);
  for (int iter = 0; iter < 100; ++iter) {
    if (f.lpNorm<Eigen::Infinity>() < 1e-12) return {delta, Eigen::VectorXd::Ones(n)};
    // Reduced system: unknowns delta_2..delta_n, equations 2..n (they sum to
    // minus equation 1 because sin is odd).
    const Eigen::Index m = n - 1;
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(m, m);
    for (Eigen::Index i = 1; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == i) continue;
        const double c = net.coupling(i, j) * std::cos(delta(i) - delta(j));
        jac(i - 1, i - 1) -= c;
        if (j > 0) jac(i - 1, j - 1) += c;
      }
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(jac);
    if (!lu.isInvertible()) throw NumericalError("equilibrium: singular Jacobian (infeasible or disconnected network)");
    const Eigen::VectorXd step = lu.solve(-f.tail(m));

    double scale = 1.0;
    Eigen::VectorXd trial = delta;
    Eigen::VectorXd f_trial;
    for (int k = 0; k < 30; ++k, scale *= 0.5) {
      trial.tail(m) = delta.tail(m) + scale * step;
      f_trial = residual(trial);
      if (f_trial.norm() < f.norm()) break;
    }
    delta = trial;
    f = f_trial;
  }
  if (f.lpNorm<Eigen::Infinity>() < 1e-10) return {delta, Eigen::VectorXd::Ones(n)};
  throw NumericalError("equilibrium: Newton iteration did not converge (over-stressed network)");
}

Trajectory simulate(const SwingNetwork& net, const FaultSpec& fault, const SimConfig& config) {
  net.validate();
  const auto n = static_cast<Eigen::Index>(net.size());
  if (!(config.dt_int > 0.0) || !(config.dt_out > 0.0) || !(config.horizon > 0.0))
    throw DataError("time steps and horizon must be positive");
  const double ratio = config.dt_out / config.dt_int;
  const auto steps_per_sample = static_cast<long>(std::llround(ratio));
  if (steps_per_sample < 1 || std::abs(ratio - static_cast<double>(steps_per_sample)) > 1e-9 * ratio)
    throw DataError("dt_out must be an integer multiple of dt_int");
  if (!(fault.t_start > 0.0) || !(fault.duration > 0.0)) throw DataError("fault start and duration must be positive");
  if (fault.t_start + fault.duration > config.horizon) throw DataError("fault window must lie inside the horizon");
  if (fault.mode == FaultMode::coupling_drop && !(fault.magnitude >= 0.0 && fault.magnitude < 1.0))
    throw DataError("coupling-drop factor must lie in [0, 1)");
  (void)net.index_of(fault.bus);

  const Eigen::VectorXd power = net.balanced_power();
  const auto faulted = apply_fault(net, power, fault);
  SwingState x = config.initial ? *config.initial : solve_equilibrium(net);
  if (x.delta.size() != n || x.omega.size() != n) throw DataError("initial state size does not match network");

  const long fault_on = std::lround(fault.t_start / config.dt_int);
  const long fault_off = std::lround((fault.t_start + fault.duration) / config.dt_int);
  const long samples_total = static_cast<long>(std::floor(config.horizon / config.dt_out + 1e-9)) + 1;
  const long first_sample = std::max(0L, static_cast<long>(std::ceil(config.record_from / config.dt_out - 1e-9)));
  if (samples_total - first_sample < 2) throw DataError("recording window holds fewer than two samples");

  const auto schema = net.schema();
  std::vector<Eigen::Index> slot(net.size());
  for (std::size_t i = 0; i < net.size(); ++i)
    slot[i] = static_cast<Eigen::Index>(*schema.bus_position(net.bus_ids[i]));
  Eigen::MatrixXd values(2 * n, samples_total - first_sample);
  auto record = [&](long sample) {
    if (sample < first_sample) return;
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto pos = slot[static_cast<std::size_t>(i)];
      values(2 * pos, sample - first_sample) = x.omega(i);
      values(2 * pos + 1, sample - first_sample) = x.delta(i);
    }
  };
  record(0);

  const double h = config.dt_int;
  const long last_step = (samples_total - 1) * steps_per_sample;
  for (long step = 0; step < last_step; ++step) {
    const bool active = step >= fault_on && step < fault_off;
    const auto& p = active ? faulted.power : power;
    const auto& b = active ? faulted.coupling : net.coupling;
    const auto k1 = derivative(net, p, b, x);
    const auto k2 = derivative(net, p, b, axpy(x, h / 2, k1));
    const auto k3 = derivative(net, p, b, axpy(x, h / 2, k2));
    const auto k4 = derivative(net, p, b, axpy(x, h, k3));
    x.delta += h / 6.0 * (k1.delta + 2.0 * k2.delta + 2.0 * k3.delta + k4.delta);
    x.omega += h / 6.0 * (k1.omega + 2.0 * k2.omega + 2.0 * k3.omega + k4.omega);
    if (!x.omega.allFinite() || (x.omega.array() - 1.0).abs().maxCoeff() > 0.5)
      throw NumericalError("instability: rotor speed deviation exceeds 0.5 p.u. at t = " +
                           format_number(static_cast<double>(step + 1) * h));
    if ((step + 1) % steps_per_sample == 0) record((step + 1) / steps_per_sample);
  }
  return Trajectory(schema, config.dt_out, static_cast<double>(first_sample) * config.dt_out,
                    std::move(values), fault.t_start);
}

ScenarioBatch generate_scenarios(const SwingNetwork& net, std::span<const FaultSpec> faults,
                                 const SimConfig& config) {
  if (faults.empty()) throw DataError("no scenarios requested");
  std::vector<Trajectory> trajectories;
  std::vector<SkippedScenario> skipped;
  for (const auto& fault : faults) {
    try {
      trajectories.push_back(simulate(net, fault, config));
    } catch (const NumericalError& e) {
      skipped.push_back({fault, e.what()});
    }
  }
  if (trajectories.empty()) throw NumericalError("every scenario was unstable");
  return {TrajectorySet(std::move(trajectories)), std::move(skipped)};
}

ScenarioBatch generate_scenarios(const SwingNetwork& net, std::span<const int> buses, const SimConfig& config,
                                 const FaultSpec& fault_template) {
  std::vector<FaultSpec> faults;
  for (int bus : buses) {
    FaultSpec f = fault_template;
    f.bus = bus;
    faults.push_back(f);
  }
  return generate_scenarios(net, std::span<const FaultSpec>(faults), config);
}

SwingNetwork parse_network_json(const std::string& text) {
  SwingNetwork net;
  try {
    const auto doc = nlohmann::json::parse(text);
    net.omega0 = doc.value("omega0", 2.0 * std::numbers::pi * 50.0);
    const auto& gens = doc.at("generators");
    const auto n = static_cast<Eigen::Index>(gens.size());
    net.inertia.resize(n);
    net.damping.resize(n);
    net.mechanical_power.resize(n);
    net.coupling = Eigen::MatrixXd::Zero(n, n);
    std::map<int, Eigen::Index> index;
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& g = gens[static_cast<std::size_t>(i)];
      const int bus = g.at("bus").get<int>();
      if (!index.emplace(bus, i).second) throw DataError("duplicate generator bus " + std::to_string(bus));
      net.bus_ids.push_back(bus);
      net.inertia(i) = g.at("J").get<double>();
      net.damping(i) = g.at("D").get<double>();
      net.mechanical_power(i) = g.at("Pm").get<double>();
    }
    for (const auto& c : doc.value("couplings", nlohmann::json::array())) {
      const int a = c.at("i").get<int>();
      const int b = c.at("j").get<int>();
      if (!index.contains(a) || !index.contains(b)) throw DataError("coupling references an unknown bus");
      if (a == b) throw DataError("self-coupling is not allowed");
      net.coupling(index[a], index[b]) += c.at("B").get<double>();
      net.coupling(index[b], index[a]) = net.coupling(index[a], index[b]);
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed network JSON: ") + e.what());
  }
  net.validate();
  return net;
}

SwingNetwork read_network_json(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw DataError("missing file: " + path.string());
  try {
    return parse_network_json(read_file(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::string network_json(const SwingNetwork& net) {
  nlohmann::ordered_json doc;
  doc["omega0"] = net.omega0;
  doc["generators"] = nlohmann::ordered_json::array();
  const auto n = static_cast<Eigen::Index>(net.size());
  for (Eigen::Index i = 0; i < n; ++i)
    doc["generators"].push_back({{"bus", net.bus_ids[static_cast<std::size_t>(i)]},
                                 {"J", net.inertia(i)},
                                 {"D", net.damping(i)},
                                 {"Pm", net.mechanical_power(i)}});
  doc["couplings"] = nlohmann::ordered_json::array();
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j)
      if (net.coupling(i, j) != 0.0)
        doc["couplings"].push_back({{"i", net.bus_ids[static_cast<std::size_t>(i)]},
                                    {"j", net.bus_ids[static_cast<std::size_t>(j)]},
                                    {"B", net.coupling(i, j)}});
  return doc.dump(2) + "\n";
}

}  // namespace hodmd
