#include "hodmd/decomposition.hpp"

#include "hodmd/error.hpp"
#include "hodmd/io_util.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>

namespace hodmd {

void RankSpec::validate() const {
  if (kind == Kind::fixed && rank < 1) throw DataError("fixed rank must be at least 1");
  if (kind == Kind::tolerance && !(tolerance > 0.0 && tolerance < 1.0))
    throw DataError("rank tolerance must lie in (0, 1)");
}

int select_rank(const Eigen::VectorXd& singular_values, const RankSpec& spec) {
  spec.validate();
  if (singular_values.size() == 0) throw DataError("no singular values");
  for (Eigen::Index i = 1; i < singular_values.size(); ++i)
    if (singular_values(i) > singular_values(i - 1)) throw DataError("singular values must be non-increasing");
  const auto count = static_cast<int>(singular_values.size());
  if (spec.kind == RankSpec::Kind::fixed) return std::min(spec.rank, count);
  const double top = singular_values(0);
  int r = 0;
  while (r < count && singular_values(r) / top > spec.tolerance) ++r;
  return r;
}

bool HodmdModel::is_dropped(int m) const {
  return std::find(dropped_modes.begin(), dropped_modes.end(), m) != dropped_modes.end();
}

Eigen::VectorXcd HodmdModel::project(const Eigen::VectorXd& stacked) const {
  if (phi_pinv.size() == 0) throw DataError("model has no stored Phi");
  if (stacked.size() != phi_pinv.cols()) throw DataError("stacked vector length does not match model");
  return phi_pinv * stacked.cast<std::complex<double>>();
}

HodmdModel fit(const EmbeddedPair& pair, const RankSpec& spec) {
  spec.validate();
  if (pair.X.cols() < 1) throw DataError("embedded pair has no columns");
  if (pair.X.rows() != pair.Y.rows() || pair.X.cols() != pair.Y.cols())
    throw DataError("embedded pair shapes differ");

  // 1. truncated SVD of X
  Eigen::BDCSVD<Eigen::MatrixXd> svd(pair.X, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& sigma = svd.singularValues();
  if (!(sigma.size() > 0 && sigma(0) > 0.0)) throw NumericalError("snapshot matrix is identically zero");
  const int r = select_rank(sigma, spec);
  const double floor = std::numeric_limits<double>::epsilon() *
                       static_cast<double>(std::max(pair.X.rows(), pair.X.cols())) * sigma(0);
  if (r < 1 || !(sigma(r - 1) > floor))
    throw NumericalError("rank-deficient singular values after truncation (degenerate data)");
  const Eigen::MatrixXd U = svd.matrixU().leftCols(r);
  const Eigen::MatrixXd V = svd.matrixV().leftCols(r);

  // 2. reduced operator K = U^T Y V Sigma^-1
  const Eigen::MatrixXd K =
      (U.transpose() * pair.Y) * V * sigma.head(r).cwiseInverse().asDiagonal();

  // 3. eigendecomposition
  Eigen::EigenSolver<Eigen::MatrixXd> eig(K, true);
  if (eig.info() != Eigen::Success) throw NumericalError("eigendecomposition of the reduced operator failed");
  const Eigen::VectorXcd raw_lambdas = eig.eigenvalues();
  const Eigen::MatrixXcd raw_vectors = eig.eigenvectors();

  std::vector<int> order(static_cast<std::size_t>(r));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    const double ma = std::abs(raw_lambdas(a));
    const double mb = std::abs(raw_lambdas(b));
    if (ma != mb) return ma > mb;
    return std::arg(raw_lambdas(a)) < std::arg(raw_lambdas(b));
  });

  HodmdModel model;
  model.order = pair.order;
  model.dt = pair.dt;
  model.schema = pair.schema;
  model.rank = r;
  model.center = pair.center;
  model.singular_values = sigma;
  model.basis = U;
  model.lambdas.resize(r);
  Eigen::MatrixXcd W(r, r);
  for (int m = 0; m < r; ++m) {
    model.lambdas(m) = raw_lambdas(order[static_cast<std::size_t>(m)]);
    W.col(m) = raw_vectors.col(order[static_cast<std::size_t>(m)]);
  }

  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(W);
  const double cond_est = lu.rcond();
  if (!(cond_est > 1e-14)) throw NumericalError("eigenvector matrix is singular (defective operator)");

  // 4. stacked eigenvectors and their left inverse restricted to span(U)
  model.phi = U.cast<std::complex<double>>() * W;
  model.phi_pinv = lu.solve(U.transpose().cast<std::complex<double>>());

  const Eigen::Index n = model.state_size();
  model.spatial_modes = Eigen::MatrixXcd::Zero(n, r);
  model.mode_norms.resize(r);
  for (int m = 0; m < r; ++m) {
    const double norm = model.phi.col(m).head(n).norm();
    model.mode_norms(m) = norm;
    if (norm < 1e-12) {
      model.dropped_modes.push_back(m);
      continue;
    }
    model.spatial_modes.col(m) = model.phi.col(m).head(n) / norm;
  }

  const auto q = static_cast<Eigen::Index>(pair.firsts.size());
  model.amplitudes.resize(q, r);
  for (Eigen::Index i = 0; i < q; ++i) {
    const Eigen::VectorXcd b = model.project(pair.firsts[static_cast<std::size_t>(i)]);
    model.amplitudes.row(i) = (model.mode_norms.array() * b.array().abs()).transpose();
  }
  return model;
}

// ---- JSON ----------------------------------------------------------------

namespace {

using Json = nlohmann::ordered_json;

Json complex_json(std::complex<double> z) { return Json::array({z.real(), z.imag()}); }

std::complex<double> complex_from(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 2) throw DataError("complex numbers must be [re, im] pairs");
  return {j[0].get<double>(), j[1].get<double>()};
}

Json complex_matrix_json(const Eigen::MatrixXcd& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(complex_json(m(i, j)));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXcd complex_matrix_from(const nlohmann::json& j, Eigen::Index rows, Eigen::Index cols) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows) throw DataError("matrix row count mismatch");
  Eigen::MatrixXcd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) throw DataError("matrix column count mismatch");
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = complex_from(row[static_cast<std::size_t>(c)]);
  }
  return m;
}

Json vector_json(const Eigen::VectorXd& v) { return Json(std::vector<double>(v.data(), v.data() + v.size())); }

Eigen::VectorXd vector_from(const nlohmann::json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

const char* policy_name(SteadyStatePolicy p) {
  switch (p) {
    case SteadyStatePolicy::pre_fault_mean: return "pre_fault_mean";
    case SteadyStatePolicy::final_window_mean: return "final_window_mean";
    case SteadyStatePolicy::explicit_value: return "explicit";
  }
  return "explicit";
}

SteadyStatePolicy policy_from(const std::string& s) {
  if (s == "pre_fault_mean") return SteadyStatePolicy::pre_fault_mean;
  if (s == "final_window_mean") return SteadyStatePolicy::final_window_mean;
  return SteadyStatePolicy::explicit_value;
}

}  // namespace

std::string model_json(const HodmdModel& model, bool store_phi) {
  Json doc;
  doc["d"] = model.order;
  doc["dt"] = model.dt;
  doc["r"] = model.rank;
  doc["schema"] = model.schema.buses();
  Json lambdas = Json::array();
  for (Eigen::Index m = 0; m < model.lambdas.size(); ++m) lambdas.push_back(complex_json(model.lambdas(m)));
  doc["lambdas"] = std::move(lambdas);
  doc["spatial_modes"] = complex_matrix_json(model.spatial_modes);
  doc["mode_norms"] = vector_json(model.mode_norms);
  doc["dropped_modes"] = model.dropped_modes;
  if (model.center) {
    doc["center"] = vector_json(model.center->values);
    doc["center_source"] = policy_name(model.center->source);
  } else {
    doc["center"] = nullptr;
  }
  Json amplitudes = Json::array();
  for (Eigen::Index q = 0; q < model.amplitudes.rows(); ++q)
    amplitudes.push_back(vector_json(model.amplitudes.row(q).transpose()));
  doc["amplitudes"] = std::move(amplitudes);
  doc["singular_values"] = vector_json(model.singular_values);
  if (store_phi && model.has_phi()) doc["Phi"] = complex_matrix_json(model.phi);
  return doc.dump(1) + "\n";
}

HodmdModel parse_model_json(const std::string& text) {
  HodmdModel model;
  try {
    const auto doc = nlohmann::json::parse(text);
    model.order = doc.at("d").get<int>();
    model.dt = doc.at("dt").get<double>();
    model.rank = doc.at("r").get<int>();
    model.schema = ChannelSchema(doc.at("schema").get<std::vector<int>>());
    if (model.order < 1 || model.rank < 1 || !(model.dt > 0.0)) throw DataError("model header out of range");
    const auto& lambdas = doc.at("lambdas");
    if (static_cast<int>(lambdas.size()) != model.rank) throw DataError("lambdas length differs from r");
    model.lambdas.resize(model.rank);
    for (int m = 0; m < model.rank; ++m) model.lambdas(m) = complex_from(lambdas[static_cast<std::size_t>(m)]);
    const Eigen::Index n = model.state_size();
    model.spatial_modes = complex_matrix_from(doc.at("spatial_modes"), n, model.rank);
    model.mode_norms = vector_from(doc.at("mode_norms"));
    if (model.mode_norms.size() != model.rank) throw DataError("mode_norms length differs from r");
    if (doc.contains("dropped_modes")) model.dropped_modes = doc.at("dropped_modes").get<std::vector<int>>();
    if (doc.contains("center") && !doc.at("center").is_null()) {
      SteadyState center{vector_from(doc.at("center")), policy_from(doc.value("center_source", "explicit"))};
      if (center.values.size() != n) throw DataError("center length does not match schema");
      model.center = std::move(center);
    }
    const auto& amplitudes = doc.at("amplitudes");
    model.amplitudes.resize(static_cast<Eigen::Index>(amplitudes.size()), model.rank);
    for (std::size_t q = 0; q < amplitudes.size(); ++q) {
      const Eigen::VectorXd row = vector_from(amplitudes[q]);
      if (row.size() != model.rank) throw DataError("amplitude row length differs from r");
      model.amplitudes.row(static_cast<Eigen::Index>(q)) = row.transpose();
    }
    if (doc.contains("singular_values")) model.singular_values = vector_from(doc.at("singular_values"));
    if (doc.contains("Phi")) {
      model.phi = complex_matrix_from(doc.at("Phi"), n * model.order, model.rank);
      Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXcd> cod(model.phi);
      if (cod.rank() < model.rank) throw DataError("stored Phi is rank deficient");
      model.phi_pinv = cod.pseudoInverse();
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed model JSON: ") + e.what());
  }
  return model;
}

HodmdModel read_model_json(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw DataError("missing file: " + path.string());
  try {
    return parse_model_json(read_file(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace hodmd
