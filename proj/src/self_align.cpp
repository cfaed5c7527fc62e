#include "normkit/self_align.hpp"

#include "normkit/errors.hpp"
#include "normkit/io_util.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace normkit {

using nlohmann::json;

ProjectionModel ProjectionModel::identity(std::size_t dim) {
  return {Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(dim),
                                    static_cast<Eigen::Index>(dim))};
}

ProjectionModel ProjectionModel::random(std::size_t d_out, std::size_t d_in, double noise,
                                        std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  ProjectionModel m{Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(d_out),
                                              static_cast<Eigen::Index>(d_in))};
  for (Eigen::Index i = 0; i < m.W.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.W.cols(); ++j) m.W(i, j) += noise * normal(rng);
  }
  return m;
}

Eigen::MatrixXd ProjectionModel::project(const Batch& batch) const {
  Eigen::MatrixXd Z(static_cast<Eigen::Index>(batch.size()), W.rows());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (batch[i].x.size() != W.cols()) {
      throw InvalidInput("input dimension " + std::to_string(batch[i].x.size()) +
                         " does not match projection width " + std::to_string(W.cols()));
    }
    Z.row(static_cast<Eigen::Index>(i)) = (W * batch[i].x).transpose();
  }
  return Z;
}

bool constraint_predicate(double d_ap, double d_an, double lambda) { return d_ap < d_an + lambda; }

bool closer_negative_predicate(double d_ap, double d_an, double lambda) {
  return d_an < d_ap + lambda;
}

namespace {

// Unit-normalized projections and their norms.
std::pair<Eigen::MatrixXd, Eigen::VectorXd> unit_rows(const Batch& batch,
                                                      const ProjectionModel& model) {
  Eigen::MatrixXd Z = model.project(batch);
  Eigen::VectorXd norms = Z.rowwise().norm();
  for (Eigen::Index i = 0; i < Z.rows(); ++i) {
    if (!(norms(i) > 0.0) || !std::isfinite(norms(i))) {
      throw InvalidInput("projection of batch item " + std::to_string(i) +
                         " is a zero or non-finite vector");
    }
    Z.row(i) /= norms(i);
  }
  return {std::move(Z), std::move(norms)};
}

// log(1 + sum exp(z)) without overflow.
double log1p_sum_exp(const std::vector<double>& z) {
  double m = 0.0;
  for (double v : z) m = std::max(m, v);
  double s = std::exp(-m);
  for (double v : z) s += std::exp(v - m);
  return m + std::log(s);
}

struct AnchorSets {
  std::vector<std::vector<std::size_t>> pos;
  std::vector<std::vector<std::size_t>> neg;
};

AnchorSets per_anchor(const MinedPairs& pairs, std::size_t m) {
  AnchorSets sets{std::vector<std::vector<std::size_t>>(m),
                  std::vector<std::vector<std::size_t>>(m)};
  auto fill = [m](const std::set<IndexPair>& from, std::vector<std::vector<std::size_t>>& to) {
    for (const auto& [a, b] : from) {
      if (a >= m || b >= m) throw InvalidInput("pair index out of range");
      to[a].push_back(b);
    }
  };
  fill(pairs.positives, sets.pos);
  fill(pairs.negatives, sets.neg);
  return sets;
}

}  // namespace

Eigen::MatrixXd similarity_matrix(const Batch& batch, const ProjectionModel& model) {
  if (batch.empty()) throw InvalidInput("similarity matrix of an empty batch");
  const auto [U, norms] = unit_rows(batch, model);
  Eigen::MatrixXd S = U * U.transpose();
  S.diagonal().setOnes();
  return S.cwiseMax(-1.0).cwiseMin(1.0);
}

MinedPairs mine_hard_pairs(const Batch& batch, const ProjectionModel& model,
                           const MiningParams& params, const TripletPredicate& keep) {
  MinedPairs out;
  if (batch.empty()) return out;
  const Eigen::MatrixXd Z = model.project(batch);
  const std::size_t m = batch.size();
  Eigen::MatrixXd D(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      D(i, j) = (Z.row(i) - Z.row(j)).squaredNorm();
    }
  }
  for (std::size_t a = 0; a < m; ++a) {
    for (std::size_t p = 0; p < m; ++p) {
      if (p == a || batch[p].label != batch[a].label) continue;
      for (std::size_t n = 0; n < m; ++n) {
        if (batch[n].label == batch[a].label) continue;
        if (keep(D(a, p), D(a, n), params.lambda)) {
          out.positives.emplace(a, p);
          out.negatives.emplace(a, n);
        }
      }
    }
  }
  return out;
}

double ms_loss(const Eigen::MatrixXd& S, const MinedPairs& pairs, const MSLossParams& params) {
  const std::size_t m = static_cast<std::size_t>(S.rows());
  if (m == 0) return 0.0;
  const auto sets = per_anchor(pairs, m);
  double total = 0.0;
  std::vector<double> z;
  for (std::size_t i = 0; i < m; ++i) {
    if (!sets.neg[i].empty()) {
      z.clear();
      for (auto n : sets.neg[i]) z.push_back(params.alpha * (S(i, n) - params.epsilon));
      total += log1p_sum_exp(z) / params.alpha;
    }
    if (!sets.pos[i].empty()) {
      z.clear();
      for (auto p : sets.pos[i]) z.push_back(-params.beta * (S(i, p) - params.epsilon));
      total += log1p_sum_exp(z) / params.beta;
    }
  }
  return total / static_cast<double>(m);
}

Eigen::MatrixXd ms_loss_gradient(const Batch& batch, const ProjectionModel& model,
                                 const MinedPairs& pairs, const MSLossParams& params) {
  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(model.W.rows(), model.W.cols());
  if (batch.empty() || (pairs.positives.empty() && pairs.negatives.empty())) return grad;
  const std::size_t m = batch.size();
  const auto [U, norms] = unit_rows(batch, model);
  const Eigen::MatrixXd S = U * U.transpose();
  const auto sets = per_anchor(pairs, m);

  // dL/dS for every pair, then chain through the cosine.
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m),
                                            static_cast<Eigen::Index>(m));
  std::vector<double> z;
  const double inv_m = 1.0 / static_cast<double>(m);
  for (std::size_t i = 0; i < m; ++i) {
    if (!sets.neg[i].empty()) {
      z.clear();
      for (auto n : sets.neg[i]) z.push_back(params.alpha * (S(i, n) - params.epsilon));
      const double lse = log1p_sum_exp(z);
      for (std::size_t k = 0; k < z.size(); ++k) G(i, sets.neg[i][k]) += inv_m * std::exp(z[k] - lse);
    }
    if (!sets.pos[i].empty()) {
      z.clear();
      for (auto p : sets.pos[i]) z.push_back(-params.beta * (S(i, p) - params.epsilon));
      const double lse = log1p_sum_exp(z);
      for (std::size_t k = 0; k < z.size(); ++k) G(i, sets.pos[i][k]) -= inv_m * std::exp(z[k] - lse);
    }
  }

  Eigen::MatrixXd gz = Eigen::MatrixXd::Zero(U.rows(), U.cols());
  for (Eigen::Index i = 0; i < G.rows(); ++i) {
    for (Eigen::Index j = 0; j < G.cols(); ++j) {
      const double g = G(i, j);
      if (g == 0.0) continue;
      if (i == j) continue;  // S_ii is constant
      gz.row(i) += g * (U.row(j) - S(i, j) * U.row(i)) / norms(i);
      gz.row(j) += g * (U.row(i) - S(i, j) * U.row(j)) / norms(j);
    }
  }
  for (std::size_t i = 0; i < m; ++i) {
    grad += gz.row(static_cast<Eigen::Index>(i)).transpose() * batch[i].x.transpose();
  }
  return grad;
}

double triplet_term(const Eigen::VectorXd& a, const Eigen::VectorXd& p, const Eigen::VectorXd& n,
                    double lambda) {
  if (a.size() != p.size() || a.size() != n.size()) {
    throw InvalidInput("triplet vectors differ in dimension");
  }
  return (a - p).squaredNorm() - (a - n).squaredNorm() + lambda;
}

double triplet_loss(const Eigen::VectorXd& a, const Eigen::VectorXd& p, const Eigen::VectorXd& n,
                    double lambda) {
  return std::max(triplet_term(a, p, n, lambda), 0.0);
}

TrainConfig parse_train_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw DataError(std::string("training config: ") + e.what());
  }
  if (!j.is_object()) throw DataError("training config must be a JSON object");
  TrainConfig c;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "alpha") c.loss.alpha = value.get<double>();
      else if (key == "beta") c.loss.beta = value.get<double>();
      else if (key == "epsilon") c.loss.epsilon = value.get<double>();
      else if (key == "lambda") c.mining.lambda = value.get<double>();
      else if (key == "rate") c.rate = value.get<double>();
      else if (key == "epochs") c.epochs = value.get<std::size_t>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else throw DataError("training config: unknown key '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("training config: ") + e.what());
  }
  if (!(c.loss.alpha > 0.0) || !(c.loss.beta > 0.0) || !std::isfinite(c.loss.alpha) ||
      !std::isfinite(c.loss.beta)) {
    throw DataError("training config: alpha and beta must be positive");
  }
  if (!std::isfinite(c.loss.epsilon) || !std::isfinite(c.rate) || !(c.mining.lambda >= 0.0) ||
      !std::isfinite(c.mining.lambda)) {
    throw DataError("training config: epsilon, rate and lambda must be finite, lambda >= 0");
  }
  return c;
}

TrainConfig load_train_config(const std::string& path) {
  return parse_train_config(io::read_file(path));
}

TrainResult train(const std::vector<Batch>& batches, ProjectionModel model,
                  const TrainConfig& config, const TripletPredicate& keep) {
  if (batches.empty()) throw InvalidInput("training needs at least one batch");
  TrainResult result;
  result.loss_trace.reserve(config.epochs);
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    double sum = 0.0;
    for (const auto& batch : batches) {
      const MinedPairs pairs = mine_hard_pairs(batch, model, config.mining, keep);
      const double loss = ms_loss(similarity_matrix(batch, model), pairs, config.loss);
      if (!std::isfinite(loss)) {
        throw DataError("training diverged: non-finite loss in epoch " + std::to_string(epoch));
      }
      sum += loss;
      if (config.rate != 0.0) {
        model.W -= config.rate * ms_loss_gradient(batch, model, pairs, config.loss);
        if (!model.W.allFinite()) {
          throw DataError("training diverged: non-finite weights in epoch " +
                          std::to_string(epoch));
        }
      }
    }
    result.loss_trace.push_back(sum / static_cast<double>(batches.size()));
  }
  result.model = std::move(model);
  return result;
}

void save_loss_trace(const std::vector<double>& trace, const std::string& path) {
  std::ostringstream out;
  out.precision(17);
  out << "epoch,loss\n";
  for (std::size_t i = 0; i < trace.size(); ++i) out << (i + 1) << ',' << trace[i] << '\n';
  io::write_atomic(path, out.str());
}

void save_projection(const ProjectionModel& model, const std::string& path) {
  json values = json::array();
  for (Eigen::Index i = 0; i < model.W.rows(); ++i) {
    for (Eigen::Index j = 0; j < model.W.cols(); ++j) values.push_back(model.W(i, j));
  }
  const json j{{"d_out", model.W.rows()}, {"d_in", model.W.cols()}, {"W", std::move(values)}};
  io::write_atomic(path, j.dump() + "\n");
}

ProjectionModel load_projection(const std::string& path) {
  try {
    const json j = json::parse(io::read_file(path));
    const auto rows = j.at("d_out").get<Eigen::Index>();
    const auto cols = j.at("d_in").get<Eigen::Index>();
    const auto& values = j.at("W");
    if (rows <= 0 || cols <= 0 || values.size() != static_cast<std::size_t>(rows * cols)) {
      throw DataError(path + ": projection shape does not match its values");
    }
    ProjectionModel m{Eigen::MatrixXd(rows, cols)};
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index k = 0; k < cols; ++k) {
        m.W(i, k) = values[static_cast<std::size_t>(i * cols + k)].get<double>();
      }
    }
    if (!m.W.allFinite()) throw DataError(path + ": non-finite projection entry");
    return m;
  } catch (const json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
}

std::pair<double, double> label_cosine_means(const Batch& batch, const ProjectionModel& model) {
  const Eigen::MatrixXd S = similarity_matrix(batch, model);
  double intra = 0.0, inter = 0.0;
  std::size_t n_intra = 0, n_inter = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    for (std::size_t j = i + 1; j < batch.size(); ++j) {
      if (batch[i].label == batch[j].label) {
        intra += S(i, j);
        ++n_intra;
      } else {
        inter += S(i, j);
        ++n_inter;
      }
    }
  }
  return {n_intra ? intra / static_cast<double>(n_intra) : 0.0,
          n_inter ? inter / static_cast<double>(n_inter) : 0.0};
}

}  // namespace normkit
