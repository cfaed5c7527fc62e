#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace normkit {

struct LabeledVector {
  Eigen::VectorXd x;
  std::string label;
};

using Batch = std::vector<LabeledVector>;

// f(x) = W x, no bias.
struct ProjectionModel {
  Eigen::MatrixXd W;

  static ProjectionModel identity(std::size_t dim);
  // Identity-like start (first min(d_out, d_in) axes) plus N(0, noise^2).
  static ProjectionModel random(std::size_t d_out, std::size_t d_in, double noise,
                                std::uint64_t seed);

  Eigen::VectorXd project(const Eigen::VectorXd& x) const { return W * x; }
  // Row i is f(x_i).
  Eigen::MatrixXd project(const Batch& batch) const;
};

struct MiningParams {
  double lambda = 0.2;
};

struct MSLossParams {
  double alpha = 2.0;
  double beta = 50.0;
  double epsilon = 0.5;
};

// (anchor, other) index pairs.
using IndexPair = std::pair<std::size_t, std::size_t>;

struct MinedPairs {
  std::set<IndexPair> positives;
  std::set<IndexPair> negatives;
};

// Decides whether a triplet is kept, given squared distances.
using TripletPredicate = std::function<bool(double d_ap, double d_an, double lambda)>;

// d_ap < d_an + lambda
bool constraint_predicate(double d_ap, double d_an, double lambda);
// The negative is closer than the positive, up to the margin: d_an < d_ap + lambda.
bool closer_negative_predicate(double d_ap, double d_an, double lambda);

// S[i][j] = cosine(f(x_i), f(x_j)). Throws InvalidInput on a zero projection.
Eigen::MatrixXd similarity_matrix(const Batch& batch, const ProjectionModel& model);

// Every triplet (a, p, n) with label(a) = label(p) != label(n), a != p, that
// satisfies `keep` on squared Euclidean distances of the projections
// contributes (a, p) and (a, n).
MinedPairs mine_hard_pairs(const Batch& batch, const ProjectionModel& model,
                           const MiningParams& params,
                           const TripletPredicate& keep = constraint_predicate);

// Multi-similarity loss over an M x M similarity matrix.
double ms_loss(const Eigen::MatrixXd& S, const MinedPairs& pairs, const MSLossParams& params);

// d ms_loss(similarity_matrix(batch, W)) / dW, pairs held fixed.
Eigen::MatrixXd ms_loss_gradient(const Batch& batch, const ProjectionModel& model,
                                 const MinedPairs& pairs, const MSLossParams& params);

// max(|a-p|^2 - |a-n|^2 + lambda, 0) and the same without the clamp.
double triplet_loss(const Eigen::VectorXd& a, const Eigen::VectorXd& p, const Eigen::VectorXd& n,
                    double lambda);
double triplet_term(const Eigen::VectorXd& a, const Eigen::VectorXd& p, const Eigen::VectorXd& n,
                    double lambda);

struct TrainConfig {
  MiningParams mining;
  MSLossParams loss;
  double rate = 0.1;
  std::size_t epochs = 50;
  std::uint64_t seed = 0;
};

// JSON with keys alpha, beta, epsilon, lambda, rate, epochs, seed; missing keys
// keep their defaults. Throws DataError on unknown keys or invalid values.
TrainConfig load_train_config(const std::string& path);
TrainConfig parse_train_config(const std::string& json_text);

struct TrainResult {
  ProjectionModel model;
  // Mean batch loss of each epoch, evaluated before that batch's step.
  std::vector<double> loss_trace;
};

// Plain gradient descent: per batch, mine with the current model, then step.
// Throws DataError when the loss becomes non-finite.
TrainResult train(const std::vector<Batch>& batches, ProjectionModel model,
                  const TrainConfig& config,
                  const TripletPredicate& keep = constraint_predicate);

// "epoch,loss" with epochs numbered from 1.
void save_loss_trace(const std::vector<double>& trace, const std::string& path);

// JSON {"d_out", "d_in", "W": row-major values}.
void save_projection(const ProjectionModel& model, const std::string& path);
ProjectionModel load_projection(const std::string& path);

// Mean cosine over distinct index pairs with equal / different labels.
std::pair<double, double> label_cosine_means(const Batch& batch, const ProjectionModel& model);

}  // namespace normkit
