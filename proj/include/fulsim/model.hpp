#pragma once

// Small trainable classifiers (multinomial logistic regression and a
// one-hidden-layer tanh MLP) with analytic cross-entropy gradients, a seeded
// Gaussian-blob dataset generator, and the per-user training pipeline:
// candidate evaluation, reference-weighted pre-aggregation, local SGD.

#include <cstdint>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "fulsim/common.hpp"

namespace fulsim::model {

enum class Family { logistic, mlp };

std::string_view to_string(Family f);
Family family_from_string(std::string_view s);

struct ModelSpec {
  Family family = Family::logistic;
  std::size_t input_dim = 2;
  std::size_t num_classes = 2;
  std::size_t hidden = 8;  // mlp only

  std::size_t param_count() const;
  std::string shape_tag() const;
  bool operator==(const ModelSpec&) const = default;
};

struct ParamVector {
  std::vector<double> values;
  std::string shape_tag;

  std::size_t size() const { return values.size(); }
  bool operator==(const ParamVector&) const = default;
};

// 8-byte little-endian count followed by little-endian IEEE-754 doubles.
Bytes serialize(const ParamVector& params);
ParamVector deserialize(ByteView bytes, std::string shape_tag);

double l2_norm(std::span<const double> v);
ParamVector add(const ParamVector& a, const ParamVector& b);
ParamVector subtract(const ParamVector& a, const ParamVector& b);
ParamVector scale(const ParamVector& a, double factor);

struct Sample {
  std::vector<double> features;
  int label = 0;
};

struct Dataset {
  std::vector<Sample> samples;
  std::size_t num_classes = 0;
  std::size_t dim = 0;

  bool empty() const { return samples.empty(); }
  std::size_t size() const { return samples.size(); }
  Dataset with_labels(const std::set<int>& labels) const;
  Dataset without_labels(const std::set<int>& labels) const;
};

struct BlobConfig {
  std::size_t num_classes = 3;
  std::size_t dim = 2;
  std::size_t per_class = 50;
  double center_scale = 4.0;
  double spread = 0.6;
  std::uint64_t center_seed = 1;  // shared by every user so classes line up
  std::uint64_t sample_seed = 1;
};

Dataset make_blobs(const BlobConfig& config);

struct TrainSettings {
  double learning_rate = 0.1;
  std::size_t batch_size = 16;
  std::size_t epochs = 10;
  std::uint64_t rng_seed = 0;
};

class DivergenceError : public Error {
 public:
  using Error::Error;
};

ParamVector init_params(const ModelSpec& spec, std::uint64_t seed);

std::vector<double> logits(const ModelSpec& spec, const ParamVector& params,
                           std::span<const double> features);
int predict(const ModelSpec& spec, const ParamVector& params, std::span<const double> features);

struct LossAndGradient {
  double loss = 0.0;
  std::vector<double> gradient;
};

// Mean cross-entropy over the given samples and its gradient.
LossAndGradient loss_and_gradient(const ModelSpec& spec, const ParamVector& params,
                                  std::span<const Sample> samples);

double evaluate(const ModelSpec& spec, const ParamVector& params, const Dataset& data);

ParamVector train(const ModelSpec& spec, const ParamVector& start, const TrainSettings& settings,
                  const Dataset& data);

struct AscentResult {
  ParamVector updated;
  ParamVector delta;  // updated - original
};

AscentResult sga_unlearn(const ModelSpec& spec, const ParamVector& params, const Dataset& forget,
                         const TrainSettings& settings, double max_abs_param = 1e6);

struct WeightedParent {
  const ParamVector* params = nullptr;
  std::size_t reference_count = 1;
};

// Sum over parents of params / reference_count.
ParamVector pre_aggregate(std::span<const WeightedParent> parents);

struct Candidate {
  std::uint64_t id = 0;
  const ParamVector* params = nullptr;
};

struct ScoredCandidate {
  std::uint64_t id = 0;
  double accuracy = 0.0;
  bool operator==(const ScoredCandidate&) const = default;
};

// Samples `sample_size` candidates uniformly without replacement, scores each
// on `data`, and keeps the `keep` most accurate (ties go to the lower id).
std::vector<ScoredCandidate> select_candidates(const ModelSpec& spec,
                                               std::span<const Candidate> population,
                                               const Dataset& data, std::size_t sample_size,
                                               std::size_t keep, std::mt19937_64& rng);

}  // namespace fulsim::model
