#include "fulsim/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>

namespace fulsim::model {

std::string_view to_string(Family f) { return f == Family::logistic ? "logistic" : "mlp"; }

Family family_from_string(std::string_view s) {
  if (s == "logistic") return Family::logistic;
  if (s == "mlp") return Family::mlp;
  throw Error("model: unknown family '" + std::string(s) + "'");
}

std::size_t ModelSpec::param_count() const {
  if (family == Family::logistic) return num_classes * input_dim + num_classes;
  return hidden * input_dim + hidden + num_classes * hidden + num_classes;
}

std::string ModelSpec::shape_tag() const {
  std::string tag = std::string(to_string(family)) + ":d" + std::to_string(input_dim);
  if (family == Family::mlp) tag += ":h" + std::to_string(hidden);
  return tag + ":c" + std::to_string(num_classes);
}

Bytes serialize(const ParamVector& params) {
  Encoder e;
  e.u64(params.values.size());
  for (double v : params.values) e.f64(v);
  return std::move(e).take();
}

ParamVector deserialize(ByteView bytes, std::string shape_tag) {
  auto read_u64 = [&](std::size_t offset) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[offset + i]) << (8 * i);
    return v;
  };
  if (bytes.size() < 8) throw Error("model: truncated parameter blob");
  const std::uint64_t n = read_u64(0);
  if (bytes.size() != 8 + 8 * n) throw Error("model: parameter blob length mismatch");
  ParamVector out{std::vector<double>(n), std::move(shape_tag)};
  for (std::size_t i = 0; i < n; ++i) out.values[i] = std::bit_cast<double>(read_u64(8 + 8 * i));
  return out;
}

double l2_norm(std::span<const double> v) {
  double sum = 0.0;
  for (double x : v) sum += x * x;
  return std::sqrt(sum);
}

namespace {

void require_same_shape(const ParamVector& a, const ParamVector& b) {
  if (a.values.size() != b.values.size() || a.shape_tag != b.shape_tag) {
    throw Error("model: parameter shape mismatch (" + a.shape_tag + " vs " + b.shape_tag + ")");
  }
}

void require_spec(const ModelSpec& spec, const ParamVector& params) {
  if (params.values.size() != spec.param_count()) {
    throw Error("model: parameter vector has " + std::to_string(params.values.size()) +
                " entries, family " + spec.shape_tag() + " needs " +
                std::to_string(spec.param_count()));
  }
}

void require_data(const ModelSpec& spec, const Dataset& data) {
  if (data.dim != spec.input_dim) throw Error("model: feature dimension mismatch");
  if (data.num_classes > spec.num_classes) throw Error("model: dataset has more classes than model");
}

// Softmax cross-entropy on one sample. Writes dLoss/dlogits into dz.
double softmax_xent(std::span<const double> z, int label, std::span<double> dz) {
  const double zmax = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (std::size_t k = 0; k < z.size(); ++k) {
    dz[k] = std::exp(z[k] - zmax);
    sum += dz[k];
  }
  for (auto& v : dz) v /= sum;
  const double loss = -(z[label] - zmax - std::log(sum));
  dz[label] -= 1.0;
  return loss;
}

struct MlpView {
  std::size_t d, h, c;
  const double* w1;
  const double* b1;
  const double* w2;
  const double* b2;

  MlpView(const ModelSpec& spec, const std::vector<double>& p)
      : d(spec.input_dim), h(spec.hidden), c(spec.num_classes) {
    w1 = p.data();
    b1 = w1 + h * d;
    w2 = b1 + h;
    b2 = w2 + c * h;
  }
};

}  // namespace

ParamVector add(const ParamVector& a, const ParamVector& b) {
  require_same_shape(a, b);
  ParamVector out = a;
  for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] += b.values[i];
  return out;
}

ParamVector subtract(const ParamVector& a, const ParamVector& b) {
  require_same_shape(a, b);
  ParamVector out = a;
  for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] -= b.values[i];
  return out;
}

ParamVector scale(const ParamVector& a, double factor) {
  ParamVector out = a;
  for (auto& v : out.values) v *= factor;
  return out;
}

Dataset Dataset::with_labels(const std::set<int>& labels) const {
  Dataset out{{}, num_classes, dim};
  for (const auto& s : samples) {
    if (labels.contains(s.label)) out.samples.push_back(s);
  }
  return out;
}

Dataset Dataset::without_labels(const std::set<int>& labels) const {
  Dataset out{{}, num_classes, dim};
  for (const auto& s : samples) {
    if (!labels.contains(s.label)) out.samples.push_back(s);
  }
  return out;
}

Dataset make_blobs(const BlobConfig& config) {
  if (config.num_classes == 0 || config.dim == 0) throw Error("model: blobs need classes and dimensions");
  std::mt19937_64 center_rng(config.center_seed);
  std::normal_distribution<double> center_dist(0.0, config.center_scale);
  std::vector<std::vector<double>> centers(config.num_classes, std::vector<double>(config.dim));
  for (auto& c : centers) {
    for (auto& v : c) v = center_dist(center_rng);
  }

  std::mt19937_64 rng(config.sample_seed);
  std::normal_distribution<double> noise(0.0, config.spread);
  Dataset out{{}, config.num_classes, config.dim};
  out.samples.reserve(config.num_classes * config.per_class);
  for (std::size_t i = 0; i < config.per_class; ++i) {
    for (std::size_t k = 0; k < config.num_classes; ++k) {
      Sample s{std::vector<double>(config.dim), static_cast<int>(k)};
      for (std::size_t j = 0; j < config.dim; ++j) s.features[j] = centers[k][j] + noise(rng);
      out.samples.push_back(std::move(s));
    }
  }
  return out;
}

ParamVector init_params(const ModelSpec& spec, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const double fan_in = static_cast<double>(spec.input_dim);
  std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(fan_in));
  ParamVector out{std::vector<double>(spec.param_count(), 0.0), spec.shape_tag()};
  if (spec.family == Family::logistic) {
    for (std::size_t i = 0; i < spec.num_classes * spec.input_dim; ++i) out.values[i] = 0.1 * dist(rng);
    return out;
  }
  const std::size_t w1 = spec.hidden * spec.input_dim;
  const std::size_t w2_start = w1 + spec.hidden;
  std::normal_distribution<double> dist2(0.0, 1.0 / std::sqrt(static_cast<double>(spec.hidden)));
  for (std::size_t i = 0; i < w1; ++i) out.values[i] = dist(rng);
  for (std::size_t i = 0; i < spec.num_classes * spec.hidden; ++i) out.values[w2_start + i] = dist2(rng);
  return out;
}

std::vector<double> logits(const ModelSpec& spec, const ParamVector& params,
                           std::span<const double> x) {
  require_spec(spec, params);
  if (x.size() != spec.input_dim) throw Error("model: feature dimension mismatch");
  const auto& p = params.values;
  const std::size_t d = spec.input_dim, c = spec.num_classes;
  std::vector<double> z(c);
  if (spec.family == Family::logistic) {
    for (std::size_t k = 0; k < c; ++k) {
      double acc = p[c * d + k];
      for (std::size_t j = 0; j < d; ++j) acc += p[k * d + j] * x[j];
      z[k] = acc;
    }
    return z;
  }
  MlpView m(spec, p);
  std::vector<double> a(m.h);
  for (std::size_t u = 0; u < m.h; ++u) {
    double acc = m.b1[u];
    for (std::size_t j = 0; j < d; ++j) acc += m.w1[u * d + j] * x[j];
    a[u] = std::tanh(acc);
  }
  for (std::size_t k = 0; k < c; ++k) {
    double acc = m.b2[k];
    for (std::size_t u = 0; u < m.h; ++u) acc += m.w2[k * m.h + u] * a[u];
    z[k] = acc;
  }
  return z;
}

int predict(const ModelSpec& spec, const ParamVector& params, std::span<const double> x) {
  auto z = logits(spec, params, x);
  return static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
}

LossAndGradient loss_and_gradient(const ModelSpec& spec, const ParamVector& params,
                                  std::span<const Sample> samples) {
  require_spec(spec, params);
  if (samples.empty()) throw Error("model: loss over an empty batch");
  const auto& p = params.values;
  const std::size_t d = spec.input_dim, c = spec.num_classes;
  LossAndGradient out{0.0, std::vector<double>(p.size(), 0.0)};
  auto& g = out.gradient;
  std::vector<double> dz(c);

  if (spec.family == Family::logistic) {
    for (const auto& s : samples) {
      if (s.features.size() != d) throw Error("model: feature dimension mismatch");
      auto z = logits(spec, params, s.features);
      out.loss += softmax_xent(z, s.label, dz);
      for (std::size_t k = 0; k < c; ++k) {
        for (std::size_t j = 0; j < d; ++j) g[k * d + j] += dz[k] * s.features[j];
        g[c * d + k] += dz[k];
      }
    }
  } else {
    MlpView m(spec, p);
    const std::size_t b1_off = m.h * d, w2_off = b1_off + m.h, b2_off = w2_off + c * m.h;
    std::vector<double> a(m.h), da(m.h), z(c);
    for (const auto& s : samples) {
      if (s.features.size() != d) throw Error("model: feature dimension mismatch");
      for (std::size_t u = 0; u < m.h; ++u) {
        double acc = m.b1[u];
        for (std::size_t j = 0; j < d; ++j) acc += m.w1[u * d + j] * s.features[j];
        a[u] = std::tanh(acc);
      }
      for (std::size_t k = 0; k < c; ++k) {
        double acc = m.b2[k];
        for (std::size_t u = 0; u < m.h; ++u) acc += m.w2[k * m.h + u] * a[u];
        z[k] = acc;
      }
      out.loss += softmax_xent(z, s.label, dz);
      std::fill(da.begin(), da.end(), 0.0);
      for (std::size_t k = 0; k < c; ++k) {
        for (std::size_t u = 0; u < m.h; ++u) {
          g[w2_off + k * m.h + u] += dz[k] * a[u];
          da[u] += dz[k] * m.w2[k * m.h + u];
        }
        g[b2_off + k] += dz[k];
      }
      for (std::size_t u = 0; u < m.h; ++u) {
        const double dpre = da[u] * (1.0 - a[u] * a[u]);
        for (std::size_t j = 0; j < d; ++j) g[u * d + j] += dpre * s.features[j];
        g[b1_off + u] += dpre;
      }
    }
  }
  const double inv = 1.0 / static_cast<double>(samples.size());
  out.loss *= inv;
  for (auto& v : g) v *= inv;
  return out;
}

double evaluate(const ModelSpec& spec, const ParamVector& params, const Dataset& data) {
  if (data.empty()) throw Error("model: cannot evaluate on an empty dataset");
  require_data(spec, data);
  std::size_t correct = 0;
  for (const auto& s : data.samples) {
    if (predict(spec, params, s.features) == s.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

namespace {

// Seeded mini-batch loop shared by descent and ascent. direction = -1 descends.
ParamVector run_sgd(const ModelSpec& spec, const ParamVector& start, const TrainSettings& settings,
                    const Dataset& data, double direction, double max_abs_param) {
  require_spec(spec, start);
  if (settings.learning_rate <= 0.0) throw Error("model: learning rate must be positive");
  if (settings.batch_size == 0) throw Error("model: batch size must be positive");
  ParamVector params = start;
  if (settings.epochs == 0) return params;
  if (data.empty()) throw Error("model: cannot train on an empty dataset");
  require_data(spec, data);

  std::mt19937_64 rng(settings.rng_seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<Sample> batch;
  for (std::size_t epoch = 0; epoch < settings.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t begin = 0; begin < order.size(); begin += settings.batch_size) {
      const std::size_t end = std::min(order.size(), begin + settings.batch_size);
      batch.clear();
      for (std::size_t i = begin; i < end; ++i) batch.push_back(data.samples[order[i]]);
      auto lg = loss_and_gradient(spec, params, batch);
      if (!std::isfinite(lg.loss)) {
        throw DivergenceError("model: non-finite loss at epoch " + std::to_string(epoch));
      }
      for (std::size_t i = 0; i < params.values.size(); ++i) {
        params.values[i] += direction * settings.learning_rate * lg.gradient[i];
        if (!std::isfinite(params.values[i]) || std::abs(params.values[i]) > max_abs_param) {
          throw DivergenceError("model: parameter " + std::to_string(i) + " left the bound " +
                                std::to_string(max_abs_param) + " at epoch " + std::to_string(epoch));
        }
      }
    }
  }
  return params;
}

}  // namespace

ParamVector train(const ModelSpec& spec, const ParamVector& start, const TrainSettings& settings,
                  const Dataset& data) {
  return run_sgd(spec, start, settings, data, -1.0, std::numeric_limits<double>::infinity());
}

AscentResult sga_unlearn(const ModelSpec& spec, const ParamVector& params, const Dataset& forget,
                         const TrainSettings& settings, double max_abs_param) {
  if (forget.empty()) throw Error("model: forget set is empty");
  ParamVector delta = subtract(run_sgd(spec, params, settings, forget, +1.0, max_abs_param), params);
  // Re-derived from the delta so that params + delta reproduces it bit for bit.
  ParamVector updated = add(params, delta);
  return {std::move(updated), std::move(delta)};
}

ParamVector pre_aggregate(std::span<const WeightedParent> parents) {
  if (parents.empty()) throw Error("model: pre-aggregation needs at least one parent");
  ParamVector out{std::vector<double>(parents.front().params->size(), 0.0),
                  parents.front().params->shape_tag};
  for (const auto& parent : parents) {
    require_same_shape(out, *parent.params);
    if (parent.reference_count == 0) throw Error("model: parent reference count must be positive");
    const double w = 1.0 / static_cast<double>(parent.reference_count);
    for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] += w * parent.params->values[i];
  }
  return out;
}

std::vector<ScoredCandidate> select_candidates(const ModelSpec& spec,
                                               std::span<const Candidate> population,
                                               const Dataset& data, std::size_t sample_size,
                                               std::size_t keep, std::mt19937_64& rng) {
  if (keep > sample_size) throw Error("model: cannot keep more candidates than were sampled");
  if (sample_size > population.size()) throw Error("model: candidate sample exceeds population");

  std::vector<std::size_t> idx(population.size());
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < sample_size; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }

  std::vector<ScoredCandidate> scored;
  scored.reserve(sample_size);
  for (std::size_t i = 0; i < sample_size; ++i) {
    const auto& c = population[idx[i]];
    scored.push_back({c.id, evaluate(spec, *c.params, data)});
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    return a.accuracy != b.accuracy ? a.accuracy > b.accuracy : a.id < b.id;
  });
  scored.resize(keep);
  return scored;
}

}  // namespace fulsim::model
