#include <algorithm>
#include <random>

#include "../support/model_oracle.hpp"
#include "doctest.h"
#include "fulsim/model.hpp"

using namespace fulsim;
using namespace fulsim::model;

namespace {

ModelSpec logistic3() { return {Family::logistic, 2, 3, 0}; }

Dataset blobs(std::uint64_t sample_seed, std::size_t per_class = 40) {
  BlobConfig cfg;
  cfg.per_class = per_class;
  cfg.sample_seed = sample_seed;
  cfg.center_seed = 11;
  return make_blobs(cfg);
}

}  // namespace

TEST_CASE("parameter counts and shape tags") {
  CHECK(logistic3().param_count() == 3 * 2 + 3);
  ModelSpec mlp{Family::mlp, 4, 3, 5};
  CHECK(mlp.param_count() == 5 * 4 + 5 + 3 * 5 + 3);
  CHECK(logistic3().shape_tag() != mlp.shape_tag());
  CHECK(family_from_string("mlp") == Family::mlp);
  CHECK_THROWS_AS(family_from_string("cnn"), Error);
}

TEST_CASE("serialize round trip and length checks") {
  auto p = init_params(logistic3(), 3);
  auto bytes = serialize(p);
  CHECK(bytes.size() == 8 + 8 * p.size());
  CHECK(deserialize(bytes, p.shape_tag) == p);
  bytes.pop_back();
  CHECK_THROWS_AS(deserialize(bytes, p.shape_tag), Error);
}

TEST_CASE("vector arithmetic") {
  ParamVector a{{1, 2}, "t"}, b{{3, -1}, "t"}, c{{1}, "t"};
  CHECK(add(a, b).values == std::vector<double>{4, 1});
  CHECK(subtract(a, b).values == std::vector<double>{-2, 3});
  CHECK(scale(a, 0.5).values == std::vector<double>{0.5, 1});
  CHECK(l2_norm(std::vector<double>{3, 4}) == doctest::Approx(5.0));
  CHECK_THROWS_AS(add(a, c), Error);
}

TEST_CASE("blobs are deterministic and label filters split them") {
  auto d1 = blobs(1), d2 = blobs(1);
  REQUIRE(d1.size() == 120);
  CHECK(d1.samples[5].features == d2.samples[5].features);
  auto f = d1.with_labels({0});
  auto r = d1.without_labels({0});
  CHECK(f.size() == 40);
  CHECK(r.size() == 80);
  CHECK(std::all_of(f.samples.begin(), f.samples.end(), [](const Sample& s) { return s.label == 0; }));
  CHECK(std::none_of(r.samples.begin(), r.samples.end(), [](const Sample& s) { return s.label == 0; }));
}

TEST_CASE("constant-class model scores 0.5 on a balanced two-class set") {
  ModelSpec spec{Family::logistic, 2, 2, 0};
  ParamVector p{std::vector<double>(spec.param_count(), 0.0), spec.shape_tag()};
  p.values[2 * 2 + 0] = 1.0;  // bias of class 0
  BlobConfig cfg;
  cfg.num_classes = 2;
  auto d = make_blobs(cfg);
  CHECK(evaluate(spec, p, d) == doctest::Approx(0.5));
  CHECK_THROWS_AS(evaluate(spec, p, Dataset{{}, 2, 2}), Error);
}

TEST_CASE("logistic training on separable blobs") {
  auto spec = logistic3();
  auto data = blobs(2);
  TrainSettings s{0.1, 16, 50, 1};
  auto w = train(spec, init_params(spec, 1), s, data);
  CHECK(evaluate(spec, w, data) >= 0.95);
  CHECK(train(spec, init_params(spec, 1), s, data) == w);
  TrainSettings none{0.1, 16, 0, 1};
  CHECK(train(spec, init_params(spec, 1), none, data) == init_params(spec, 1));
}

TEST_CASE("mlp training on separable blobs") {
  ModelSpec spec{Family::mlp, 2, 3, 8};
  auto data = blobs(3);
  auto w = train(spec, init_params(spec, 2), {0.1, 16, 50, 2}, data);
  CHECK(evaluate(spec, w, data) >= 0.95);
}

TEST_CASE("divergence is reported") {
  auto spec = logistic3();
  auto data = blobs(4);
  CHECK_THROWS_AS(sga_unlearn(spec, init_params(spec, 1), data.with_labels({0}), {50.0, 4, 50, 0}, 10.0),
                  DivergenceError);
}

TEST_CASE("gradient ascent lowers forget-class accuracy") {
  auto spec = logistic3();
  auto data = blobs(5);
  auto w = train(spec, init_params(spec, 1), {0.1, 16, 30, 1}, data);
  auto forget = data.with_labels({1});
  auto res = sga_unlearn(spec, w, forget, {0.05, 16, 5, 0});
  CHECK(add(w, res.delta) == res.updated);
  CHECK(evaluate(spec, res.updated, forget) < evaluate(spec, w, forget));
  auto zero = sga_unlearn(spec, w, forget, {0.05, 16, 0, 0});
  CHECK(l2_norm(zero.delta.values) == 0.0);
  CHECK_THROWS_AS(sga_unlearn(spec, w, Dataset{{}, 3, 2}, {0.05, 16, 5, 0}), Error);
}

TEST_CASE("analytic gradients match central differences") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> n(0.0, 1.0);
  for (auto spec : {logistic3(), ModelSpec{Family::mlp, 2, 3, 4}}) {
    auto data = blobs(6, 5);
    for (int t = 0; t < 5; ++t) {
      ParamVector p{std::vector<double>(spec.param_count()), spec.shape_tag()};
      for (auto& v : p.values) v = n(rng);
      auto lg = loss_and_gradient(spec, p, data.samples);
      CHECK(lg.loss == doctest::Approx(oracle::mean_xent(spec, p.values, data.samples)).epsilon(1e-12));
      CHECK(oracle::gradient_relative_error(spec, p.values, data.samples, lg.gradient) < 1e-5);
    }
  }
}

TEST_CASE("pre-aggregation") {
  ParamVector w{{1.0, -2.0, 3.0}, "t"};
  ParamVector neg = scale(w, -1.0);
  std::vector<WeightedParent> one{{&w, 1}};
  CHECK(pre_aggregate(one) == w);
  std::vector<WeightedParent> sym{{&w, 1}, {&neg, 1}};
  CHECK(l2_norm(pre_aggregate(sym).values) == 0.0);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<ParamVector> ps(3, ParamVector{std::vector<double>(6), "t"});
  for (auto& p : ps) {
    for (auto& v : p.values) v = u(rng);
  }
  const std::size_t counts[] = {1, 2, 4};
  std::vector<WeightedParent> parents;
  for (int i = 0; i < 3; ++i) parents.push_back({&ps[i], counts[i]});
  auto got = pre_aggregate(parents);
  for (std::size_t j = 0; j < 6; ++j) {
    double expected = ps[0].values[j] / 1.0 + ps[1].values[j] / 2.0 + ps[2].values[j] / 4.0;
    CHECK(got.values[j] == doctest::Approx(expected).epsilon(1e-15));
  }
  CHECK_THROWS_AS(pre_aggregate(std::vector<WeightedParent>{}), Error);
}

TEST_CASE("candidate selection matches a sort-based oracle") {
  auto spec = logistic3();
  auto data = blobs(7, 10);
  std::vector<ParamVector> models;
  for (int i = 0; i < 10; ++i) {
    models.push_back(train(spec, init_params(spec, i), {0.1, 8, static_cast<std::size_t>(i % 4), 0}, data));
  }
  std::vector<Candidate> pop;
  for (std::uint64_t i = 0; i < models.size(); ++i) pop.push_back({i, &models[i]});

  std::vector<ScoredCandidate> all;
  for (const auto& c : pop) all.push_back({c.id, evaluate(spec, *c.params, data)});
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    return a.accuracy != b.accuracy ? a.accuracy > b.accuracy : a.id < b.id;
  });

  std::mt19937_64 rng(1);
  auto top = select_candidates(spec, pop, data, 10, 4, rng);
  CHECK(top == std::vector<ScoredCandidate>(all.begin(), all.begin() + 4));
  auto best = select_candidates(spec, pop, data, 10, 1, rng);
  REQUIRE(best.size() == 1);
  CHECK(best[0] == all[0]);

  // K < population: the result is the sorted top-N of whichever K were sampled.
  auto some = select_candidates(spec, pop, data, 5, 3, rng);
  CHECK(some.size() == 3);
  CHECK(std::is_sorted(some.begin(), some.end(), [](const auto& a, const auto& b) {
    return a.accuracy != b.accuracy ? a.accuracy > b.accuracy : a.id < b.id;
  }));
  CHECK_THROWS_AS(select_candidates(spec, pop, data, 11, 1, rng), Error);
  CHECK_THROWS_AS(select_candidates(spec, pop, data, 3, 4, rng), Error);
}
