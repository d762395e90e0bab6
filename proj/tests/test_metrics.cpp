#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "sarw/metrics.hpp"
#include "sarw/rng.hpp"
#include "testutil.hpp"

using namespace sarw;
using namespace sarw::testutil;

namespace {

/// Brute-force AP: walk every distinct threshold in ranking order and sum
/// precision at each recall step.
double oracle_ap(const std::vector<double>& scores, const std::vector<uint8_t>& labels) {
  std::vector<size_t> order(scores.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  // insertion sort keeps ties stable
  for (size_t i = 1; i < order.size(); ++i)
    for (size_t j = i; j > 0 && scores[order[j]] > scores[order[j - 1]]; --j)
      std::swap(order[j], order[j - 1]);
  double positives = 0;
  for (uint8_t l : labels) positives += l;
  double ap = 0, hits = 0;
  for (size_t r = 0; r < order.size(); ++r)
    if (labels[order[r]]) {
      hits += 1;
      ap += (hits / static_cast<double>(r + 1)) * (1.0 / positives);
    }
  return ap;
}

Prf oracle_prf(const std::vector<uint8_t>& preds, const std::vector<uint8_t>& labels) {
  double tp = 0, fp = 0, fn = 0;
  for (size_t i = 0; i < preds.size(); ++i) {
    tp += preds[i] && labels[i];
    fp += preds[i] && !labels[i];
    fn += !preds[i] && labels[i];
  }
  Prf out;
  out.precision = tp + fp > 0 ? tp / (tp + fp) : 0;
  out.recall = tp + fn > 0 ? tp / (tp + fn) : 0;
  out.f1 = out.precision + out.recall > 0
               ? 2 * out.precision * out.recall / (out.precision + out.recall)
               : 0;
  return out;
}

}  // namespace

TEST_CASE("average precision on hand-checked rankings") {
  // perfect ranking of 2 positives above 2 negatives
  CHECK(*average_precision({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0}) == doctest::Approx(1.0));
  // positive at rank 2 of 3
  CHECK(*average_precision({0.9, 0.8, 0.7}, {0, 1, 0}) == doctest::Approx(0.5));
  // all positive: AP is 1 regardless of scores
  CHECK(*average_precision({0.1, 0.9, 0.4}, {1, 1, 1}) == doctest::Approx(1.0));
  // no positives: undefined
  CHECK(!average_precision({0.5, 0.4}, {0, 0}).has_value());
}

TEST_CASE("average precision is invariant under strictly monotone score maps") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 3 + static_cast<int>(rng.uniform_index(20));
    std::vector<double> scores(n);
    std::vector<uint8_t> labels(n);
    bool any = false;
    for (int i = 0; i < n; ++i) {
      scores[i] = rng.uniform(-4.0, 4.0);
      labels[i] = rng.uniform() < 0.4 ? 1 : 0;
      any |= labels[i] != 0;
    }
    if (!any) labels[0] = 1;
    auto transformed = scores;
    for (auto& s : transformed) s = std::tanh(s) * 3.0 + 7.0;
    CHECK(*average_precision(scores, labels) ==
          doctest::Approx(*average_precision(transformed, labels)).epsilon(1e-12));
  }
}

TEST_CASE("f1/precision/recall on the documented conventions") {
  // perfect predictions
  const Prf perfect = f1_precision_recall({1, 0, 1}, {1, 0, 1});
  CHECK(perfect.precision == 1.0);
  CHECK(perfect.recall == 1.0);
  CHECK(perfect.f1 == 1.0);
  // all-negative predictions with positives present: 0/0 -> 0 convention
  const Prf empty = f1_precision_recall({0, 0, 0}, {1, 0, 1});
  CHECK(empty.precision == 0.0);
  CHECK(empty.recall == 0.0);
  CHECK(empty.f1 == 0.0);
}

TEST_CASE("metrics match brute-force oracles on random instances") {
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + static_cast<int>(rng.uniform_index(30));
    std::vector<double> scores(n);
    std::vector<uint8_t> labels(n), preds(n);
    bool any = false;
    for (int i = 0; i < n; ++i) {
      scores[i] = rng.uniform(-3.0, 3.0);
      labels[i] = rng.uniform() < 0.5 ? 1 : 0;
      preds[i] = scores[i] > 0 ? 1 : 0;
      any |= labels[i] != 0;
    }
    if (!any) labels[static_cast<size_t>(rng.uniform_index(n))] = 1;

    CHECK(std::abs(*average_precision(scores, labels) - oracle_ap(scores, labels)) < 1e-9);
    const Prf got = f1_precision_recall(preds, labels);
    const Prf want = oracle_prf(preds, labels);
    CHECK(std::abs(got.precision - want.precision) < 1e-9);
    CHECK(std::abs(got.recall - want.recall) < 1e-9);
    CHECK(std::abs(got.f1 - want.f1) < 1e-9);
  }
}

TEST_CASE("single class: macro equals micro") {
  std::vector<std::vector<double>> scores = {{1.0}, {-0.5}, {2.0}, {-1.0}};
  std::vector<std::vector<uint8_t>> labels = {{1}, {0}, {1}, {1}};
  const auto report = aggregate_macro_micro(scores, labels);
  CHECK(report.macro.ap == doctest::Approx(report.micro.ap).epsilon(1e-12));
  CHECK(report.macro.f1 == doctest::Approx(report.micro.f1).epsilon(1e-12));
  CHECK(report.macro.precision == doctest::Approx(report.micro.precision).epsilon(1e-12));
}

TEST_CASE("two classes, one predicted perfectly and one never predicted") {
  // class 0: perfect; class 1: positives exist, nothing predicted
  std::vector<std::vector<double>> scores = {{2.0, -1.0}, {-2.0, -1.0}, {2.0, -3.0}};
  std::vector<std::vector<uint8_t>> labels = {{1, 1}, {0, 0}, {1, 1}};
  const auto report = aggregate_macro_micro(scores, labels);
  // per-class F1: 1.0 and 0.0 -> macro 0.5
  CHECK(report.macro.f1 == doctest::Approx(0.5).epsilon(1e-12));
  // micro from pooled counts: tp=2, fp=0, fn=2 -> p=1, r=0.5, f1=2/3
  CHECK(report.micro.precision == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(report.micro.f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("macro and micro aggregates match a brute-force enumeration") {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 4 + static_cast<int>(rng.uniform_index(12));
    const int k = 2 + static_cast<int>(rng.uniform_index(5));
    std::vector<std::vector<double>> scores(n, std::vector<double>(k));
    std::vector<std::vector<uint8_t>> labels(n, std::vector<uint8_t>(k));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < k; ++j) {
        scores[i][j] = rng.uniform(-2.0, 2.0);
        labels[i][j] = rng.uniform() < 0.4 ? 1 : 0;
      }
    const auto report = aggregate_macro_micro(scores, labels);

    double macro_f1 = 0, macro_p = 0, macro_ap = 0;
    int defined = 0;
    std::vector<double> pooled_scores;
    std::vector<uint8_t> pooled_labels, pooled_preds;
    for (int j = 0; j < k; ++j) {
      std::vector<double> s(n);
      std::vector<uint8_t> l(n), p(n);
      for (int i = 0; i < n; ++i) {
        s[i] = scores[i][j];
        l[i] = labels[i][j];
        p[i] = s[i] > 0 ? 1 : 0;
        pooled_scores.push_back(s[i]);
        pooled_labels.push_back(l[i]);
        pooled_preds.push_back(p[i]);
      }
      const Prf prf = oracle_prf(p, l);
      macro_f1 += prf.f1 / k;
      macro_p += prf.precision / k;
      bool any = false;
      for (uint8_t x : l) any |= x != 0;
      if (any) {
        macro_ap += oracle_ap(s, l);
        ++defined;
      }
    }
    if (defined > 0) macro_ap /= defined;
    CHECK(std::abs(report.macro.f1 - macro_f1) < 1e-9);
    CHECK(std::abs(report.macro.precision - macro_p) < 1e-9);
    CHECK(std::abs(report.macro.ap - macro_ap) < 1e-9);
    CHECK(std::abs(report.micro.ap - oracle_ap(pooled_scores, pooled_labels)) < 1e-9);
    const Prf micro = oracle_prf(pooled_preds, pooled_labels);
    CHECK(std::abs(report.micro.f1 - micro.f1) < 1e-9);
    CHECK(std::abs(report.micro.precision - micro.precision) < 1e-9);
  }
}

TEST_CASE("class permutation leaves both aggregates unchanged") {
  Rng rng(13);
  const int n = 10, k = 4;
  std::vector<std::vector<double>> scores(n, std::vector<double>(k));
  std::vector<std::vector<uint8_t>> labels(n, std::vector<uint8_t>(k));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < k; ++j) {
      scores[i][j] = rng.uniform(-2.0, 2.0);
      labels[i][j] = rng.uniform() < 0.5 ? 1 : 0;
    }
  auto permuted_scores = scores;
  auto permuted_labels = labels;
  const int perm[k] = {2, 0, 3, 1};
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < k; ++j) {
      permuted_scores[i][j] = scores[i][perm[j]];
      permuted_labels[i][j] = labels[i][perm[j]];
    }
  const auto a = aggregate_macro_micro(scores, labels);
  const auto b = aggregate_macro_micro(permuted_scores, permuted_labels);
  CHECK(a.macro.f1 == doctest::Approx(b.macro.f1).epsilon(1e-12));
  CHECK(a.macro.ap == doctest::Approx(b.macro.ap).epsilon(1e-12));
  CHECK(a.micro.f1 == doctest::Approx(b.micro.f1).epsilon(1e-12));
  CHECK(a.micro.ap == doctest::Approx(b.micro.ap).epsilon(1e-12));
}

TEST_CASE("single-label degenerate case: micro precision = recall = f1") {
  Rng rng(17);
  const int n = 12, k = 3;
  std::vector<std::vector<double>> scores(n, std::vector<double>(k, -1.0));
  std::vector<std::vector<uint8_t>> labels(n, std::vector<uint8_t>(k, 0));
  for (int i = 0; i < n; ++i) {
    labels[i][rng.uniform_index(k)] = 1;
    // exactly one predicted label per instance
    const int pred = static_cast<int>(rng.uniform_index(k));
    for (int j = 0; j < k; ++j) scores[i][j] = j == pred ? 1.0 : -1.0;
  }
  const auto report = aggregate_macro_micro(scores, labels);
  CHECK(report.micro.precision == doctest::Approx(report.micro.f1).epsilon(1e-12));
}

TEST_CASE("binary report counts the confusion matrix") {
  const auto r = binary_report({1, 1, 0, 0, 1}, {1, 0, 0, 1, 1});
  CHECK(r.accuracy == doctest::Approx(0.6));
  CHECK(r.precision == doctest::Approx(2.0 / 3.0));
  CHECK(r.recall == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("metric report serializes to the documented JSON shape") {
  MetricReport r;
  r.macro = {0.7, 0.6, 0.65};
  r.micro = {0.8, 0.7, 0.75};
  BinaryReport b;
  b.accuracy = 0.9;
  b.precision = 0.8;
  b.recall = 0.85;
  b.f1 = 0.82;
  r.binary = b;
  const auto parsed = MetricReport::from_json(r.to_json());
  CHECK(parsed == r);
  const auto no_binary = MetricReport::from_json(MetricReport{r.macro, r.micro, {}}.to_json());
  CHECK(!no_binary.binary.has_value());
}
