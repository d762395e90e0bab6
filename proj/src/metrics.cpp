#include "sarw/metrics.hpp"

#include <algorithm>
#include <numeric>

#include <json.hpp>

#include "sarw/error.hpp"

namespace sarw {

std::optional<double> average_precision(const std::vector<double>& scores,
                                        const std::vector<uint8_t>& labels) {
  if (scores.size() != labels.size())
    throw ShapeError("average_precision: scores/labels length mismatch");
  size_t positives = 0;
  for (uint8_t l : labels) positives += l ? 1 : 0;
  if (positives == 0) return std::nullopt;

  std::vector<size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return scores[a] > scores[b]; });

  double ap = 0.0;
  size_t hits = 0;
  for (size_t rank = 0; rank < order.size(); ++rank) {
    if (labels[order[rank]]) {
      ++hits;
      // Each positive advances recall by 1/positives at precision hits/(rank+1).
      ap += static_cast<double>(hits) / static_cast<double>(rank + 1);
    }
  }
  return ap / static_cast<double>(positives);
}

Prf f1_precision_recall(const std::vector<uint8_t>& predictions,
                        const std::vector<uint8_t>& labels) {
  if (predictions.size() != labels.size())
    throw ShapeError("f1_precision_recall: predictions/labels length mismatch");
  long long tp = 0, fp = 0, fn = 0;
  for (size_t i = 0; i < predictions.size(); ++i) {
    const bool p = predictions[i] != 0, l = labels[i] != 0;
    if (p && l) ++tp;
    else if (p && !l) ++fp;
    else if (!p && l) ++fn;
  }
  Prf out;
  out.precision = (tp + fp) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  out.recall = (tp + fn) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  out.f1 = (out.precision + out.recall) > 0.0
               ? 2.0 * out.precision * out.recall / (out.precision + out.recall)
               : 0.0;
  return out;
}

BinaryReport binary_report(const std::vector<uint8_t>& predictions,
                           const std::vector<uint8_t>& labels) {
  if (predictions.size() != labels.size() || predictions.empty())
    throw ShapeError("binary_report: bad input lengths");
  const Prf prf = f1_precision_recall(predictions, labels);
  size_t correct = 0;
  for (size_t i = 0; i < predictions.size(); ++i)
    if ((predictions[i] != 0) == (labels[i] != 0)) ++correct;
  BinaryReport out;
  out.accuracy = static_cast<double>(correct) / static_cast<double>(predictions.size());
  out.precision = prf.precision;
  out.recall = prf.recall;
  out.f1 = prf.f1;
  return out;
}

MetricReport aggregate_macro_micro(const std::vector<std::vector<double>>& scores,
                                   const std::vector<std::vector<uint8_t>>& labels) {
  if (scores.size() != labels.size() || scores.empty())
    throw ShapeError("aggregate_macro_micro: instance count mismatch");
  const size_t classes = scores[0].size();
  for (size_t i = 0; i < scores.size(); ++i)
    if (scores[i].size() != classes || labels[i].size() != classes)
      throw ShapeError("aggregate_macro_micro: inconsistent class count");

  MetricReport report;

  // Macro: per-class metrics averaged with equal class weight.
  double macro_ap_sum = 0.0;
  size_t macro_ap_defined = 0;
  double macro_f1_sum = 0.0, macro_p_sum = 0.0;
  std::vector<double> class_scores(scores.size());
  std::vector<uint8_t> class_labels(scores.size()), class_preds(scores.size());
  for (size_t k = 0; k < classes; ++k) {
    for (size_t i = 0; i < scores.size(); ++i) {
      class_scores[i] = scores[i][k];
      class_labels[i] = labels[i][k];
      class_preds[i] = scores[i][k] > 0.0 ? 1 : 0;  // sigmoid threshold 0.5
    }
    if (const auto ap = average_precision(class_scores, class_labels)) {
      macro_ap_sum += *ap;
      ++macro_ap_defined;
    }
    const Prf prf = f1_precision_recall(class_preds, class_labels);
    macro_f1_sum += prf.f1;
    macro_p_sum += prf.precision;
  }
  report.macro.ap = macro_ap_defined > 0 ? macro_ap_sum / static_cast<double>(macro_ap_defined) : 0.0;
  report.macro.f1 = macro_f1_sum / static_cast<double>(classes);
  report.macro.precision = macro_p_sum / static_cast<double>(classes);

  // Micro: one pooled ranking / confusion matrix over instance-class pairs.
  std::vector<double> pooled_scores;
  std::vector<uint8_t> pooled_labels, pooled_preds;
  pooled_scores.reserve(scores.size() * classes);
  for (size_t i = 0; i < scores.size(); ++i)
    for (size_t k = 0; k < classes; ++k) {
      pooled_scores.push_back(scores[i][k]);
      pooled_labels.push_back(labels[i][k]);
      pooled_preds.push_back(scores[i][k] > 0.0 ? 1 : 0);
    }
  report.micro.ap = average_precision(pooled_scores, pooled_labels).value_or(0.0);
  const Prf micro = f1_precision_recall(pooled_preds, pooled_labels);
  report.micro.f1 = micro.f1;
  report.micro.precision = micro.precision;
  return report;
}

std::string MetricReport::to_json() const {
  nlohmann::json j = {
      {"macro", {{"ap", macro.ap}, {"f1", macro.f1}, {"precision", macro.precision}}},
      {"micro", {{"ap", micro.ap}, {"f1", micro.f1}, {"precision", micro.precision}}}};
  if (binary)
    j["binary"] = {{"accuracy", binary->accuracy},
                   {"precision", binary->precision},
                   {"recall", binary->recall},
                   {"f1", binary->f1}};
  return j.dump();
}

MetricReport MetricReport::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  MetricReport r;
  r.macro = {j.at("macro").at("ap"), j.at("macro").at("f1"), j.at("macro").at("precision")};
  r.micro = {j.at("micro").at("ap"), j.at("micro").at("f1"), j.at("micro").at("precision")};
  if (j.contains("binary")) {
    BinaryReport b;
    b.accuracy = j["binary"].at("accuracy");
    b.precision = j["binary"].at("precision");
    b.recall = j["binary"].at("recall");
    b.f1 = j["binary"].at("f1");
    r.binary = b;
  }
  return r;
}

}  // namespace sarw
