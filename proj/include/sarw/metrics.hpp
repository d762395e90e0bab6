#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace sarw {

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct BinaryReport {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool operator==(const BinaryReport&) const = default;
};

struct MetricGroup {
  double ap = 0.0;
  double f1 = 0.0;
  double precision = 0.0;
  bool operator==(const MetricGroup&) const = default;
};

struct MetricReport {
  MetricGroup macro;
  MetricGroup micro;
  std::optional<BinaryReport> binary;

  std::string to_json() const;
  static MetricReport from_json(const std::string& text);
  bool operator==(const MetricReport&) const = default;
};

/// Area under the precision-recall steps over a stable descending-score
/// ranking (ties keep original order). Undefined without positives.
std::optional<double> average_precision(const std::vector<double>& scores,
                                        const std::vector<uint8_t>& labels);

/// Standard definitions with the 0/0 -> 0 convention.
Prf f1_precision_recall(const std::vector<uint8_t>& predictions,
                        const std::vector<uint8_t>& labels);

BinaryReport binary_report(const std::vector<uint8_t>& predictions,
                           const std::vector<uint8_t>& labels);

/// Multi-label aggregation. scores[i][k] is the logit of class k for
/// instance i; labels are multi-hot. Predictions threshold sigmoid at 0.5
/// (logit > 0). Macro averages per-class values (classes without positives
/// are excluded from macro AP); micro pools all instance-class pairs.
MetricReport aggregate_macro_micro(const std::vector<std::vector<double>>& scores,
                                   const std::vector<std::vector<uint8_t>>& labels);

}  // namespace sarw
