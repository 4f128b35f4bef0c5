#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "amcbench/neuralnet.hpp"

namespace amcbench {

enum class MetricKind : uint8_t { Asr = 0, Alc, Abc };

std::string_view metric_name(MetricKind kind);

// One row of the long-format results table. value is a percentage in [0, 100].
struct MetricRow {
  std::string model_arch;
  double snr_db = 0.0;
  MetricKind metric = MetricKind::Asr;
  double value = 0.0;
  uint64_t run_seed = 0;
};

// Top-1 accuracy in percent. Throws std::invalid_argument on empty input or
// mismatched sizes. ALC and ABC are both this number, computed with the clean
// and the backdoored model respectively.
double accuracy_percent(const Model& model, const std::vector<const float*>& frames,
                        const std::vector<uint16_t>& labels);

// Percentage of triggered frames classified as y_tar. The caller passes only
// frames whose true label differs from y_tar; frames that already belong to
// the target class would count as free wins.
double attack_success_rate(const Model& model, const std::vector<const float*>& triggered,
                           uint16_t y_tar);

// Header `model,snr_db,metric,value,seed`, one row per line, LF endings,
// C-locale number formatting. Identical rows give identical bytes.
std::string metrics_to_csv(const std::vector<MetricRow>& rows);

// Inverse of metrics_to_csv. Throws FormatError on a malformed header, row
// width, or number field.
std::vector<MetricRow> metrics_from_csv(const std::string& text);

// Spearman rank correlation with average ranks on ties. Returns 0 when either
// input is constant. Throws on size mismatch or fewer than two points.
double spearman(const std::vector<double>& xs, const std::vector<double>& ys);

}  // namespace amcbench
