#include "amcbench/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numeric>
#include <stdexcept>

namespace amcbench {

std::string_view metric_name(MetricKind kind) {
  switch (kind) {
    case MetricKind::Asr: return "ASR";
    case MetricKind::Alc: return "ALC";
    case MetricKind::Abc: return "ABC";
  }
  throw std::invalid_argument("unknown metric kind");
}

double accuracy_percent(const Model& model, const std::vector<const float*>& frames,
                        const std::vector<uint16_t>& labels) {
  if (frames.empty()) throw std::invalid_argument("accuracy over empty set");
  if (frames.size() != labels.size())
    throw std::invalid_argument("frame/label count mismatch");
  std::vector<uint16_t> pred = model.predict(frames);
  size_t hits = 0;
  for (size_t i = 0; i < pred.size(); ++i)
    if (pred[i] == labels[i]) ++hits;
  return 100.0 * double(hits) / double(pred.size());
}

double attack_success_rate(const Model& model, const std::vector<const float*>& triggered,
                           uint16_t y_tar) {
  if (triggered.empty()) throw std::invalid_argument("attack success over empty set");
  std::vector<uint16_t> pred = model.predict(triggered);
  size_t hits = 0;
  for (uint16_t p : pred)
    if (p == y_tar) ++hits;
  return 100.0 * double(hits) / double(pred.size());
}

namespace {

void append_double(std::string& out, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  out += buf;
}

}  // namespace

std::string metrics_to_csv(const std::vector<MetricRow>& rows) {
  std::string out = "model,snr_db,metric,value,seed\n";
  for (const MetricRow& row : rows) {
    out += row.model_arch;
    out += ',';
    append_double(out, row.snr_db);
    out += ',';
    out += metric_name(row.metric);
    out += ',';
    append_double(out, row.value);
    out += ',';
    char buf[32];
    std::snprintf(buf, sizeof buf, "%llu", static_cast<unsigned long long>(row.run_seed));
    out += buf;
    out += '\n';
  }
  return out;
}

std::vector<MetricRow> metrics_from_csv(const std::string& text) {
  std::vector<std::string> lines;
  size_t pos = 0;
  while (pos < text.size()) {
    size_t nl = text.find('\n', pos);
    if (nl == std::string::npos) nl = text.size();
    lines.push_back(text.substr(pos, nl - pos));
    pos = nl + 1;
  }
  if (lines.empty() || lines.front() != "model,snr_db,metric,value,seed")
    throw FormatError("metrics csv header mismatch");
  std::vector<MetricRow> rows;
  for (size_t li = 1; li < lines.size(); ++li) {
    const std::string& line = lines[li];
    if (line.empty()) continue;
    std::vector<std::string> fields;
    size_t start = 0;
    while (true) {
      size_t comma = line.find(',', start);
      if (comma == std::string::npos) {
        fields.push_back(line.substr(start));
        break;
      }
      fields.push_back(line.substr(start, comma - start));
      start = comma + 1;
    }
    if (fields.size() != 5)
      throw FormatError("metrics csv row " + std::to_string(li) + " has " +
                        std::to_string(fields.size()) + " fields");
    MetricRow row;
    row.model_arch = fields[0];
    char* end = nullptr;
    row.snr_db = std::strtod(fields[1].c_str(), &end);
    if (end == fields[1].c_str() || *end != '\0')
      throw FormatError("metrics csv row " + std::to_string(li) + ": bad snr_db");
    if (fields[2] == "ASR") row.metric = MetricKind::Asr;
    else if (fields[2] == "ALC") row.metric = MetricKind::Alc;
    else if (fields[2] == "ABC") row.metric = MetricKind::Abc;
    else throw FormatError("metrics csv row " + std::to_string(li) + ": bad metric");
    row.value = std::strtod(fields[3].c_str(), &end);
    if (end == fields[3].c_str() || *end != '\0')
      throw FormatError("metrics csv row " + std::to_string(li) + ": bad value");
    row.run_seed = std::strtoull(fields[4].c_str(), &end, 10);
    if (end == fields[4].c_str() || *end != '\0')
      throw FormatError("metrics csv row " + std::to_string(li) + ": bad seed");
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace {

// Average ranks, 1-based; tied values share the mean of their rank span.
std::vector<double> ranks_of(const std::vector<double>& xs) {
  const size_t n = xs.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return xs[a] < xs[b]; });
  std::vector<double> rank(n, 0.0);
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && xs[order[j + 1]] == xs[order[i]]) ++j;
    double mean = 0.5 * double(i + j) + 1.0;
    for (size_t k = i; k <= j; ++k) rank[order[k]] = mean;
    i = j + 1;
  }
  return rank;
}

}  // namespace

double spearman(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw std::invalid_argument("spearman size mismatch");
  if (xs.size() < 2) throw std::invalid_argument("spearman needs at least two points");
  std::vector<double> rx = ranks_of(xs);
  std::vector<double> ry = ranks_of(ys);
  const double n = double(xs.size());
  double mx = 0.0, my = 0.0;
  for (size_t i = 0; i < rx.size(); ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace amcbench
