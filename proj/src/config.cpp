#include "amcbench/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <sstream>
#include <stdexcept>

#include "amcbench/common.hpp"

namespace amcbench {

uint32_t ExperimentConfig::n_train() const {
  auto n = static_cast<uint32_t>(std::llround(train_fraction * double(n_examples)));
  return std::min(n, n_examples);
}

double ExperimentConfig::resolved_defend_snr() const {
  if (!std::isnan(defend_snr_db)) return defend_snr_db;
  if (eval_snr_db.empty()) throw std::invalid_argument("eval.snr_grid_db is empty");
  return *std::max_element(eval_snr_db.begin(), eval_snr_db.end());
}

DatasetManifest ExperimentConfig::dataset_manifest() const {
  DatasetManifest m;
  m.ofdm = ofdm;
  m.pa = pa;
  // The per-frame channel SNR comes from snr_grid_db; the scalar here is just
  // the fallback for an empty grid.
  m.channel = ChannelConfig::exponential(tap_delays, tap_decay,
                                         snr_grid_db.empty() ? 10.0 : snr_grid_db.front());
  m.classes = classes;
  m.n_train = n_train();
  m.n_test = n_test();
  m.master_seed = dataset_seed;
  m.snr_grid_db = snr_grid_db;
  return m;
}

void ExperimentConfig::validate() const {
  ofdm.validate();
  dataset_manifest().validate();
  if (n_examples < 2) throw std::invalid_argument("dataset.n_examples must be at least 2");
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw std::invalid_argument("dataset.train_fraction must lie in (0, 1)");
  if (n_train() == 0 || n_test() == 0)
    throw std::invalid_argument("dataset split leaves an empty train or test set");
  if (classes.empty()) throw std::invalid_argument("dataset.classes is empty");
  if (archs.empty()) throw std::invalid_argument("model.archs is empty");
  if (y_tar >= classes.size())
    throw std::invalid_argument("attack.y_tar is out of range for dataset.classes");
  if (window_len == 0 || ofdm.symbol_len() % window_len != 0)
    throw std::invalid_argument("attack.window_len must divide the symbol length");
  if (n_permutations == 0) throw std::invalid_argument("attack.n_permutations must be positive");
  if (symbols_per_class == 0)
    throw std::invalid_argument("attack.symbols_per_class must be positive");
  if (bg_pool == 0) throw std::invalid_argument("attack.bg_pool must be positive");
  if (!(bg_target_mix >= 0.0 && bg_target_mix <= 1.0))
    throw std::invalid_argument("attack.bg_target_mix must lie in [0, 1]");
  const uint32_t n_windows = ofdm.symbol_len() / window_len;
  if (top_k == 0 || top_k > n_windows)
    throw std::invalid_argument("attack.top_k must lie in [1, n_windows]");
  if (!(lambda_mix >= 0.0 && lambda_mix <= 1.0))
    throw std::invalid_argument("attack.lambda must lie in [0, 1]");
  if (!(example_fraction > 0.0 && example_fraction <= 1.0))
    throw std::invalid_argument("attack.example_fraction must lie in (0, 1]");
  if (!(rho_h > 0.0 && rho_h <= 100.0))
    throw std::invalid_argument("attack.rho_h must lie in (0, 100]");
  if (std::find(archs.begin(), archs.end(), surrogate) == archs.end())
    throw std::invalid_argument("attack.surrogate is not listed in model.archs");
  if (eval_snr_db.empty()) throw std::invalid_argument("eval.snr_grid_db is empty");
  if (eval_frames == 0 || eval_frames > n_test())
    throw std::invalid_argument("eval.n_frames must lie in [1, n_test]");
  if (strip_frames == 0 || strip_overlays == 0)
    throw std::invalid_argument("defend.strip settings must be positive");
  if (anomaly_steps == 0 || anomaly_frames == 0)
    throw std::invalid_argument("defend.anomaly settings must be positive");
  if (std::find(archs.begin(), archs.end(), defend_arch) == archs.end())
    throw std::invalid_argument("defend.arch is not listed in model.archs");
  if (train.epochs == 0 || train.batch_size == 0)
    throw std::invalid_argument("train.epochs and train.batch_size must be positive");
  if (!(train.learning_rate > 0.0))
    throw std::invalid_argument("train.learning_rate must be positive");
}

std::string_view trigger_mode_name(TriggerMode mode) {
  return mode == TriggerMode::Xai ? "xai" : "random";
}

namespace {

std::string trim(std::string_view s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string_view::npos) return {};
  size_t b = s.find_last_not_of(" \t\r");
  return std::string(s.substr(a, b - a + 1));
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::string item;
  std::stringstream ss(value);
  while (std::getline(ss, item, ',')) {
    std::string t = trim(item);
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value) {
  throw FormatError("bad value for config key '" + key + "': '" + value + "'");
}

double parse_double(const std::string& key, const std::string& value) {
  char* end = nullptr;
  double v = std::strtod(value.c_str(), &end);
  if (end == value.c_str() || *end != '\0') bad_value(key, value);
  return v;
}

uint64_t parse_u64(const std::string& key, const std::string& value) {
  char* end = nullptr;
  unsigned long long v = std::strtoull(value.c_str(), &end, 10);
  if (end == value.c_str() || *end != '\0' || value.front() == '-') bad_value(key, value);
  return v;
}

uint32_t parse_u32(const std::string& key, const std::string& value) {
  uint64_t v = parse_u64(key, value);
  if (v > 0xffffffffull) bad_value(key, value);
  return static_cast<uint32_t>(v);
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "on") return true;
  if (value == "false" || value == "0" || value == "off") return false;
  bad_value(key, value);
}

std::vector<double> parse_double_list(const std::string& key, const std::string& value) {
  std::vector<double> out;
  for (const std::string& item : split_list(value)) out.push_back(parse_double(key, item));
  if (out.empty()) bad_value(key, value);
  return out;
}

std::vector<uint32_t> parse_u32_list(const std::string& key, const std::string& value) {
  std::vector<uint32_t> out;
  for (const std::string& item : split_list(value)) out.push_back(parse_u32(key, item));
  if (out.empty()) bad_value(key, value);
  return out;
}

Arch parse_arch(const std::string& key, const std::string& value) {
  auto a = arch_from_name(value);
  if (!a) bad_value(key, value);
  return *a;
}

void apply_key(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "dataset.n_examples") cfg.n_examples = parse_u32(key, value);
  else if (key == "dataset.train_fraction") cfg.train_fraction = parse_double(key, value);
  else if (key == "dataset.seed") cfg.dataset_seed = parse_u64(key, value);
  else if (key == "dataset.snr_grid_db") cfg.snr_grid_db = parse_double_list(key, value);
  else if (key == "dataset.classes") {
    cfg.classes.clear();
    for (const std::string& item : split_list(value)) {
      std::string upper = item;
      std::transform(upper.begin(), upper.end(), upper.begin(),
                     [](unsigned char ch) { return std::toupper(ch); });
      auto s = scheme_from_name(upper);
      if (!s) bad_value(key, item);
      cfg.classes.push_back(*s);
    }
    if (cfg.classes.empty()) bad_value(key, value);
  } else if (key == "ofdm.n_subcarriers") cfg.ofdm.n_subcarriers = parse_u32(key, value);
  else if (key == "ofdm.cp_len") cfg.ofdm.cp_len = parse_u32(key, value);
  else if (key == "ofdm.symbols_per_frame") cfg.ofdm.symbols_per_frame = parse_u32(key, value);
  else if (key == "pa.smoothness") cfg.pa.rapp_smoothness = parse_double(key, value);
  else if (key == "pa.ibo_db") cfg.pa.ibo_db = parse_double(key, value);
  else if (key == "channel.tap_delays") cfg.tap_delays = parse_u32_list(key, value);
  else if (key == "channel.exp_decay") cfg.tap_decay = parse_double(key, value);
  else if (key == "train.epochs") cfg.train.epochs = parse_u32(key, value);
  else if (key == "train.batch_size") cfg.train.batch_size = parse_u32(key, value);
  else if (key == "train.learning_rate") cfg.train.learning_rate = parse_double(key, value);
  else if (key == "train.optimizer") {
    if (value == "adam") cfg.train.optimizer = TrainConfig::Opt::Adam;
    else if (value == "sgd") cfg.train.optimizer = TrainConfig::Opt::SGD;
    else bad_value(key, value);
  } else if (key == "model.archs") {
    cfg.archs.clear();
    for (const std::string& item : split_list(value)) cfg.archs.push_back(parse_arch(key, item));
    if (cfg.archs.empty()) bad_value(key, value);
  } else if (key == "attack.y_tar") cfg.y_tar = static_cast<uint16_t>(parse_u32(key, value));
  else if (key == "attack.window_len") cfg.window_len = parse_u32(key, value);
  else if (key == "attack.n_permutations") cfg.n_permutations = parse_u32(key, value);
  else if (key == "attack.symbols_per_class") cfg.symbols_per_class = parse_u32(key, value);
  else if (key == "attack.bg_pool") cfg.bg_pool = parse_u32(key, value);
  else if (key == "attack.bg_target_mix") cfg.bg_target_mix = parse_double(key, value);
  else if (key == "attack.top_k") cfg.top_k = parse_u32(key, value);
  else if (key == "attack.lambda") cfg.lambda_mix = parse_double(key, value);
  else if (key == "attack.kappa_db") cfg.kappa_db = parse_double(key, value);
  else if (key == "attack.example_fraction") cfg.example_fraction = parse_double(key, value);
  else if (key == "attack.rho_h") cfg.rho_h = parse_double(key, value);
  else if (key == "attack.surrogate") cfg.surrogate = parse_arch(key, value);
  else if (key == "attack.trigger") {
    if (value == "xai") cfg.trigger_mode = TriggerMode::Xai;
    else if (value == "random") cfg.trigger_mode = TriggerMode::RandomWindow;
    else bad_value(key, value);
  } else if (key == "eval.snr_grid_db") cfg.eval_snr_db = parse_double_list(key, value);
  else if (key == "eval.n_frames") cfg.eval_frames = parse_u32(key, value);
  else if (key == "defend.strip") cfg.strip_on = parse_bool(key, value);
  else if (key == "defend.activation_clustering") cfg.clustering_on = parse_bool(key, value);
  else if (key == "defend.anomaly") cfg.anomaly_on = parse_bool(key, value);
  else if (key == "defend.strip_overlays") cfg.strip_overlays = parse_u32(key, value);
  else if (key == "defend.strip_frames") cfg.strip_frames = parse_u32(key, value);
  else if (key == "defend.anomaly_steps") cfg.anomaly_steps = parse_u32(key, value);
  else if (key == "defend.anomaly_frames") cfg.anomaly_frames = parse_u32(key, value);
  else if (key == "defend.snr_db") cfg.defend_snr_db = parse_double(key, value);
  else if (key == "defend.arch") cfg.defend_arch = parse_arch(key, value);
  else if (key == "run.master_seed") cfg.master_seed = parse_u64(key, value);
  else throw FormatError("unknown config key '" + key + "'");
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig cfg;
  std::stringstream ss(text);
  std::string line;
  size_t lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::string stripped = trim(line);
    if (stripped.empty()) continue;
    size_t eq = stripped.find('=');
    if (eq == std::string::npos)
      throw FormatError("config line " + std::to_string(lineno) + " has no '='");
    std::string key = trim(std::string_view(stripped).substr(0, eq));
    std::string value = trim(std::string_view(stripped).substr(eq + 1));
    if (key.empty())
      throw FormatError("config line " + std::to_string(lineno) + " has an empty key");
    apply_key(cfg, key, value);
  }
  return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
  return parse_config(read_file_bytes(path));
}

}  // namespace amcbench
