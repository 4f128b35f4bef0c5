#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <map>

#include "amcbench/datastore.hpp"

using namespace amcbench;
namespace fs = std::filesystem;

namespace {

DatasetManifest tiny_manifest(uint32_t n_train, uint32_t n_test,
                              size_t n_classes = 8) {
  DatasetManifest m;
  m.ofdm.n_subcarriers = 16;
  m.ofdm.cp_len = 8;
  m.ofdm.symbols_per_frame = 2;
  m.channel = ChannelConfig::exponential({0, 2, 4}, 1.0, 10.0);
  for (size_t i = 0; i < n_classes; ++i)
    m.classes.push_back(static_cast<ModulationScheme>(i));
  m.n_train = n_train;
  m.n_test = n_test;
  m.master_seed = 2024;
  return m;
}

bool datasets_equal(const LabeledDataset& a, const LabeledDataset& b) {
  if (a.examples.size() != b.examples.size()) return false;
  for (size_t i = 0; i < a.examples.size(); ++i) {
    const auto& ea = a.examples[i];
    const auto& eb = b.examples[i];
    if (ea.label != eb.label || ea.frame_seed != eb.frame_seed ||
        ea.snr_db != eb.snr_db || ea.x != eb.x)
      return false;
    if (ea.clean_tx.symbols != eb.clean_tx.symbols ||
        ea.clean_tx.per_symbol_phase != eb.clean_tx.per_symbol_phase)
      return false;
  }
  return true;
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / "amcbench_datastore_test";
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("generation balances classes exactly when divisible") {
  auto m = tiny_manifest(640, 160);  // 800 total over 8 classes
  auto ds = generate_dataset(m);
  REQUIRE(ds.examples.size() == 800);
  std::map<int, int> counts;
  for (const auto& ex : ds.examples) counts[ex.label]++;
  REQUIRE(counts.size() == 8);
  for (const auto& [label, c] : counts) CHECK(c == 100);

  // both splits individually balanced: 640 and 160 divide by 8
  std::map<int, int> train_counts;
  for (size_t i = 0; i < ds.n_train(); ++i) train_counts[ds.train(i).label]++;
  for (const auto& [label, c] : train_counts) CHECK(c == 80);
}

TEST_CASE("generation balance within one example otherwise") {
  auto m = tiny_manifest(7, 3, 3);
  auto ds = generate_dataset(m);
  std::map<int, int> counts;
  for (const auto& ex : ds.examples) counts[ex.label]++;
  int lo = 1 << 30, hi = 0;
  for (const auto& [label, c] : counts) {
    lo = std::min(lo, c);
    hi = std::max(hi, c);
  }
  CHECK(hi - lo <= 1);
}

TEST_CASE("same master seed reproduces the corpus bit-exactly") {
  auto m = tiny_manifest(40, 10);
  auto a = generate_dataset(m);
  auto b = generate_dataset(m);
  CHECK(datasets_equal(a, b));

  m.master_seed = 2025;
  auto c = generate_dataset(m);
  CHECK(!datasets_equal(a, c));
}

TEST_CASE("split sizes and per-frame seeds are disjoint") {
  auto m = tiny_manifest(800, 200);
  auto ds = generate_dataset(m);
  CHECK(ds.n_train() == 800);
  CHECK(ds.n_test() == 200);
  std::vector<uint64_t> seeds;
  for (const auto& ex : ds.examples) seeds.push_back(ex.frame_seed);
  std::sort(seeds.begin(), seeds.end());
  CHECK(std::adjacent_find(seeds.begin(), seeds.end()) == seeds.end());
}

TEST_CASE("clean_tx payload is f32-quantized at generation") {
  auto ds = generate_dataset(tiny_manifest(8, 2));
  for (const auto& ex : ds.examples) {
    for (const auto& sym : ex.clean_tx.symbols)
      for (const auto& v : sym) {
        CHECK(v.real() == static_cast<double>(static_cast<float>(v.real())));
        CHECK(v.imag() == static_cast<double>(static_cast<float>(v.imag())));
      }
    for (double p : ex.clean_tx.per_symbol_phase)
      CHECK(p == static_cast<double>(static_cast<float>(p)));
  }
}

TEST_CASE("per-frame snr draws come from the grid") {
  auto m = tiny_manifest(60, 20);
  m.snr_grid_db = {-10.0, 0.0, 10.0, 20.0};
  auto ds = generate_dataset(m);
  std::map<float, int> seen;
  for (const auto& ex : ds.examples) seen[ex.snr_db]++;
  for (const auto& [snr, count] : seen) {
    bool in_grid = false;
    for (double g : m.snr_grid_db) in_grid |= (static_cast<float>(g) == snr);
    CHECK(in_grid);
  }
  CHECK(seen.size() == 4);  // 80 draws hit all 4 grid points w.h.p.
}

TEST_CASE("save then load is the identity") {
  TempDir tmp;
  auto m = tiny_manifest(24, 8);
  m.snr_grid_db = {0.0, 10.0};
  auto ds = generate_dataset(m);
  ds.manifest.poison = PoisonMetadata{3, "abc123", {1, 5, 9}};

  const std::string path = (tmp.path / "ds.bin").string();
  save_dataset(ds, path);
  auto back = load_dataset(path);
  CHECK(datasets_equal(ds, back));
  REQUIRE(back.manifest.poison.has_value());
  CHECK(back.manifest.poison->y_tar == 3);
  CHECK(back.manifest.poison->trigger_id == "abc123");
  CHECK(back.manifest.poison->poisoned_indices == std::vector<uint32_t>{1, 5, 9});
  CHECK(manifest_to_json(back.manifest) == manifest_to_json(ds.manifest));
}

TEST_CASE("distinct load failures") {
  TempDir tmp;
  auto ds = generate_dataset(tiny_manifest(8, 2));
  const std::string path = (tmp.path / "ds.bin").string();
  save_dataset(ds, path);
  const std::string good = read_file_bytes(path);

  SUBCASE("payload corruption trips the checksum") {
    std::string bad = good;
    bad[bad.size() / 2] ^= 0x40;
    write_file_bytes(path, bad);
    CHECK_THROWS_AS(load_dataset(path), ChecksumError);
  }
  SUBCASE("version bump is reported as such") {
    std::string bad = good;
    bad[4] += 1;
    write_file_bytes(path, bad);
    CHECK_THROWS_AS(load_dataset(path), VersionMismatchError);
  }
  SUBCASE("truncation is reported as such") {
    write_file_bytes(path, good.substr(0, good.size() - 100));
    CHECK_THROWS_AS(load_dataset(path), TruncatedFileError);
  }
  SUBCASE("foreign file is rejected on magic") {
    std::string bad = good;
    bad[0] = 'Z';
    write_file_bytes(path, bad);
    CHECK_THROWS_AS(load_dataset(path), FormatError);
  }
}

TEST_CASE("rechannel is seed-deterministic") {
  auto ds = generate_dataset(tiny_manifest(8, 2));
  const auto& ex = ds.examples[0];
  auto a = rechannel(ex.clean_tx, ds.manifest.ofdm, ds.manifest.channel, 5.0, 99);
  auto b = rechannel(ex.clean_tx, ds.manifest.ofdm, ds.manifest.channel, 5.0, 99);
  auto c = rechannel(ex.clean_tx, ds.manifest.ofdm, ds.manifest.channel, 5.0, 100);
  CHECK(a == b);
  CHECK(a != c);
  CHECK(a.size() == ex.x.size());
}
