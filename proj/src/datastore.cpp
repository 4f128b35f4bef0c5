#include "amcbench/datastore.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace amcbench {

namespace {

constexpr uint32_t kDatasetVersion = 1;
constexpr char kMagic[4] = {'A', 'M', 'C', 'B'};

void quantize_frame(IqFrame& f) {
  for (auto& sym : f.symbols)
    for (auto& v : sym) v = quantize_f32(v);
  for (auto& p : f.per_symbol_phase) p = quantize_f32(p);
}

}  // namespace

void DatasetManifest::validate() const {
  ofdm.validate();
  channel.validate(ofdm);
  if (classes.empty()) throw std::invalid_argument("class list is empty");
  if (n_train + n_test == 0) throw std::invalid_argument("dataset size is zero");
  for (double s : snr_grid_db)
    if (!std::isfinite(s) && s != kInfSnr)
      throw std::invalid_argument("snr grid holds a non-finite value");
}

LabeledDataset generate_dataset(const DatasetManifest& manifest) {
  manifest.validate();
  const uint32_t n = manifest.n_train + manifest.n_test;
  const size_t n_classes = manifest.classes.size();

  LabeledDataset ds;
  ds.manifest = manifest;
  ds.examples.resize(n);

  for (uint32_t i = 0; i < n; ++i) {
    LabeledExample& ex = ds.examples[i];
    ex.label = static_cast<uint16_t>(i % n_classes);
    ex.frame_seed = derive_seed(manifest.master_seed, "frame", i);

    Rng rng(ex.frame_seed);
    const SchemeInfo& info = constellation(manifest.classes[ex.label]);
    std::vector<std::vector<cdouble>> grid(
        manifest.ofdm.symbols_per_frame,
        std::vector<cdouble>(manifest.ofdm.n_subcarriers));
    for (auto& row : grid)
      for (auto& v : row) v = info.points[rng.uniform_int(info.points.size())];

    IqFrame frame = assemble_frame(grid, manifest.ofdm, rng);
    frame = rapp_pa(frame, manifest.pa);
    quantize_frame(frame);
    ex.clean_tx = std::move(frame);

    Rng chan(derive_seed(manifest.master_seed, "chan", i));
    double snr = manifest.channel.snr_db;
    if (!manifest.snr_grid_db.empty())
      snr = manifest.snr_grid_db[chan.uniform_int(manifest.snr_grid_db.size())];
    ex.snr_db = static_cast<float>(snr);

    ChannelConfig ch = manifest.channel;
    ch.snr_db = snr;
    IqFrame rx = apply_channel(ex.clean_tx, ch, manifest.ofdm, chan);
    ex.x = receive(rx, manifest.ofdm);
  }
  return ds;
}

std::vector<float> rechannel(const IqFrame& clean_tx, const OfdmConfig& ofdm,
                             const ChannelConfig& channel, double snr_db,
                             uint64_t chan_seed) {
  Rng chan(chan_seed);
  ChannelConfig ch = channel;
  ch.snr_db = snr_db;
  IqFrame rx = apply_channel(clean_tx, ch, ofdm, chan);
  return receive(rx, ofdm);
}

// --- serialization ---------------------------------------------------------

nlohmann::json manifest_to_json(const DatasetManifest& m) {
  nlohmann::json j;
  j["ofdm"] = {{"n_subcarriers", m.ofdm.n_subcarriers},
               {"cp_len", m.ofdm.cp_len},
               {"symbols_per_frame", m.ofdm.symbols_per_frame}};
  j["channel"] = {{"tap_delays", m.channel.tap_delays},
                  {"tap_powers", m.channel.tap_powers},
                  {"snr_db", m.channel.snr_db}};
  j["pa"] = {{"rapp_smoothness", m.pa.rapp_smoothness},
             {"ibo_db", m.pa.ibo_db}};
  std::vector<std::string> names;
  for (auto c : m.classes) names.emplace_back(scheme_name(c));
  j["classes"] = names;
  j["n_train"] = m.n_train;
  j["n_test"] = m.n_test;
  j["master_seed"] = m.master_seed;
  j["snr_grid_db"] = m.snr_grid_db;
  if (m.poison) {
    j["poison"] = {{"y_tar", m.poison->y_tar},
                   {"trigger_id", m.poison->trigger_id},
                   {"poisoned_indices", m.poison->poisoned_indices}};
  }
  return j;
}

DatasetManifest manifest_from_json(const nlohmann::json& j) {
  DatasetManifest m;
  m.ofdm.n_subcarriers = j.at("ofdm").at("n_subcarriers").get<uint32_t>();
  m.ofdm.cp_len = j.at("ofdm").at("cp_len").get<uint32_t>();
  m.ofdm.symbols_per_frame = j.at("ofdm").at("symbols_per_frame").get<uint32_t>();
  m.channel.tap_delays = j.at("channel").at("tap_delays").get<std::vector<uint32_t>>();
  m.channel.tap_powers = j.at("channel").at("tap_powers").get<std::vector<double>>();
  m.channel.snr_db = j.at("channel").at("snr_db").get<double>();
  m.pa.rapp_smoothness = j.at("pa").at("rapp_smoothness").get<double>();
  m.pa.ibo_db = j.at("pa").at("ibo_db").get<double>();
  for (const auto& name : j.at("classes")) {
    auto s = scheme_from_name(name.get<std::string>());
    if (!s) throw FormatError("unknown scheme in manifest: " + name.get<std::string>());
    m.classes.push_back(*s);
  }
  m.n_train = j.at("n_train").get<uint32_t>();
  m.n_test = j.at("n_test").get<uint32_t>();
  m.master_seed = j.at("master_seed").get<uint64_t>();
  m.snr_grid_db = j.at("snr_grid_db").get<std::vector<double>>();
  if (j.contains("poison")) {
    PoisonMetadata p;
    p.y_tar = j.at("poison").at("y_tar").get<uint32_t>();
    p.trigger_id = j.at("poison").at("trigger_id").get<std::string>();
    p.poisoned_indices =
        j.at("poison").at("poisoned_indices").get<std::vector<uint32_t>>();
    m.poison = std::move(p);
  }
  return m;
}

std::string read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open file: " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  return bytes;
}

void write_file_bytes(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open file for writing: " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("short write: " + path);
}

void save_dataset(const LabeledDataset& ds, const std::string& path) {
  const auto& m = ds.manifest;
  const uint32_t sym_len = m.ofdm.symbol_len();

  ByteWriter w;
  w.put_bytes(kMagic, 4);
  w.put_u32(kDatasetVersion);
  w.put_u32(static_cast<uint32_t>(m.classes.size()));
  w.put_u32(m.ofdm.symbols_per_frame);
  w.put_u32(m.ofdm.n_subcarriers);
  w.put_u32(m.ofdm.cp_len);
  w.put_u32(m.n_train);
  w.put_u32(m.n_test);
  w.put_u64(m.master_seed);

  for (const auto& ex : ds.examples) {
    w.put_u16(ex.label);
    w.put_u64(ex.frame_seed);
    w.put_f32(ex.snr_db);
    for (double p : ex.clean_tx.per_symbol_phase)
      w.put_f32(static_cast<float>(p));
    for (const auto& sym : ex.clean_tx.symbols) {
      if (sym.size() != sym_len)
        throw std::invalid_argument("clean_tx symbol length mismatch on save");
      for (const auto& v : sym) {
        w.put_f32(static_cast<float>(v.real()));
        w.put_f32(static_cast<float>(v.imag()));
      }
    }
    for (float f : ex.x) w.put_f32(f);
  }

  std::string bytes = w.bytes();
  const uint64_t checksum = fnv1a(bytes.data(), bytes.size());
  ByteWriter tail;
  tail.put_u64(checksum);
  bytes += tail.bytes();

  write_file_bytes(path, bytes);
  write_file_bytes(path + ".manifest.json", manifest_to_json(m).dump(2) + "\n");
}

LabeledDataset load_dataset(const std::string& path) {
  const std::string bytes = read_file_bytes(path);

  ByteReader header(bytes.data(), bytes.size());
  char magic[4];
  header.get_bytes(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0)
    throw FormatError("bad dataset magic");
  const uint32_t version = header.get_u32();
  if (version != kDatasetVersion)
    throw VersionMismatchError("dataset format version " + std::to_string(version) +
                               ", expected " + std::to_string(kDatasetVersion));
  const uint32_t n_classes = header.get_u32();
  const uint32_t m_sym = header.get_u32();
  const uint32_t n_sub = header.get_u32();
  const uint32_t cp = header.get_u32();
  const uint32_t n_train = header.get_u32();
  const uint32_t n_test = header.get_u32();
  const uint64_t seed = header.get_u64();

  const uint32_t sym_len = n_sub + cp;
  const size_t per_example = 2 + 8 + 4 + size_t(m_sym) * 4 +
                             size_t(m_sym) * sym_len * 8 +
                             size_t(m_sym) * n_sub * 2 * 4;
  const size_t expected =
      header.position() + (size_t(n_train) + n_test) * per_example + 8;
  if (bytes.size() < expected)
    throw TruncatedFileError("dataset file truncated: " +
                             std::to_string(bytes.size()) + " of " +
                             std::to_string(expected) + " bytes");
  if (bytes.size() > expected)
    throw FormatError("trailing bytes after dataset payload");

  const uint64_t stored = ByteReader(bytes.data() + bytes.size() - 8, 8).get_u64();
  const uint64_t actual = fnv1a(bytes.data(), bytes.size() - 8);
  if (stored != actual) throw ChecksumError("dataset checksum mismatch");

  DatasetManifest m = manifest_from_json(
      nlohmann::json::parse(read_file_bytes(path + ".manifest.json")));
  if (n_classes != m.classes.size() || m_sym != m.ofdm.symbols_per_frame ||
      n_sub != m.ofdm.n_subcarriers || cp != m.ofdm.cp_len ||
      n_train != m.n_train || n_test != m.n_test || seed != m.master_seed)
    throw FormatError("dataset header disagrees with manifest sidecar");

  ByteReader r(bytes.data() + header.position(),
               bytes.size() - header.position() - 8);
  LabeledDataset ds;
  ds.manifest = std::move(m);
  ds.examples.resize(n_train + n_test);
  for (auto& ex : ds.examples) {
    ex.label = r.get_u16();
    if (ex.label >= n_classes) throw FormatError("label out of range");
    ex.frame_seed = r.get_u64();
    ex.snr_db = r.get_f32();
    ex.clean_tx.per_symbol_phase.resize(m_sym);
    for (auto& p : ex.clean_tx.per_symbol_phase) p = r.get_f32();
    ex.clean_tx.symbols.assign(m_sym, std::vector<cdouble>(sym_len));
    for (auto& sym : ex.clean_tx.symbols)
      for (auto& v : sym) {
        const double re = r.get_f32();
        const double im = r.get_f32();
        v = {re, im};
      }
    ex.x.resize(static_cast<size_t>(m_sym) * n_sub * 2);
    for (auto& f : ex.x) f = r.get_f32();
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes after last example");
  return ds;
}

}  // namespace amcbench
