// SPDX-License-Identifier: Apache-2.0
#include "jqg/datastore.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "jqg/errors.hpp"

namespace jqg::datastore {

namespace {

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out.insert(out.end(), b, b + n);
  }
  template <class U>
  void le(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { le(std::bit_cast<std::uint32_t>(v)); }
  std::vector<std::uint8_t> out;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : buf(b) {}
  void need(std::size_t n, const char* what) const {
    if (buf.size() - pos < n) throw SizeMismatch(std::string("truncated ") + what);
  }
  template <class U>
  U le(const char* what) {
    need(sizeof(U), what);
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<U>(buf[pos + i]) << (8 * i));
    pos += sizeof(U);
    return v;
  }
  float f32(const char* what) { return std::bit_cast<float>(le<std::uint32_t>(what)); }
  std::span<const std::uint8_t> buf;
  std::size_t pos = 0;
};

void check_magic(std::span<const std::uint8_t> bytes, const char* magic) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), magic, 4) != 0)
    throw BadMagic(std::string("expected magic ") + magic);
}

std::string fmt(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string fmt_fixed(double v, int digits) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, digits);
  return std::string(buf, r.ptr);
}

double parse_double(std::string_view s) {
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) s.remove_suffix(1);
  double v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size())
    throw FormatError("not a number: '" + std::string(s) + "'");
  return v;
}

}  // namespace

Dataset from_windows(std::span<const detector::JetWindow> windows) {
  Dataset d;
  d.channels = detector::kChannels;
  d.height = d.width = detector::kWindowSize;
  d.labels.reserve(windows.size());
  d.data.reserve(windows.size() * d.sample_size());
  for (const auto& w : windows) {
    if (!w.label) throw DomainError("window without a label cannot be stored");
    if (w.data.size() != d.sample_size()) throw ShapeError("window payload has the wrong size");
    d.labels.push_back(static_cast<std::uint8_t>(*w.label));
    d.data.insert(d.data.end(), w.data.begin(), w.data.end());
  }
  return d;
}

std::vector<detector::JetWindow> to_windows(const Dataset& dataset) {
  if (dataset.channels != detector::kChannels || dataset.height != detector::kWindowSize ||
      dataset.width != detector::kWindowSize)
    throw ShapeError("dataset samples are not 3x125x125 jet windows");
  std::vector<detector::JetWindow> out(dataset.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto s = dataset.sample(i);
    std::copy(s.begin(), s.end(), out[i].data.begin());
    out[i].label = static_cast<detector::JetLabel>(dataset.labels[i]);
  }
  return out;
}

std::vector<std::uint8_t> encode_dataset(const Dataset& d) {
  if (d.channels > 0xff || d.height > 0xffff || d.width > 0xffff || d.size() > 0xffffffffu)
    throw DomainError("dataset dimensions exceed the header fields");
  if (d.data.size() != d.size() * d.sample_size()) throw ShapeError("dataset payload length mismatch");
  Writer w;
  w.out.reserve(kDatasetHeaderBytes + d.size() * (1 + 4 * d.sample_size()));
  w.bytes("JQG1", 4);
  w.le<std::uint16_t>(kDatasetVersion);
  w.le<std::uint32_t>(static_cast<std::uint32_t>(d.size()));
  w.le<std::uint16_t>(static_cast<std::uint16_t>(d.height));
  w.le<std::uint16_t>(static_cast<std::uint16_t>(d.width));
  w.le<std::uint8_t>(static_cast<std::uint8_t>(d.channels));
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d.labels[i] > 1) throw DomainError("dataset labels must be 0 or 1");
    w.le<std::uint8_t>(d.labels[i]);
    for (float v : d.sample(i)) w.f32(v);
  }
  return std::move(w.out);
}

Dataset decode_dataset(std::span<const std::uint8_t> bytes) {
  check_magic(bytes, "JQG1");
  Reader r(bytes);
  r.pos = 4;
  const auto version = r.le<std::uint16_t>("header");
  if (version != kDatasetVersion) throw UnsupportedVersion("dataset version " + std::to_string(version));
  Dataset d;
  const std::uint64_t n = r.le<std::uint32_t>("header");
  d.height = r.le<std::uint16_t>("header");
  d.width = r.le<std::uint16_t>("header");
  d.channels = r.le<std::uint8_t>("header");
  const std::uint64_t expected = kDatasetHeaderBytes + n * (1 + 4 * static_cast<std::uint64_t>(d.sample_size()));
  if (bytes.size() != expected)
    throw SizeMismatch("dataset is " + std::to_string(bytes.size()) + " bytes, header implies " +
                       std::to_string(expected));
  d.labels.resize(n);
  d.data.resize(n * d.sample_size());
  float* out = d.data.data();
  for (std::size_t i = 0; i < n; ++i) {
    d.labels[i] = r.le<std::uint8_t>("sample");
    if (d.labels[i] > 1) throw FormatError("label " + std::to_string(d.labels[i]) + " is not 0 or 1");
    for (std::size_t j = 0; j < d.sample_size(); ++j) *out++ = r.f32("sample");
  }
  return d;
}

void write_dataset(const fs::path& path, const Dataset& dataset) { write_file(path, encode_dataset(dataset)); }

Dataset read_dataset(const fs::path& path) { return decode_dataset(read_file(path)); }

std::string format_stats(const preprocess::ChannelStats& s) {
  std::string out = "mu:";
  for (double v : s.mu) out += " " + fmt(v);
  out += "\nsigma:";
  for (double v : s.sigma) out += " " + fmt(v);
  return out + "\n";
}

preprocess::ChannelStats parse_stats(const std::string& text) {
  preprocess::ChannelStats s;
  bool have_mu = false, have_sigma = false;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream fields(line);
    std::string key;
    if (!(fields >> key)) continue;
    std::array<double, preprocess::kChannels>* dst = nullptr;
    if (key == "mu:") {
      dst = &s.mu;
      have_mu = true;
    } else if (key == "sigma:") {
      dst = &s.sigma;
      have_sigma = true;
    } else {
      throw FormatError("unexpected stats line: " + line);
    }
    std::string tok;
    std::size_t k = 0;
    while (fields >> tok) {
      if (k == preprocess::kChannels) throw FormatError("too many values on stats line");
      (*dst)[k++] = parse_double(tok);
    }
    if (k != preprocess::kChannels) throw FormatError("stats line needs three values");
  }
  if (!have_mu || !have_sigma) throw FormatError("stats file needs mu and sigma lines");
  for (double v : s.sigma)
    if (!(v > 0)) throw DegenerateChannel("stats file has a non-positive sigma");
  return s;
}

void write_stats(const fs::path& path, const preprocess::ChannelStats& stats) {
  write_text(path, format_stats(stats));
}

preprocess::ChannelStats read_stats(const fs::path& path) { return parse_stats(read_text(path)); }

Checkpoint to_checkpoint(const models::ParameterRegistry<float>& registry) {
  Checkpoint c;
  for (const auto& e : registry.entries())
    c.push_back({e.name, e.tensor.shape(), {e.tensor.values().begin(), e.tensor.values().end()}});
  return c;
}

void load_checkpoint(models::ParameterRegistry<float>& registry, const Checkpoint& checkpoint) {
  for (auto& e : registry.entries()) {
    const CheckpointEntry* found = nullptr;
    for (const auto& c : checkpoint)
      if (c.name == e.name) found = &c;
    if (!found) throw FormatError("checkpoint lacks parameter " + e.name);
    if (found->shape != e.tensor.shape())
      throw ShapeError("checkpoint shape " + ad::to_string(found->shape) + " for " + e.name +
                       " does not match model " + ad::to_string(e.tensor.shape()));
    std::copy(found->values.begin(), found->values.end(), e.tensor.data());
  }
  if (checkpoint.size() != registry.entries().size())
    throw FormatError("checkpoint has parameters the model does not");
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& checkpoint) {
  Writer w;
  w.bytes("JQGC", 4);
  w.le<std::uint16_t>(kCheckpointVersion);
  w.le<std::uint32_t>(static_cast<std::uint32_t>(checkpoint.size()));
  for (const auto& e : checkpoint) {
    if (e.values.size() != ad::numel(e.shape)) throw ShapeError("checkpoint entry " + e.name + " is inconsistent");
    w.le<std::uint32_t>(static_cast<std::uint32_t>(e.name.size()));
    w.bytes(e.name.data(), e.name.size());
    w.le<std::uint32_t>(static_cast<std::uint32_t>(e.shape.size()));
    for (std::size_t d : e.shape) w.le<std::uint32_t>(static_cast<std::uint32_t>(d));
    for (float v : e.values) w.f32(v);
  }
  return std::move(w.out);
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  check_magic(bytes, "JQGC");
  Reader r(bytes);
  r.pos = 4;
  const auto version = r.le<std::uint16_t>("header");
  if (version != kCheckpointVersion) throw UnsupportedVersion("checkpoint version " + std::to_string(version));
  const std::uint32_t count = r.le<std::uint32_t>("header");
  Checkpoint c;
  for (std::uint32_t i = 0; i < count; ++i) {
    CheckpointEntry e;
    const std::uint32_t len = r.le<std::uint32_t>("parameter name");
    r.need(len, "parameter name");
    e.name.assign(reinterpret_cast<const char*>(bytes.data() + r.pos), len);
    r.pos += len;
    const std::uint32_t rank = r.le<std::uint32_t>("parameter rank");
    r.need(static_cast<std::size_t>(rank) * 4, "parameter shape");
    for (std::uint32_t k = 0; k < rank; ++k) e.shape.push_back(r.le<std::uint32_t>("parameter shape"));
    const std::size_t n = ad::numel(e.shape);
    r.need(n * 4, "parameter data");
    e.values.resize(n);
    for (float& v : e.values) v = r.f32("parameter data");
    c.push_back(std::move(e));
  }
  if (r.pos != bytes.size()) throw SizeMismatch("trailing bytes after checkpoint");
  return c;
}

void write_checkpoint(const fs::path& path, const Checkpoint& checkpoint) {
  write_file(path, encode_checkpoint(checkpoint));
}

Checkpoint read_checkpoint(const fs::path& path) { return decode_checkpoint(read_file(path)); }

std::string format_metrics_csv(std::span<const CsvRow> rows) {
  const auto cell = [](const metrics::MeanStd& m) { return fmt_fixed(m.mean, 4) + "±" + fmt_fixed(m.std, 4); };
  std::string out = std::string(kCsvHeader) + "\n";
  for (const auto& r : rows) {
    if (r.model.find_first_of(",\n") != std::string::npos) throw DomainError("model name may not contain ',' or newline");
    out += r.model + "," + cell(r.report.accuracy) + "," + cell(r.report.precision) + "," +
           cell(r.report.recall) + "," + cell(r.report.f1) + "," + cell(r.report.roc_auc) + "," +
           std::to_string(r.params) + "," + fmt_fixed(r.train_seconds, 4) + "," + fmt_fixed(r.inference_ms, 4) + "\n";
  }
  return out;
}

std::vector<CsvRow> parse_metrics_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || (line != kCsvHeader && line != std::string(kCsvHeader) + "\r"))
    throw FormatError("metrics CSV header mismatch");
  const auto pair = [](std::string_view s) {
    const std::string_view pm = "±";
    const auto at = s.find(pm);
    if (at == std::string_view::npos) throw FormatError("cell is not mean±std: " + std::string(s));
    return metrics::MeanStd{parse_double(s.substr(0, at)), parse_double(s.substr(at + pm.size()))};
  };
  std::vector<CsvRow> rows;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    std::vector<std::string_view> cells;
    std::string_view rest = line;
    for (;;) {
      const auto comma = rest.find(',');
      cells.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (cells.size() != 9) throw FormatError("metrics CSV row needs 9 cells, got " + std::to_string(cells.size()));
    CsvRow r;
    r.model = std::string(cells[0]);
    r.report.accuracy = pair(cells[1]);
    r.report.precision = pair(cells[2]);
    r.report.recall = pair(cells[3]);
    r.report.f1 = pair(cells[4]);
    r.report.roc_auc = pair(cells[5]);
    r.params = static_cast<std::size_t>(parse_double(cells[6]));
    r.train_seconds = parse_double(cells[7]);
    r.inference_ms = parse_double(cells[8]);
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_metrics_csv(std::span<const CsvRow> rows, const fs::path& path) {
  write_text(path, format_metrics_csv(rows));
}

std::vector<std::uint8_t> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_file(const fs::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("write failed for " + path.string());
}

std::string read_text(const fs::path& path) {
  const auto bytes = read_file(path);
  return std::string(bytes.begin(), bytes.end());
}

void write_text(const fs::path& path, const std::string& text) {
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace jqg::datastore
