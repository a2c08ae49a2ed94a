#include "ldr/dataset.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "ldr/errors.hpp"

namespace ldr {

namespace {

struct RawRow {
  double label;
  std::vector<std::pair<std::size_t, double>> entries;
};

double parse_number(std::string_view token, std::size_t line, const char* what) {
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc() || ptr != token.data() + token.size() || !std::isfinite(v))
    throw ParseError(std::string("malformed ") + what + " '" + std::string(token) + "'", line);
  return v;
}

std::size_t parse_index(std::string_view token, std::size_t line) {
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc() || ptr != token.data() + token.size() || v == 0)
    throw ParseError("malformed feature index '" + std::string(token) + "'", line);
  return v;
}

void parse_rows(std::istream& in, std::vector<RawRow>& rows) {
  std::string text;
  std::size_t line_no = 0;
  while (std::getline(in, text)) {
    ++line_no;
    std::string_view line(text);
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    auto next_token = [&line]() {
      const auto start = line.find_first_not_of(" \t\r");
      if (start == std::string_view::npos) {
        line = {};
        return std::string_view{};
      }
      line.remove_prefix(start);
      const auto end = std::min(line.find_first_of(" \t\r"), line.size());
      const std::string_view tok = line.substr(0, end);
      line.remove_prefix(end);
      return tok;
    };
    const std::string_view label_tok = next_token();
    if (label_tok.empty()) continue;
    RawRow row{parse_number(label_tok, line_no, "label"), {}};
    std::size_t last = 0;
    for (std::string_view tok = next_token(); !tok.empty(); tok = next_token()) {
      const auto colon = tok.find(':');
      if (colon == std::string_view::npos) throw ParseError("expected idx:value, got '" + std::string(tok) + "'", line_no);
      const std::size_t idx = parse_index(tok.substr(0, colon), line_no);
      if (idx <= last) throw ParseError("feature indices must be strictly increasing", line_no);
      last = idx;
      row.entries.emplace_back(idx, parse_number(tok.substr(colon + 1), line_no, "feature value"));
    }
    rows.push_back(std::move(row));
  }
}

Dataset assemble(const std::vector<RawRow>& rows, const std::string& name) {
  if (rows.empty()) throw ParseError("no data rows", 0);
  Dataset data;
  data.name = name;
  data.n = rows.size();
  std::map<double, std::size_t> classes;
  for (const RawRow& r : rows) {
    classes.emplace(r.label, 0);
    if (!r.entries.empty()) data.d = std::max(data.d, r.entries.back().first);
  }
  data.d = std::max<std::size_t>(data.d, 1);
  for (auto& [label, index] : classes) {
    index = data.label_table.size();
    data.label_table.push_back(label);
  }
  data.K = classes.size();
  data.features.assign(data.n * data.d, 0.0);
  data.labels.resize(data.n);
  data.probe.assign(data.n, 0);
  for (std::size_t i = 0; i < data.n; ++i) {
    data.labels[i] = classes.at(rows[i].label);
    for (const auto& [idx, v] : rows[i].entries) data.features[i * data.d + idx - 1] = v;
  }
  return data;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

bool get_u64(std::istream& in, std::uint64_t& v) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) return false;
  v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return true;
}

void put_f64(std::ostream& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

bool get_f64(std::istream& in, double& v) {
  std::uint64_t bits = 0;
  if (!get_u64(in, bits)) return false;
  v = std::bit_cast<double>(bits);
  return true;
}

constexpr char kCacheMagic[8] = {'L', 'D', 'R', 'D', 'A', 'T', 'A', '1'};

}  // namespace

void Dataset::validate() const {
  if (n == 0 || d == 0) throw DomainError("dataset " + name + " is empty");
  if (features.size() != n * d || labels.size() != n) throw DomainError("dataset " + name + " has inconsistent shapes");
  if (label_table.size() != K) throw DomainError("dataset " + name + " label table does not match K");
  for (std::size_t y : labels)
    if (y >= K) throw DomainError("dataset " + name + " has a label outside [0, K)");
}

std::optional<std::size_t> Dataset::class_of(double original_label) const {
  const auto it = std::find(label_table.begin(), label_table.end(), original_label);
  if (it == label_table.end()) return std::nullopt;
  return static_cast<std::size_t>(it - label_table.begin());
}

Dataset subset(const Dataset& data, std::span<const std::size_t> idx) {
  Dataset out;
  out.name = data.name;
  out.n = idx.size();
  out.d = data.d;
  out.K = data.K;
  out.label_table = data.label_table;
  out.features.reserve(out.n * out.d);
  for (std::size_t i : idx) {
    if (i >= data.n) throw DomainError("subset index out of range");
    const auto r = data.row(i);
    out.features.insert(out.features.end(), r.begin(), r.end());
    out.labels.push_back(data.labels[i]);
    out.probe.push_back(i < data.probe.size() ? data.probe[i] : 0);
  }
  return out;
}

Dataset parse_libsvm(std::istream& in, const std::string& name) {
  std::vector<RawRow> rows;
  parse_rows(in, rows);
  return assemble(rows, name);
}

Dataset load_libsvm(const std::vector<std::filesystem::path>& files, const std::string& name) {
  std::vector<RawRow> rows;
  for (const auto& path : files) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path.string());
    try {
      parse_rows(in, rows);
    } catch (const ParseError& e) {
      throw ParseError(path.string() + ": " + e.what(), e.line());
    }
  }
  return assemble(rows, name);
}

std::uint64_t fnv1a64(std::span<const unsigned char> bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001b3ull;
  }
  return h;
}

Dataset load_libsvm_cached(const std::vector<std::filesystem::path>& files, const std::filesystem::path& cache_dir,
                           const std::string& name) {
  std::uint64_t key = 0xcbf29ce484222325ull;
  for (const auto& path : files) {
    const std::string bytes = read_file(path);
    key = fnv1a64({reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size()}, key);
  }
  std::ostringstream file_name;
  file_name << std::hex << std::setw(16) << std::setfill('0') << key << ".bin";
  const auto cache_path = cache_dir / file_name.str();
  if (auto cached = read_dataset_cache(cache_path, key)) {
    cached->name = name;
    return *std::move(cached);
  }
  Dataset data = load_libsvm(files, name);
  std::error_code ec;
  std::filesystem::create_directories(cache_dir, ec);
  if (!ec) write_dataset_cache(data, key, cache_path);
  return data;
}

void write_dataset_cache(const Dataset& data, std::uint64_t key, const std::filesystem::path& path) {
  data.validate();
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + tmp.string());
    out.write(kCacheMagic, sizeof kCacheMagic);
    put_u64(out, data.n);
    put_u64(out, data.d);
    put_u64(out, data.K);
    put_u64(out, key);
    for (double v : data.label_table) put_f64(out, v);
    for (std::size_t y : data.labels) put_u64(out, y);
    for (double v : data.features) put_f64(out, v);
    if (!out) throw ConfigError("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::optional<Dataset> read_dataset_cache(const std::filesystem::path& path, std::uint64_t key) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kCacheMagic, 8) != 0) return std::nullopt;
  std::uint64_t n = 0, d = 0, K = 0, stored = 0;
  if (!get_u64(in, n) || !get_u64(in, d) || !get_u64(in, K) || !get_u64(in, stored) || stored != key) return std::nullopt;
  const auto expected = 40 + 8 * (K + n + n * d);
  std::error_code ec;
  if (std::filesystem::file_size(path, ec) != expected || ec) return std::nullopt;
  Dataset data;
  data.n = n;
  data.d = d;
  data.K = K;
  data.label_table.resize(K);
  data.labels.resize(n);
  data.features.resize(n * d);
  data.probe.assign(n, 0);
  for (double& v : data.label_table)
    if (!get_f64(in, v)) return std::nullopt;
  for (std::size_t& y : data.labels) {
    std::uint64_t v = 0;
    if (!get_u64(in, v)) return std::nullopt;
    y = v;
  }
  for (double& v : data.features)
    if (!get_f64(in, v)) return std::nullopt;
  try {
    data.validate();
  } catch (const DomainError&) {
    return std::nullopt;
  }
  return data;
}

}  // namespace ldr
