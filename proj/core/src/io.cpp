#include "fblab/io.hpp"

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "fblab/types.hpp"

namespace fblab {

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double d) {
  std::uint64_t bits;
  std::memcpy(&bits, &d, sizeof bits);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

[[noreturn]] void fail_at(std::size_t offset, const std::string& what) {
  throw FormatError(what + " at byte offset " + std::to_string(offset));
}

struct ByteReader {
  const std::string& buf;
  std::size_t pos = 0;

  std::uint32_t u32(const char* what) {
    if (pos + 4 > buf.size()) fail_at(pos, std::string("file truncated reading ") + what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
    }
    pos += 4;
    return v;
  }

  double f64(const char* what) {
    if (pos + 8 > buf.size()) fail_at(pos, std::string("file truncated reading ") + what);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) {
      bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
    }
    pos += 8;
    double d;
    std::memcpy(&d, &bits, sizeof d);
    return d;
  }
};

// Writes bytes to path via a sibling temp file, then renames over the
// target.
void atomic_write(const std::string& path, const std::string& bytes) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  const fs::path tmp = target.parent_path() / (target.filename().string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw FormatError("short write to " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp);
    throw FormatError("cannot rename " + tmp.string() + " to " + path + ": " + ec.message());
  }
}

std::string trim(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

[[noreturn]] void config_fail(int line, const std::string& what) {
  throw ContractError("config line " + std::to_string(line) + ": " + what);
}

double parse_double(const std::string& text, int line, const std::string& key) {
  const std::string v = trim(text);
  if (v.empty()) config_fail(line, "empty value for " + key);
  char* end = nullptr;
  const double d = std::strtod(v.c_str(), &end);
  if (end != v.c_str() + v.size()) {
    config_fail(line, "value for " + key + " is not a number: '" + v + "'");
  }
  return d;
}

}  // namespace

void save_snapshot(const SpaceTimeField& u, const std::string& path) {
  if (u.empty()) throw ContractError("save_snapshot: empty field");
  const Params& P = u.params();
  std::string bytes;
  bytes.reserve(64 + u.data().size() * 8);
  bytes += "FBL1";
  put_u32(bytes, 1);
  put_u32(bytes, static_cast<std::uint32_t>(P.n));
  put_u32(bytes, static_cast<std::uint32_t>(P.m));
  put_u32(bytes, static_cast<std::uint32_t>(P.n + 1));
  put_u32(bytes, static_cast<std::uint32_t>(u.nt()));
  for (int a = 0; a < P.n; ++a) put_u32(bytes, static_cast<std::uint32_t>(u.nx(a)));
  put_f64(bytes, P.q);
  put_f64(bytes, u.time_axis().lo);
  put_f64(bytes, u.time_axis().hi);
  for (int a = 0; a < P.n; ++a) {
    put_f64(bytes, u.space_axis(a).lo);
    put_f64(bytes, u.space_axis(a).hi);
  }
  for (double d : u.data()) put_f64(bytes, d);
  atomic_write(path, bytes);
}

SpaceTimeField load_snapshot(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path + " for reading");
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  ByteReader r{buf};
  if (buf.size() < 4 || buf.compare(0, 4, "FBL1") != 0) fail_at(0, "bad magic (want FBL1)");
  r.pos = 4;
  const std::size_t at_version = r.pos;
  const std::uint32_t version = r.u32("version");
  if (version != 1) {
    fail_at(at_version, "unsupported version " + std::to_string(version) + " (want 1)");
  }
  const std::size_t at_n = r.pos;
  const std::uint32_t n = r.u32("dimension");
  if (n < 1 || n > kMaxDim) fail_at(at_n, "dimension " + std::to_string(n) + " out of range");
  const std::size_t at_m = r.pos;
  const std::uint32_t m = r.u32("component count");
  if (m < 1 || m > kMaxComp) {
    fail_at(at_m, "component count " + std::to_string(m) + " out of range");
  }
  const std::size_t at_axes = r.pos;
  const std::uint32_t axes = r.u32("axis count");
  if (axes != n + 1) {
    fail_at(at_axes, "axis count " + std::to_string(axes) + " does not match dimension");
  }
  std::vector<std::uint32_t> counts(axes);
  std::size_t nodes = 1;
  for (std::uint32_t a = 0; a < axes; ++a) {
    const std::size_t at = r.pos;
    counts[a] = r.u32("axis sample count");
    if (counts[a] < 2) fail_at(at, "axis sample count " + std::to_string(counts[a]) + " < 2");
    nodes *= counts[a];
  }
  const std::size_t at_q = r.pos;
  const double q = r.f64("exponent q");
  if (!(q >= 0.0) || !(q < 1.0)) fail_at(at_q, "exponent q out of [0, 1)");
  Axis taxis;
  SpaceAxes xaxes{};
  for (std::uint32_t a = 0; a < axes; ++a) {
    const std::size_t at = r.pos;
    const double lo = r.f64("axis min");
    const double hi = r.f64("axis max");
    if (!(lo < hi)) fail_at(at, "axis min is not below axis max");
    Axis ax = make_axis(lo, hi, static_cast<int>(counts[a]));
    if (a == 0) {
      taxis = ax;
    } else {
      xaxes[a - 1] = ax;
    }
  }
  const std::size_t header_end = r.pos;
  const std::size_t want = nodes * m * 8;
  if (buf.size() != header_end + want) {
    fail_at(buf.size() < header_end + want ? buf.size() : header_end + want,
            "payload size mismatch (want " + std::to_string(want) + " bytes)");
  }
  std::vector<double> values(nodes * m);
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = r.f64("sample");
  const Params P = make_params(q, static_cast<int>(n), static_cast<int>(m));
  return SpaceTimeField::from_values(P, taxis, xaxes, std::move(values));
}

bool Config::has(const std::string& key) const { return find(key) != nullptr; }

const ConfigEntry* Config::find(const std::string& key) const {
  for (const ConfigEntry& e : entries) {
    if (e.key == key) return &e;
  }
  return nullptr;
}

std::string Config::get(const std::string& key, const std::string& fallback) const {
  const ConfigEntry* e = find(key);
  return e ? e->value : fallback;
}

double Config::get_num(const std::string& key, double fallback) const {
  const ConfigEntry* e = find(key);
  if (!e) return fallback;
  return parse_double(e->value, e->line, key);
}

long Config::get_int(const std::string& key, long fallback) const {
  const ConfigEntry* e = find(key);
  if (!e) return fallback;
  const std::string v = trim(e->value);
  char* end = nullptr;
  const long x = std::strtol(v.c_str(), &end, 10);
  if (v.empty() || end != v.c_str() + v.size()) {
    config_fail(e->line, "value for " + key + " is not an integer: '" + v + "'");
  }
  return x;
}

Config parse_config(const std::string& text) {
  Config cfg;
  cfg.text = text;
  std::string section;
  int line = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    ++line;
    std::size_t nl = text.find('\n', start);
    if (nl == std::string::npos) nl = text.size();
    std::string raw = text.substr(start, nl - start);
    start = nl + 1;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    const std::size_t hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    const std::string ln = trim(raw);
    if (ln.empty()) {
      if (nl == text.size()) break;
      continue;
    }
    if (ln.front() == '[') {
      if (ln.back() != ']' || ln.size() < 3) config_fail(line, "malformed section header");
      section = trim(ln.substr(1, ln.size() - 2));
      if (section.empty()) config_fail(line, "empty section name");
      if (nl == text.size()) break;
      continue;
    }
    const std::size_t eq = ln.find('=');
    if (eq == std::string::npos) config_fail(line, "expected key = value");
    const std::string key = trim(ln.substr(0, eq));
    const std::string value = trim(ln.substr(eq + 1));
    if (key.empty()) config_fail(line, "empty key");
    ConfigEntry e;
    e.key = section.empty() ? key : section + "." + key;
    e.value = value;
    e.line = line;
    if (const ConfigEntry* prev = cfg.find(e.key)) {
      config_fail(line,
                  "duplicate key '" + e.key + "' (first at line " + std::to_string(prev->line) +
                      ")");
    }
    cfg.entries.push_back(e);
    if (nl == text.size()) break;
  }
  return cfg;
}

Config load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ContractError("cannot open config file " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_config(text);
}

std::vector<double> parse_number_list(const std::string& text) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t comma = text.find(',', start);
    if (comma == std::string::npos) comma = text.size();
    const std::string piece = trim(text.substr(start, comma - start));
    if (!piece.empty()) {
      char* end = nullptr;
      const double d = std::strtod(piece.c_str(), &end);
      if (end != piece.c_str() + piece.size()) {
        throw ContractError("not a number in list: '" + piece + "'");
      }
      out.push_back(d);
    }
    if (comma == text.size()) break;
    start = comma + 1;
  }
  return out;
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

void write_csv(const std::string& path, const std::string& comment,
               const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
  if (header.empty()) throw ContractError("write_csv: header row is mandatory");
  std::string out;
  out += "# " + comment + "\n";
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) out += ",";
    out += header[i];
  }
  out += "\n";
  char buf[40];
  for (const std::vector<double>& row : rows) {
    if (row.size() != header.size()) {
      throw ContractError("write_csv: row width does not match the header");
    }
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ",";
      std::snprintf(buf, sizeof buf, "%.17g", row[i]);
      out += buf;
    }
    out += "\n";
  }
  atomic_write(path, out);
}

void write_csv(const std::string& path, const std::string& comment,
               const std::vector<std::string>& header,
               const std::vector<std::string>& row_names,
               const std::vector<std::vector<double>>& rows) {
  if (header.empty()) throw ContractError("write_csv: header row is mandatory");
  if (row_names.size() != rows.size()) {
    throw ContractError("write_csv: one name per row is required");
  }
  std::string out;
  out += "# " + comment + "\n";
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) out += ",";
    out += header[i];
  }
  out += "\n";
  char buf[40];
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() + 1 != header.size()) {
      throw ContractError("write_csv: row width does not match the header");
    }
    out += row_names[r];
    for (double v : rows[r]) {
      out += ",";
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out += buf;
    }
    out += "\n";
  }
  atomic_write(path, out);
}

}  // namespace fblab
