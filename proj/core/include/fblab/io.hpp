#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "fblab/field.hpp"

// Snapshot container, config parsing, and CSV emission.
//
// Snapshots use the FBL1 layout: bytes 0-3 are the magic "FBL1"; then
// little-endian u32 fields: version (= 1), n, m, axis count (= n + 1), and
// per-axis sample counts with time first; then little-endian f64 fields: q,
// then per-axis min and max in the same order; then the payload of
// little-endian f64 samples, row-major over (t, x1, ..., xn) with the m
// components fastest-varying.

namespace fblab {

// Malformed or truncated files. Messages name the byte offset at which the
// data stopped making sense.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Atomic write (temp file + rename), bit-exact round trip with
// load_snapshot.
void save_snapshot(const SpaceTimeField& u, const std::string& path);
SpaceTimeField load_snapshot(const std::string& path);

// Line-oriented config text: `[section]` headers, `key = value` pairs, `#`
// starts a comment anywhere. Keys are exposed as "section.key" (bare "key"
// before the first header). Duplicate keys are rejected.
struct ConfigEntry {
  std::string key;
  std::string value;
  int line = 0;
};

struct Config {
  std::vector<ConfigEntry> entries;
  std::string text;  // raw file contents, the hash input

  bool has(const std::string& key) const;
  const ConfigEntry* find(const std::string& key) const;
  // Lookups with a fallback for absent keys. Unparseable numerics throw
  // ContractError with the config line number.
  std::string get(const std::string& key, const std::string& fallback) const;
  double get_num(const std::string& key, double fallback) const;
  long get_int(const std::string& key, long fallback) const;
};

// Parse errors throw ContractError with a line-numbered message.
Config parse_config(const std::string& text);
Config load_config(const std::string& path);

// Comma-separated doubles ("0.125, 0.25, 0.5"). Throws ContractError on
// junk.
std::vector<double> parse_number_list(const std::string& text);

// FNV-1a, 64-bit. Stamps every CSV with the config it came from.
std::uint64_t fnv1a(const std::string& bytes);

// CSV file with a leading '#' comment line, a mandatory header row, and
// %.17g-formatted values, '\n' endings. Atomic like save_snapshot.
void write_csv(const std::string& path, const std::string& comment,
               const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

// Same, with a leading string column; header[0] names it.
void write_csv(const std::string& path, const std::string& comment,
               const std::vector<std::string>& header,
               const std::vector<std::string>& row_names,
               const std::vector<std::vector<double>>& rows);

}  // namespace fblab
