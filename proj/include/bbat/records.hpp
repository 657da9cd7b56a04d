#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace bbat {

using FieldValue = std::variant<std::int64_t, double, std::string>;

/// One row of an experiment log: coordinates, the producing run's config
/// hash, and named measurements in a stable order.
struct MetricsRecord {
  std::string config_hash;
  std::int64_t epoch = 0;
  std::int64_t step = 0;
  std::vector<std::pair<std::string, FieldValue>> fields;

  MetricsRecord& set(const std::string& name, FieldValue value);
  const FieldValue* find(const std::string& name) const;
  double number(const std::string& name) const;

  friend bool operator==(const MetricsRecord&, const MetricsRecord&) = default;
};

enum class RecordFormat { Csv, Json };

/// CSV: header config_hash,epoch,step,<fields>; strings are always quoted,
/// numbers never are. JSON: an array of flat objects with the same keys.
/// All records must carry the same field names in the same order.
void emit_metrics(std::span<const MetricsRecord> records, const std::filesystem::path& path, RecordFormat format);

std::vector<MetricsRecord> load_metrics(const std::filesystem::path& path, RecordFormat format);

/// Plain table for single-purpose CSV artifacts (same cell formatting as above).
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<FieldValue>> rows;
};

void write_table_csv(const Table& table, const std::filesystem::path& path);

/// Shortest decimal that round-trips; integral values keep a ".0".
std::string format_double(double v);

}  // namespace bbat
