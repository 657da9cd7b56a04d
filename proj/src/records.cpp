#include "bbat/records.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace bbat {

MetricsRecord& MetricsRecord::set(const std::string& name, FieldValue value) {
  for (auto& [k, v] : fields) {
    if (k == name) {
      v = std::move(value);
      return *this;
    }
  }
  fields.emplace_back(name, std::move(value));
  return *this;
}

const FieldValue* MetricsRecord::find(const std::string& name) const {
  for (const auto& [k, v] : fields) {
    if (k == name) return &v;
  }
  return nullptr;
}

double MetricsRecord::number(const std::string& name) const {
  const FieldValue* v = find(name);
  if (!v) throw std::out_of_range("metrics record has no field '" + name + "'");
  if (const auto* i = std::get_if<std::int64_t>(v)) return static_cast<double>(*i);
  if (const auto* d = std::get_if<double>(v)) return *d;
  throw std::invalid_argument("metrics field '" + name + "' is not numeric");
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, res.ptr);
  if (s.find_first_of(".e") == std::string::npos) s += ".0";
  return s;
}

namespace {

const char* const kFixed[] = {"config_hash", "epoch", "step"};

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

void check_uniform(std::span<const MetricsRecord> records) {
  if (records.empty()) throw std::invalid_argument("emit_metrics: no records to write");
  const auto& first = records.front().fields;
  for (const auto& r : records) {
    bool same = r.fields.size() == first.size();
    for (std::size_t i = 0; same && i < first.size(); ++i) same = r.fields[i].first == first[i].first;
    if (!same) throw std::invalid_argument("emit_metrics: records do not share the same field layout");
  }
}

std::string format_field(const FieldValue& v) {
  if (const auto* i = std::get_if<std::int64_t>(&v)) return std::to_string(*i);
  if (const auto* d = std::get_if<double>(&v)) return format_double(*d);
  return quote(std::get<std::string>(v));
}

struct Cell {
  std::string text;
  bool quoted = false;
};

std::vector<Cell> split_csv_line(const std::string& line) {
  std::vector<Cell> cells;
  Cell cur;
  bool in_quotes = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.text += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        cur.text += c;
      }
    } else if (c == '"') {
      in_quotes = true;
      cur.quoted = true;
    } else if (c == ',') {
      cells.push_back(std::move(cur));
      cur = {};
    } else {
      cur.text += c;
    }
  }
  if (in_quotes) throw std::runtime_error("load_metrics: unterminated quote in CSV line");
  cells.push_back(std::move(cur));
  return cells;
}

FieldValue parse_cell(const Cell& cell) {
  if (cell.quoted) return cell.text;
  const std::string& t = cell.text;
  if (t == "nan") return std::nan("");
  if (t == "inf") return HUGE_VAL;
  if (t == "-inf") return -HUGE_VAL;
  if (t.find_first_of(".e") == std::string::npos) {
    std::int64_t i = 0;
    const auto res = std::from_chars(t.data(), t.data() + t.size(), i);
    if (res.ec == std::errc{} && res.ptr == t.data() + t.size()) return i;
  }
  double d = 0.0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), d);
  if (res.ec != std::errc{} || res.ptr != t.data() + t.size()) {
    throw std::runtime_error("load_metrics: unquoted CSV cell is not numeric: '" + t + "'");
  }
  return d;
}

void write_csv(std::span<const MetricsRecord> records, std::ostream& os) {
  os << "config_hash,epoch,step";
  for (const auto& [name, _] : records.front().fields) os << ',' << name;
  os << '\n';
  for (const auto& r : records) {
    os << quote(r.config_hash) << ',' << r.epoch << ',' << r.step;
    for (const auto& [_, v] : r.fields) os << ',' << format_field(v);
    os << '\n';
  }
}

std::vector<MetricsRecord> read_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("load_metrics: empty CSV");
  const auto header = split_csv_line(line);
  if (header.size() < 3) throw std::runtime_error("load_metrics: CSV header is missing fixed columns");
  for (std::size_t i = 0; i < 3; ++i) {
    if (header[i].text != kFixed[i]) throw std::runtime_error("load_metrics: unexpected CSV header column " + header[i].text);
  }
  std::vector<MetricsRecord> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) throw std::runtime_error("load_metrics: CSV row width does not match header");
    MetricsRecord r;
    r.config_hash = cells[0].text;
    r.epoch = std::get<std::int64_t>(parse_cell(cells[1]));
    r.step = std::get<std::int64_t>(parse_cell(cells[2]));
    for (std::size_t i = 3; i < cells.size(); ++i) r.fields.emplace_back(header[i].text, parse_cell(cells[i]));
    out.push_back(std::move(r));
  }
  return out;
}

void write_json(std::span<const MetricsRecord> records, std::ostream& os) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& r : records) {
    nlohmann::ordered_json obj;
    obj["config_hash"] = r.config_hash;
    obj["epoch"] = r.epoch;
    obj["step"] = r.step;
    for (const auto& [name, v] : r.fields) {
      std::visit([&](const auto& x) { obj[name] = x; }, v);
    }
    arr.push_back(std::move(obj));
  }
  os << arr.dump(2) << '\n';
}

std::vector<MetricsRecord> read_json(std::istream& is) {
  const auto arr = nlohmann::ordered_json::parse(is);
  if (!arr.is_array()) throw std::runtime_error("load_metrics: JSON metrics must be an array");
  std::vector<MetricsRecord> out;
  for (const auto& obj : arr) {
    MetricsRecord r;
    r.config_hash = obj.at("config_hash").get<std::string>();
    r.epoch = obj.at("epoch").get<std::int64_t>();
    r.step = obj.at("step").get<std::int64_t>();
    for (const auto& [key, val] : obj.items()) {
      if (key == "config_hash" || key == "epoch" || key == "step") continue;
      if (val.is_number_integer()) {
        r.fields.emplace_back(key, val.get<std::int64_t>());
      } else if (val.is_number_float()) {
        r.fields.emplace_back(key, val.get<double>());
      } else if (val.is_string()) {
        r.fields.emplace_back(key, val.get<std::string>());
      } else {
        throw std::runtime_error("load_metrics: unsupported JSON value for field " + key);
      }
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace

void emit_metrics(std::span<const MetricsRecord> records, const std::filesystem::path& path, RecordFormat format) {
  check_uniform(records);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write metrics file: " + path.string());
  if (format == RecordFormat::Csv) {
    write_csv(records, os);
  } else {
    write_json(records, os);
  }
  if (!os) throw std::runtime_error("failed writing metrics file: " + path.string());
}

void write_table_csv(const Table& table, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write CSV file: " + path.string());
  for (std::size_t i = 0; i < table.columns.size(); ++i) os << (i ? "," : "") << table.columns[i];
  os << '\n';
  for (const auto& row : table.rows) {
    if (row.size() != table.columns.size()) throw std::invalid_argument("write_table_csv: row width mismatch");
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << format_field(row[i]);
    os << '\n';
  }
  if (!os) throw std::runtime_error("failed writing CSV file: " + path.string());
}

std::vector<MetricsRecord> load_metrics(const std::filesystem::path& path, RecordFormat format) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read metrics file: " + path.string());
  return format == RecordFormat::Csv ? read_csv(is) : read_json(is);
}

}  // namespace bbat
