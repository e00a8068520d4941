#include "mixreg/records.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace mixreg {

namespace {

std::string csv_cell(const FieldValue& v) {
  return std::visit(
      [](const auto& x) -> std::string {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, bool>) {
          return x ? "true" : "false";
        } else if constexpr (std::is_same_v<T, double>) {
          if (std::isnan(x)) return "nan";
          if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
          char buf[40];
          std::snprintf(buf, sizeof buf, "%.17g", x);
          return buf;
        } else if constexpr (std::is_same_v<T, std::string>) {
          if (x.find_first_of(",\"\n") == std::string::npos) return x;
          std::string q = "\"";
          for (char c : x) {
            if (c == '"') q += '"';
            q += c;
          }
          return q + "\"";
        } else {
          return std::to_string(x);
        }
      },
      v);
}

}  // namespace

Record& Record::put(std::string key, FieldValue v) {
  if (key == "kind") throw std::invalid_argument("Record: `kind` is reserved");
  for (auto& [k, existing] : fields_) {
    if (k == key) {
      existing = std::move(v);
      return *this;
    }
  }
  fields_.emplace_back(std::move(key), std::move(v));
  return *this;
}

const FieldValue* Record::find(std::string_view key) const {
  for (const auto& [k, v] : fields_) {
    if (k == key) return &v;
  }
  return nullptr;
}

std::string to_json_line(const Record& record) {
  nlohmann::ordered_json j;
  j["kind"] = record.kind();
  for (const auto& [key, value] : record.fields()) {
    std::visit(
        [&](const auto& x) {
          using T = std::decay_t<decltype(x)>;
          if constexpr (std::is_same_v<T, double>) {
            if (std::isfinite(x)) {
              j[key] = x;
            } else {
              j[key] = nullptr;
            }
          } else {
            j[key] = x;
          }
        },
        value);
  }
  return j.dump();
}

void write_jsonl(std::ostream& out, std::span<const Record> records) {
  for (const auto& r : records) out << to_json_line(r) << '\n';
}

void write_csv(std::ostream& out, std::span<const Record> records, std::string_view kind) {
  const Record* first = nullptr;
  for (const auto& r : records) {
    if (r.kind() == kind) {
      first = &r;
      break;
    }
  }
  if (!first) return;
  std::vector<std::string> columns;
  for (const auto& [key, value] : first->fields()) columns.push_back(key);
  for (std::size_t c = 0; c < columns.size(); ++c) out << (c ? "," : "") << columns[c];
  out << '\n';
  for (const auto& r : records) {
    if (r.kind() != kind) continue;
    for (std::size_t c = 0; c < columns.size(); ++c) {
      if (c) out << ',';
      if (const FieldValue* v = r.find(columns[c])) out << csv_cell(*v);
    }
    out << '\n';
  }
}

}  // namespace mixreg
