#pragma once

#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

namespace mixreg {

using FieldValue = std::variant<bool, std::int64_t, std::uint64_t, double, std::string>;

/// One flat result record: a `kind` tag followed by ordered key/value pairs.
class Record {
 public:
  explicit Record(std::string kind) : kind_(std::move(kind)) {}

  Record& set(std::string key, bool v) { return put(std::move(key), v); }
  Record& set(std::string key, double v) { return put(std::move(key), v); }
  Record& set(std::string key, std::string v) { return put(std::move(key), std::move(v)); }
  Record& set(std::string key, const char* v) { return put(std::move(key), std::string(v)); }
  template <typename T>
    requires(std::is_integral_v<T> && !std::is_same_v<T, bool>)
  Record& set(std::string key, T v) {
    if constexpr (std::is_signed_v<T>) {
      return put(std::move(key), static_cast<std::int64_t>(v));
    } else {
      return put(std::move(key), static_cast<std::uint64_t>(v));
    }
  }
  /// key_1 .. key_m
  template <typename T>
  Record& set_series(const std::string& key, std::span<const T> values) {
    for (std::size_t i = 0; i < values.size(); ++i) set(key + "_" + std::to_string(i + 1), values[i]);
    return *this;
  }
  template <typename T>
  Record& set_series(const std::string& key, const std::vector<T>& values) {
    return set_series(key, std::span<const T>(values));
  }

  const std::string& kind() const { return kind_; }
  const std::vector<std::pair<std::string, FieldValue>>& fields() const { return fields_; }
  const FieldValue* find(std::string_view key) const;

 private:
  Record& put(std::string key, FieldValue v);

  std::string kind_;
  std::vector<std::pair<std::string, FieldValue>> fields_;
};

/// Single-line JSON object, `kind` first. Non-finite reals become null.
std::string to_json_line(const Record& record);
void write_jsonl(std::ostream& out, std::span<const Record> records);

/// CSV of the records of one kind; columns follow the first such record.
void write_csv(std::ostream& out, std::span<const Record> records, std::string_view kind);

}  // namespace mixreg
