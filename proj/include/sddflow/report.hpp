#pragma once

#include <cstdint>
#include <iomanip>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "sddflow/io.hpp"

namespace sddflow {

inline constexpr const char* kReportSchema = "sddflow-report/1";

enum class ReportFormat { kText, kStructured };

// Ordered key/value report. Structured output is one `key value` pair per
// line, starting with the schema tag; reals use the shortest round-trip
// decimal, so reruns with the same inputs give identical bytes apart from
// `wall_time`.
class Report {
 public:
  void add(std::string key, std::string value) { fields_.emplace_back(std::move(key), std::move(value)); }
  void add(std::string key, const char* value) { add(std::move(key), std::string(value)); }
  void add(std::string key, std::string_view value) { add(std::move(key), std::string(value)); }
  void add(std::string key, double value) { add(std::move(key), detail::format_real(value)); }
  void add(std::string key, std::int64_t value) { add(std::move(key), std::to_string(value)); }
  void add(std::string key, std::uint64_t value) { add(std::move(key), std::to_string(value)); }
  void add(std::string key, int value) { add(std::move(key), std::to_string(value)); }
  void add(std::string key, bool value) { add(std::move(key), std::string(value ? "true" : "false")); }

  const std::vector<std::pair<std::string, std::string>>& fields() const { return fields_; }

  std::string render(ReportFormat format) const {
    std::ostringstream out;
    if (format == ReportFormat::kStructured) {
      out << "schema " << kReportSchema << "\n";
      for (const auto& [k, v] : fields_) out << k << " " << v << "\n";
      return out.str();
    }
    std::size_t width = 0;
    for (const auto& kv : fields_) width = std::max(width, kv.first.size());
    for (const auto& [k, v] : fields_) out << std::left << std::setw(static_cast<int>(width) + 2) << (k + ":") << v << "\n";
    return out.str();
  }

 private:
  std::vector<std::pair<std::string, std::string>> fields_;
};

// Parses structured output back into key/value pairs (schema line checked).
inline std::vector<std::pair<std::string, std::string>> parse_structured_report(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<std::pair<std::string, std::string>> out;
  bool first = true;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto space = line.find(' ');
    if (space == std::string::npos) throw Error(ErrorCode::kParseError, detail::at_line(number, "expected 'key value'"));
    std::string key = line.substr(0, space);
    std::string value = line.substr(space + 1);
    if (first) {
      if (key != "schema" || value != kReportSchema) {
        throw Error(ErrorCode::kParseError, detail::at_line(number, "unknown report schema"));
      }
      first = false;
      continue;
    }
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

}  // namespace sddflow
