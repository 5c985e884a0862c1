#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace defaultlab {

/// One annual observation: pool size and number of defaults.
struct YearRecord {
  int year = 0;
  int n = 0;
  int L = 0;
  std::string class_label;

  bool operator==(const YearRecord&) const = default;
};

/// Year-ordered observations of a single rating class.
class Panel {
 public:
  Panel() = default;
  /// Validates 0 <= L <= n, n >= 1 and strictly increasing years.
  explicit Panel(std::vector<YearRecord> records);

  const std::vector<YearRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  double n_bar() const { return n_bar_; }

 private:
  std::vector<YearRecord> records_;
  double n_bar_ = 0.0;
};

/// Thrown on malformed or invalid panel input. line is 0 when not tied to a
/// specific input line.
class DataError : public std::runtime_error {
 public:
  DataError(const std::string& what, int line = 0) : std::runtime_error(what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

}  // namespace defaultlab
