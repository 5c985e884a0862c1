#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "defaultlab/panel.hpp"

namespace defaultlab {

struct YearRange {
  int lo;
  int hi;
};

/// Reads a comma-separated file with header `year,n,defaults,class`, keeps
/// rows of the requested class (and year range, inclusive) and validates
/// them. Throws DataError naming the offending line.
Panel load_panel(const std::string& path, const std::string& class_label,
                 std::optional<YearRange> years = std::nullopt);
Panel read_panel(std::istream& in, const std::string& class_label,
                 std::optional<YearRange> years = std::nullopt);

void write_panel(std::ostream& out, const Panel& panel);
void save_panel(const std::string& path, const Panel& panel);

/// round(L_t * n_bar / n_t), ties away from zero.
std::vector<int> rescale_counts(const Panel& panel);

struct SummaryStats {
  double mean_n = 0.0;
  double mean_L = 0.0;
  double mean_rate = 0.0;
  double total_rate = 0.0;
  double scaled_variance = 0.0;
  /// Set when the panel has a single year and the variance is undefined.
  bool variance_undefined = false;
};

SummaryStats summary_stats(const Panel& panel);

}  // namespace defaultlab
