#include "defaultlab/dataio.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace defaultlab {

Panel::Panel(std::vector<YearRecord> records) : records_(std::move(records)) {
  double total = 0.0;
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const YearRecord& r = records_[i];
    if (r.n < 1) throw DataError("year " + std::to_string(r.year) + ": n must be >= 1");
    if (r.L < 0 || r.L > r.n)
      throw DataError("year " + std::to_string(r.year) + ": defaults " + std::to_string(r.L) +
                      " outside [0, " + std::to_string(r.n) + "]");
    if (i > 0 && r.year <= records_[i - 1].year)
      throw DataError("year " + std::to_string(r.year) + ": years must be strictly increasing");
    total += r.n;
  }
  n_bar_ = records_.empty() ? 0.0 : total / static_cast<double>(records_.size());
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

int parse_int(const std::string& s, const char* what, int line) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw DataError("line " + std::to_string(line) + ": cannot parse " + what + " '" + s + "'", line);
  return v;
}

}  // namespace

Panel read_panel(std::istream& in, const std::string& class_label, std::optional<YearRange> years) {
  std::string line;
  int lineno = 0;
  bool header = false;
  std::vector<YearRecord> rows;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto f = split(t);
    if (!header) {
      if (f.size() != 4 || f[0] != "year" || f[1] != "n" || f[2] != "defaults" || f[3] != "class")
        throw DataError("line " + std::to_string(lineno) + ": expected header year,n,defaults,class", lineno);
      header = true;
      continue;
    }
    if (f.size() != 4)
      throw DataError("line " + std::to_string(lineno) + ": expected 4 fields, got " + std::to_string(f.size()), lineno);
    YearRecord r{parse_int(f[0], "year", lineno), parse_int(f[1], "n", lineno),
                 parse_int(f[2], "defaults", lineno), f[3]};
    if (r.class_label != class_label) continue;
    if (years && (r.year < years->lo || r.year > years->hi)) continue;
    if (r.n < 1) throw DataError("line " + std::to_string(lineno) + ": n must be >= 1", lineno);
    if (r.L < 0 || r.L > r.n)
      throw DataError("line " + std::to_string(lineno) + ": defaults outside [0, n]", lineno);
    if (!rows.empty() && r.year <= rows.back().year)
      throw DataError("line " + std::to_string(lineno) + ": years must be strictly increasing", lineno);
    rows.push_back(std::move(r));
  }
  if (!header) throw DataError("empty input: missing header");
  if (rows.empty()) throw DataError("no rows for class '" + class_label + "' in the requested range");
  return Panel(std::move(rows));
}

Panel load_panel(const std::string& path, const std::string& class_label, std::optional<YearRange> years) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return read_panel(in, class_label, years);
}

void write_panel(std::ostream& out, const Panel& panel) {
  out << "year,n,defaults,class\n";
  for (const YearRecord& r : panel.records())
    out << r.year << ',' << r.n << ',' << r.L << ',' << r.class_label << '\n';
}

void save_panel(const std::string& path, const Panel& panel) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  write_panel(out, panel);
}

std::vector<int> rescale_counts(const Panel& panel) {
  const double nbar = panel.n_bar();
  if (!(nbar > 0.0)) throw DataError("rescale_counts: n_bar must be positive");
  std::vector<int> out;
  out.reserve(panel.size());
  // std::round rounds halves away from zero.
  for (const YearRecord& r : panel.records())
    out.push_back(static_cast<int>(std::round(static_cast<double>(r.L) * nbar / r.n)));
  return out;
}

SummaryStats summary_stats(const Panel& panel) {
  if (panel.empty()) throw DataError("summary_stats: empty panel");
  SummaryStats s;
  const double T = static_cast<double>(panel.size());
  double sum_n = 0.0, sum_L = 0.0, sum_rate = 0.0;
  for (const YearRecord& r : panel.records()) {
    sum_n += r.n;
    sum_L += r.L;
    sum_rate += static_cast<double>(r.L) / r.n;
  }
  s.mean_n = sum_n / T;
  s.mean_L = sum_L / T;
  s.mean_rate = sum_rate / T;
  s.total_rate = sum_L / sum_n;
  if (panel.size() < 2) {
    s.variance_undefined = true;
    return s;
  }
  const std::vector<int> scaled = rescale_counts(panel);
  double mean = 0.0;
  for (int x : scaled) mean += x;
  mean /= T;
  double ss = 0.0;
  for (int x : scaled) ss += (x - mean) * (x - mean);
  s.scaled_variance = ss / (T - 1.0);
  return s;
}

}  // namespace defaultlab
