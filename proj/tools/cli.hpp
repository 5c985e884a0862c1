#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "defaultlab/inference.hpp"

namespace defaultlab::cli {

enum ExitCode { kOk = 0, kUsage = 2, kData = 3, kNumerical = 4 };

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Model strings such as "davislo:p=0.01,q=0.002", "torri:p=..,u=..,v=..",
/// "vasicek:p=..,rho=..", "hier-davislo:mu=..,sigma=..,q=..",
/// "hier-torri:mu=..,sigma=..,u=..,v=..", or a preset name: torri-high,
/// torri-mid, torri-low, davislo-ref, vasicek-ref (calibrated to n = 200,
/// m = 0.02, rho = 0.08).
FitParams parse_model_spec(const std::string& text);

/// Inverse of parse_model_spec with round-trip decimal numbers.
std::string format_model_spec(const FitParams& params);

/// Shortest decimal that reads back to the same double.
std::string format_number(double x);

/// Runs one subcommand. args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace defaultlab::cli
