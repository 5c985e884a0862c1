#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "defaultlab/inference.hpp"

namespace defaultlab {

/// Identical (seed, stream) pairs give identical draws on every platform.
struct RngSpec {
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
};

/// mt19937_64 keyed by (seed, stream) through seed_seq. The samplers below
/// are written out so that draws do not depend on the standard library's
/// distribution implementations.
class Rng {
 public:
  explicit Rng(RngSpec spec);

  /// Uniform on the open interval (0, 1).
  double uniform();
  double normal();
  /// Exact inversion searching outward from the mode.
  int binomial(int n, double p);

 private:
  std::mt19937_64 engine_;
};

int simulate_count(const ModelParams& params, int n, Rng& rng);
int simulate_count(const ModelParams& params, int n, RngSpec spec);

/// One year per pool size, numbered from first_year.
Panel simulate_panel(const ModelParams& params, std::span<const int> pool_sizes, RngSpec spec,
                     int first_year = 1, const std::string& class_label = "SIM");
/// y_t ~ N(mu, sigma^2), p_t = Phi(y_t), then one count at p_t.
Panel simulate_hier_panel(const HierParams& hp, std::span<const int> pool_sizes, RngSpec spec,
                          int first_year = 1, const std::string& class_label = "SIM");

struct NamedTarget {
  std::string name;
  ModelParams params;
};

struct ConfusionMatrix {
  std::vector<std::string> rows;  // target names
  std::vector<std::string> cols;  // selected family tags
  std::vector<std::vector<int>> counts;
  std::vector<std::vector<double>> rates;
  std::vector<int> failures;      // per row, replications whose fits failed
  std::vector<int> nonconverged;  // per row, replications with a flagged fit
  int replications = 0;
  int sample_size = 0;
  int pool_size = 0;
};

/// For every target and replication: T counts at pool size n, MLE fits of
/// the Torri, Davis-Lo and Vasicek families, AIC selection. Replication r
/// of target i draws from stream i * 2^32 + r of the given seed.
ConfusionMatrix identifiability_experiment(std::span<const NamedTarget> targets, int n, int T, int R,
                                           std::uint64_t seed, const FitOptions& opts = {});

/// Worker count from DEFAULTLAB_THREADS (0 or unset means hardware
/// concurrency).
int worker_count();

/// Runs body(i) for i in [0, count) on worker_count() threads. Callers
/// write results by index, so the outcome does not depend on scheduling.
void parallel_for(int count, const std::function<void(int)>& body);

}  // namespace defaultlab
