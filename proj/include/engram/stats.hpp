#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace engram {

struct Design {
  std::vector<std::string> names;  // p predictor names
  std::vector<double> x;           // n x p, row-major
  std::vector<double> y;           // n
  std::vector<int> row_ids;        // word indices (or any row labels)
  int n = 0;
  int p = 0;

  double at(int row, int col) const { return x[static_cast<std::size_t>(row) * p + col]; }
};

// Listwise construction: rows with any missing predictor or outcome value are
// dropped and counted.
struct DesignBuild {
  Design design;
  int dropped_rows = 0;
};

DesignBuild build_design(const std::vector<std::string>& names,
                         const std::vector<std::vector<std::optional<double>>>& columns,
                         const std::vector<std::optional<double>>& outcome,
                         const std::vector<int>& row_ids);

// Each predictor column to mean 0, sample std 1 (n-1 denominator); outcome
// untouched. A constant column is a degenerate-predictor error.
Design zscore_columns(const Design& design);

struct RegressionResult {
  std::vector<double> beta;  // p coefficients, design column order
  double intercept = 0.0;
  double r_squared = 0.0;
  int n_used = 0;
  int dropped_rows = 0;
};

// Least squares via Householder QR on [X | 1]; rank deficiency is an error.
RegressionResult ols_fit(const Design& design, int dropped_rows = 0);

enum class Tails { one, two };

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;  // add-one rule: p >= 1/(n_permutations+1)
  int n_permutations = 0;
  Tails tails = Tails::two;
  uint64_t seed = 0;
};

// statistic(perm) evaluates the test statistic after rows/labels have been
// rearranged per the index vector `perm` (a permutation of 0..n_items-1).
// The observed statistic is statistic(identity). Permutation i draws its
// shuffle from an independent generator sub-seeded with (seed, i), so the
// p-value does not depend on evaluation order. One-tailed counts
// stat >= observed, two-tailed counts |stat| >= |observed|.
TestResult permutation_test(const std::function<double(std::span<const int>)>& statistic,
                            int n_items, int n_permutations, Tails tails, uint64_t seed);

struct BootstrapCi {
  std::vector<double> point;  // estimate on the original data
  std::vector<double> lo;
  std::vector<double> hi;
  double level = 0.95;
  int n_boot = 0;
  int redraws = 0;  // resamples redrawn after estimator failure
  uint64_t seed = 0;
};

// Percentile intervals from row-resampled re-estimates. `estimator` receives
// the resampled row indices (size n_items, drawn with replacement) and may
// throw; a failed resample is redrawn (with a fresh sub-seed) and counted.
BootstrapCi bootstrap_ci(const std::function<std::vector<double>(std::span<const int>)>& estimator,
                         int n_items, int n_boot, double level, uint64_t seed);

// Percentile with linear interpolation between closest ranks, on a copy.
double percentile(std::vector<double> values, double q);

double pearson_r(std::span<const double> a, std::span<const double> b);

}  // namespace engram
