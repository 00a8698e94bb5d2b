#include "engram/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "engram/util.hpp"

namespace engram {

DesignBuild build_design(const std::vector<std::string>& names,
                         const std::vector<std::vector<std::optional<double>>>& columns,
                         const std::vector<std::optional<double>>& outcome,
                         const std::vector<int>& row_ids) {
  if (columns.size() != names.size()) {
    fail(ErrorCategory::domain, "build_design: names/columns size mismatch");
  }
  const std::size_t n_in = outcome.size();
  for (const auto& col : columns) {
    if (col.size() != n_in) fail(ErrorCategory::domain, "build_design: ragged columns");
  }
  if (row_ids.size() != n_in) fail(ErrorCategory::domain, "build_design: row_ids size mismatch");

  DesignBuild out;
  out.design.names = names;
  out.design.p = static_cast<int>(names.size());
  for (std::size_t r = 0; r < n_in; ++r) {
    bool complete = outcome[r].has_value();
    for (const auto& col : columns) complete = complete && col[r].has_value();
    if (!complete) {
      ++out.dropped_rows;
      continue;
    }
    for (const auto& col : columns) out.design.x.push_back(*col[r]);
    out.design.y.push_back(*outcome[r]);
    out.design.row_ids.push_back(row_ids[r]);
  }
  out.design.n = static_cast<int>(out.design.y.size());
  if (out.design.n <= out.design.p) {
    fail(ErrorCategory::numeric, "build_design: fewer complete rows than predictors (n=" +
                                     std::to_string(out.design.n) +
                                     ", p=" + std::to_string(out.design.p) + ")");
  }
  return out;
}

Design zscore_columns(const Design& design) {
  Design z = design;
  for (int j = 0; j < design.p; ++j) {
    double mean = 0.0;
    for (int i = 0; i < design.n; ++i) mean += design.at(i, j);
    mean /= design.n;
    double ss = 0.0;
    for (int i = 0; i < design.n; ++i) {
      double d = design.at(i, j) - mean;
      ss += d * d;
    }
    double sd = std::sqrt(ss / (design.n - 1));
    if (sd == 0.0) {
      fail(ErrorCategory::numeric, "degenerate predictor: column \"" + design.names[static_cast<std::size_t>(j)] +
                                       "\" is constant");
    }
    for (int i = 0; i < design.n; ++i) {
      z.x[static_cast<std::size_t>(i) * design.p + j] = (design.at(i, j) - mean) / sd;
    }
  }
  return z;
}

// ---------------------------------------------------------------------------
// Householder QR least squares on the augmented matrix [X | 1].
// ---------------------------------------------------------------------------

RegressionResult ols_fit(const Design& design, int dropped_rows) {
  const int n = design.n;
  const int p = design.p;
  const int cols = p + 1;  // intercept appended last
  if (n <= cols - 1) fail(ErrorCategory::numeric, "ols_fit: not enough rows");

  std::vector<double> a(static_cast<std::size_t>(n) * cols);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) a[static_cast<std::size_t>(i) * cols + j] = design.at(i, j);
    a[static_cast<std::size_t>(i) * cols + p] = 1.0;
  }
  std::vector<double> rhs = design.y;

  // column norms for the rank test
  double max_col_norm = 0.0;
  for (int j = 0; j < cols; ++j) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
      double v = a[static_cast<std::size_t>(i) * cols + j];
      s += v * v;
    }
    max_col_norm = std::max(max_col_norm, std::sqrt(s));
  }

  for (int j = 0; j < cols; ++j) {
    // Householder vector for column j below the diagonal
    double norm = 0.0;
    for (int i = j; i < n; ++i) {
      double v = a[static_cast<std::size_t>(i) * cols + j];
      norm += v * v;
    }
    norm = std::sqrt(norm);
    if (norm <= 1e-12 * std::max(1.0, max_col_norm)) {
      fail(ErrorCategory::numeric,
           "singular design: column " +
               (j < p ? "\"" + design.names[static_cast<std::size_t>(j)] + "\""
                      : std::string("(intercept)")) +
               " is linearly dependent");
    }
    double ajj = a[static_cast<std::size_t>(j) * cols + j];
    double alpha = ajj > 0 ? -norm : norm;
    std::vector<double> v(static_cast<std::size_t>(n - j));
    v[0] = ajj - alpha;
    for (int i = j + 1; i < n; ++i) v[static_cast<std::size_t>(i - j)] = a[static_cast<std::size_t>(i) * cols + j];
    double vnorm2 = 0.0;
    for (double w : v) vnorm2 += w * w;
    if (vnorm2 == 0.0) continue;  // column already upper-triangular

    for (int k = j; k < cols; ++k) {
      double dot = 0.0;
      for (int i = j; i < n; ++i) {
        dot += v[static_cast<std::size_t>(i - j)] * a[static_cast<std::size_t>(i) * cols + k];
      }
      double f = 2.0 * dot / vnorm2;
      for (int i = j; i < n; ++i) {
        a[static_cast<std::size_t>(i) * cols + k] -= f * v[static_cast<std::size_t>(i - j)];
      }
    }
    double dot = 0.0;
    for (int i = j; i < n; ++i) dot += v[static_cast<std::size_t>(i - j)] * rhs[static_cast<std::size_t>(i)];
    double f = 2.0 * dot / vnorm2;
    for (int i = j; i < n; ++i) rhs[static_cast<std::size_t>(i)] -= f * v[static_cast<std::size_t>(i - j)];
  }

  // rank check on R's diagonal
  for (int j = 0; j < cols; ++j) {
    if (std::abs(a[static_cast<std::size_t>(j) * cols + j]) <= 1e-10 * std::max(1.0, max_col_norm)) {
      fail(ErrorCategory::numeric, "singular design: rank-deficient R at column " + std::to_string(j));
    }
  }

  // back substitution
  std::vector<double> coef(static_cast<std::size_t>(cols));
  for (int j = cols - 1; j >= 0; --j) {
    double s = rhs[static_cast<std::size_t>(j)];
    for (int k = j + 1; k < cols; ++k) s -= a[static_cast<std::size_t>(j) * cols + k] * coef[static_cast<std::size_t>(k)];
    coef[static_cast<std::size_t>(j)] = s / a[static_cast<std::size_t>(j) * cols + j];
  }

  RegressionResult res;
  res.beta.assign(coef.begin(), coef.begin() + p);
  res.intercept = coef[static_cast<std::size_t>(p)];
  res.n_used = n;
  res.dropped_rows = dropped_rows;

  double y_mean = std::accumulate(design.y.begin(), design.y.end(), 0.0) / n;
  double ss_res = 0.0, ss_tot = 0.0;
  for (int i = 0; i < n; ++i) {
    double fit = res.intercept;
    for (int j = 0; j < p; ++j) fit += res.beta[static_cast<std::size_t>(j)] * design.at(i, j);
    double r = design.y[static_cast<std::size_t>(i)] - fit;
    ss_res += r * r;
    double c = design.y[static_cast<std::size_t>(i)] - y_mean;
    ss_tot += c * c;
  }
  if (ss_tot == 0.0) {
    fail(ErrorCategory::numeric, "ols_fit: outcome is constant, R^2 undefined");
  }
  res.r_squared = 1.0 - ss_res / ss_tot;
  return res;
}

TestResult permutation_test(const std::function<double(std::span<const int>)>& statistic,
                            int n_items, int n_permutations, Tails tails, uint64_t seed) {
  if (n_permutations < 1) fail(ErrorCategory::domain, "permutation_test: n_permutations < 1");
  if (n_items < 2) fail(ErrorCategory::domain, "permutation_test: n_items < 2");

  std::vector<int> identity(static_cast<std::size_t>(n_items));
  std::iota(identity.begin(), identity.end(), 0);
  const double observed = statistic(identity);
  const double threshold = tails == Tails::two ? std::abs(observed) : observed;

  int extreme = 0;
  std::vector<int> perm = identity;
  for (int i = 0; i < n_permutations; ++i) {
    Rng rng(sub_seed(seed, "permutation", static_cast<uint64_t>(i)));
    std::copy(identity.begin(), identity.end(), perm.begin());
    rng.shuffle(perm);
    double stat = statistic(perm);
    double value = tails == Tails::two ? std::abs(stat) : stat;
    if (value >= threshold) ++extreme;
  }

  TestResult res;
  res.statistic = observed;
  res.p_value = (1.0 + extreme) / (1.0 + n_permutations);
  res.n_permutations = n_permutations;
  res.tails = tails;
  res.seed = seed;
  return res;
}

BootstrapCi bootstrap_ci(const std::function<std::vector<double>(std::span<const int>)>& estimator,
                         int n_items, int n_boot, double level, uint64_t seed) {
  if (n_boot < 100) fail(ErrorCategory::domain, "bootstrap_ci: n_boot must be >= 100");
  if (!(level > 0.0 && level < 1.0)) fail(ErrorCategory::domain, "bootstrap_ci: level out of (0,1)");
  if (n_items < 1) fail(ErrorCategory::domain, "bootstrap_ci: empty data");

  std::vector<int> identity(static_cast<std::size_t>(n_items));
  std::iota(identity.begin(), identity.end(), 0);
  BootstrapCi out;
  out.point = estimator(identity);
  out.level = level;
  out.n_boot = n_boot;
  out.seed = seed;
  const std::size_t k = out.point.size();

  std::vector<std::vector<double>> draws(k);
  for (auto& d : draws) d.reserve(static_cast<std::size_t>(n_boot));

  std::vector<int> sample(static_cast<std::size_t>(n_items));
  for (int b = 0; b < n_boot; ++b) {
    for (uint64_t attempt = 0;; ++attempt) {
      Rng rng(sub_seed(seed, "bootstrap", static_cast<uint64_t>(b) + (attempt << 32)));
      for (int i = 0; i < n_items; ++i) {
        sample[static_cast<std::size_t>(i)] =
            static_cast<int>(rng.next_below(static_cast<uint64_t>(n_items)));
      }
      try {
        std::vector<double> est = estimator(sample);
        if (est.size() != k) fail(ErrorCategory::domain, "bootstrap estimator changed arity");
        for (std::size_t j = 0; j < k; ++j) draws[j].push_back(est[j]);
        break;
      } catch (const Error&) {
        ++out.redraws;
        if (attempt > 64) throw;  // hopeless resample distribution
      }
    }
  }

  const double alpha = 1.0 - level;
  for (std::size_t j = 0; j < k; ++j) {
    out.lo.push_back(percentile(draws[j], alpha / 2.0));
    out.hi.push_back(percentile(draws[j], 1.0 - alpha / 2.0));
  }
  return out;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) fail(ErrorCategory::domain, "percentile of empty set");
  std::sort(values.begin(), values.end());
  if (q <= 0.0) return values.front();
  if (q >= 1.0) return values.back();
  double idx = q * (static_cast<double>(values.size()) - 1.0);
  std::size_t lo = static_cast<std::size_t>(idx);
  double frac = idx - static_cast<double>(lo);
  if (lo + 1 >= values.size()) return values.back();
  return values[lo] * (1.0 - frac) + values[lo + 1] * frac;
}

double pearson_r(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) fail(ErrorCategory::domain, "pearson_r: bad inputs");
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) fail(ErrorCategory::numeric, "pearson_r: zero variance");
  return sab / std::sqrt(saa * sbb);
}

}  // namespace engram
