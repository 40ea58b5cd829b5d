#pragma once

// Two-group hypothesis testing: Shapiro-Wilk routing between an unpaired
// t-test and the Mann-Whitney U test, plus boxplot summaries.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "coughxai/errors.hpp"

namespace coughxai {

enum class TestKind { StudentT, WelchT, MannWhitneyU };

inline std::string_view to_string(TestKind k) {
  switch (k) {
    case TestKind::StudentT: return "student_t";
    case TestKind::WelchT: return "welch_t";
    case TestKind::MannWhitneyU: return "mann_whitney_u";
  }
  return "?";
}

inline TestKind parse_test_kind(std::string_view s) {
  if (s == "student_t") return TestKind::StudentT;
  if (s == "welch_t") return TestKind::WelchT;
  if (s == "mann_whitney_u") return TestKind::MannWhitneyU;
  throw FormatError("unknown test kind '" + std::string(s) + "'");
}

inline constexpr double kSignificanceLevel = 0.05;

struct TestResult {
  std::string group;
  std::string feature;
  double threshold = 0.0;
  TestKind test_kind = TestKind::MannWhitneyU;
  double statistic = 0.0;
  double p_value = 1.0;
  bool significant = false;
};

inline TestResult make_result(TestKind kind, double statistic, double p) {
  TestResult r;
  r.test_kind = kind;
  r.statistic = statistic;
  r.p_value = std::clamp(p, 0.0, 1.0);
  r.significant = r.p_value < kSignificanceLevel;
  return r;
}

// ---------------------------------------------------------------------------
// Shapiro-Wilk (Royston 1995, algorithm AS R94)

struct ShapiroWilkResult {
  double w = 1.0;
  double p_value = 1.0;
};

namespace detail {

inline double poly(std::span<const double> c, double x) {
  double ret = c[0];
  if (c.size() > 1) {
    double p = x * c[c.size() - 1];
    for (std::size_t j = c.size() - 2; j > 0; --j) p = (p + c[j]) * x;
    ret += p;
  }
  return ret;
}

}  // namespace detail

inline ShapiroWilkResult shapiro_wilk(std::span<const double> sample) {
  const std::size_t n = sample.size();
  if (n < 3) throw ArgumentError("Shapiro-Wilk needs at least 3 values");
  if (n > 5000) throw ArgumentError("Shapiro-Wilk supports at most 5000 values");
  std::vector<double> x(sample.begin(), sample.end());
  std::sort(x.begin(), x.end());
  const double range = x.back() - x.front();
  if (!(range > 1e-19 * std::max(1.0, std::abs(x.front())))) {
    throw DegenerateInputError("Shapiro-Wilk is undefined for a constant sample");
  }

  static constexpr double c1[] = {0.0, 0.221157, -0.147981, -2.07119, 4.434685, -2.706056};
  static constexpr double c2[] = {0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633};
  static constexpr double c3[] = {0.544, -0.39978, 0.025054, -6.714e-4};
  static constexpr double c4[] = {1.3822, -0.77857, 0.062767, -0.0020322};
  static constexpr double c5[] = {-1.5861, -0.31082, -0.083751, 0.0038915};
  static constexpr double c6[] = {-0.4803, -0.082676, 0.0030302};
  static constexpr double g[] = {-2.273, 0.459};

  const boost::math::normal std_normal;
  const std::size_t half = n / 2;
  const double an = static_cast<double>(n);
  // a[i], i = 1..half: coefficients for the i-th largest minus i-th smallest order statistic.
  std::vector<double> a(half + 1, 0.0);
  if (n == 3) {
    a[1] = std::sqrt(0.5);
  } else {
    std::vector<double> m(half + 1);
    double summ2 = 0.0;
    for (std::size_t i = 1; i <= half; ++i) {
      m[i] = boost::math::quantile(std_normal, (static_cast<double>(i) - 0.375) / (an + 0.25));
      summ2 += m[i] * m[i];
    }
    summ2 *= 2.0;
    const double ssumm2 = std::sqrt(summ2);
    const double rsn = 1.0 / std::sqrt(an);
    const double a1 = detail::poly(c1, rsn) - m[1] / ssumm2;
    std::size_t first_scaled;
    double fac;
    if (n > 5) {
      first_scaled = 3;
      const double a2 = -m[2] / ssumm2 + detail::poly(c2, rsn);
      fac = std::sqrt((summ2 - 2.0 * m[1] * m[1] - 2.0 * m[2] * m[2]) / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2));
      a[2] = a2;
    } else {
      first_scaled = 2;
      fac = std::sqrt((summ2 - 2.0 * m[1] * m[1]) / (1.0 - 2.0 * a1 * a1));
    }
    a[1] = a1;
    for (std::size_t i = first_scaled; i <= half; ++i) a[i] = -m[i] / fac;
  }

  // W as the squared correlation between the ordered sample and the coefficients.
  std::vector<double> coef(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = n - 1 - i;
    if (i < j) coef[i] = -a[i + 1];
    else if (i > j) coef[i] = a[j + 1];
    else coef[i] = 0.0;
  }
  const double mean_a = std::accumulate(coef.begin(), coef.end(), 0.0) / an;
  double mean_x = 0.0;
  for (double v : x) mean_x += v / range;
  mean_x /= an;
  double ssa = 0.0, ssx = 0.0, sax = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = coef[i] - mean_a;
    const double dx = x[i] / range - mean_x;
    ssa += da * da;
    ssx += dx * dx;
    sax += da * dx;
  }
  const double ssassx = std::sqrt(ssa * ssx);
  const double w1 = (ssassx - sax) * (ssassx + sax) / (ssa * ssx);
  ShapiroWilkResult res;
  res.w = 1.0 - w1;

  if (n == 3) {
    constexpr double pi6 = 1.90985931710274;  // 6 / pi
    constexpr double stqr = 1.04719755119660;  // pi / 3
    res.p_value = std::clamp(pi6 * (std::asin(std::sqrt(res.w)) - stqr), 0.0, 1.0);
    return res;
  }
  double y = std::log(w1);
  const double lxx = std::log(an);
  double mu, sigma;
  if (n <= 11) {
    const double gamma = detail::poly(g, an);
    if (y >= gamma) {
      res.p_value = 1e-99;
      return res;
    }
    y = -std::log(gamma - y);
    mu = detail::poly(c3, an);
    sigma = std::exp(detail::poly(c4, an));
  } else {
    mu = detail::poly(c5, lxx);
    sigma = std::exp(detail::poly(c6, lxx));
  }
  res.p_value = std::clamp(boost::math::cdf(boost::math::complement(boost::math::normal(mu, sigma), y)), 0.0, 1.0);
  return res;
}

// ---------------------------------------------------------------------------
// Unpaired t-test

/// Two-sided unpaired t-test; pooled variance by default, Welch's correction if requested.
inline TestResult student_t_unpaired(std::span<const double> a, std::span<const double> b, bool welch = false) {
  if (a.size() < 2 || b.size() < 2) throw ArgumentError("t-test needs at least two values per group");
  const auto mean = [](std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); };
  const auto ss = [](std::span<const double> v, double m) {
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s;
  };
  const double ma = mean(a), mb = mean(b);
  const double ssa = ss(a, ma), ssb = ss(b, mb);
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const TestKind kind = welch ? TestKind::WelchT : TestKind::StudentT;
  if (ssa == 0.0 && ssb == 0.0) {
    if (ma == mb) throw DegenerateInputError("t-test is undefined when every value is identical");
    return make_result(kind, ma > mb ? INFINITY : -INFINITY, 0.0);
  }
  double t, df;
  if (welch) {
    const double va = ssa / (na - 1.0) / na, vb = ssb / (nb - 1.0) / nb;
    t = (ma - mb) / std::sqrt(va + vb);
    df = (va + vb) * (va + vb) / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
  } else {
    df = na + nb - 2.0;
    const double pooled = (ssa + ssb) / df;
    t = (ma - mb) / std::sqrt(pooled * (1.0 / na + 1.0 / nb));
  }
  const boost::math::students_t dist(df);
  const double p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
  return make_result(kind, t, p);
}

// ---------------------------------------------------------------------------
// Mann-Whitney U

inline constexpr std::size_t kExactMannWhitneyLimit = 25;

/// Midranks (1-based) of the pooled sample, doubled so ties stay integral.
inline std::vector<std::int64_t> doubled_midranks(std::span<const double> pooled) {
  const std::size_t n = pooled.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return pooled[i] < pooled[j]; });
  std::vector<std::int64_t> r2(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && pooled[order[j + 1]] == pooled[order[i]]) ++j;
    // ranks i+1 .. j+1 share the average (i + j + 2) / 2
    const auto doubled = static_cast<std::int64_t>(i + j + 2);
    for (std::size_t t = i; t <= j; ++t) r2[order[t]] = doubled;
    i = j + 1;
  }
  return r2;
}

/// Exact two-sided p-value: the fraction of all C(n, n_a) relabelings whose
/// rank sum lies at least as far from its mean as the observed one.
/// Counts subsets by dynamic programming over doubled rank sums.
inline double mann_whitney_exact_p(std::span<const std::int64_t> doubled_ranks, std::size_t n_a,
                                   std::int64_t observed_doubled_sum) {
  const std::size_t n = doubled_ranks.size();
  const std::int64_t total = std::accumulate(doubled_ranks.begin(), doubled_ranks.end(), std::int64_t{0});
  // counts[k][s]: number of k-subsets with doubled rank sum s
  std::vector<std::vector<double>> counts(n_a + 1, std::vector<double>(static_cast<std::size_t>(total) + 1, 0.0));
  counts[0][0] = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<std::size_t>(doubled_ranks[i]);
    for (std::size_t k = std::min(n_a, i + 1); k >= 1; --k) {
      auto& dst = counts[k];
      const auto& src = counts[k - 1];
      for (std::size_t s = dst.size(); s-- > r;) dst[s] += src[s - r];
    }
  }
  // mean of the doubled sum is n_a * total / n; compare deviations scaled by n to stay integral
  const auto nn = static_cast<std::int64_t>(n);
  const auto na = static_cast<std::int64_t>(n_a);
  const std::int64_t observed_dev = std::abs(observed_doubled_sum * nn - na * total);
  double hits = 0.0, all = 0.0;
  for (std::size_t s = 0; s < counts[n_a].size(); ++s) {
    const double c = counts[n_a][s];
    if (c == 0.0) continue;
    all += c;
    if (std::abs(static_cast<std::int64_t>(s) * nn - na * total) >= observed_dev) hits += c;
  }
  return hits / all;
}

/// U with midranks for ties. Exact p when n_a + n_b <= 25, otherwise the
/// tie-corrected normal approximation with continuity correction.
/// The reported statistic is min(U_a, U_b).
inline TestResult mann_whitney_u(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw ArgumentError("Mann-Whitney U needs at least one value per group");
  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  for (double v : pooled) {
    if (!std::isfinite(v)) throw ArgumentError("Mann-Whitney U requires finite values");
  }
  const auto r2 = doubled_midranks(pooled);
  const std::size_t na = a.size(), nb = b.size(), n = pooled.size();
  std::int64_t sum_a2 = 0;
  for (std::size_t i = 0; i < na; ++i) sum_a2 += r2[i];
  const double u_a = static_cast<double>(sum_a2) / 2.0 - static_cast<double>(na * (na + 1)) / 2.0;
  const double u_b = static_cast<double>(na * nb) - u_a;
  const double u = std::min(u_a, u_b);

  if (n <= kExactMannWhitneyLimit) {
    return make_result(TestKind::MannWhitneyU, u, mann_whitney_exact_p(r2, na, sum_a2));
  }
  // tie correction: sum over tie groups of t^3 - t
  std::vector<double> sorted = pooled;
  std::sort(sorted.begin(), sorted.end());
  double tie_term = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && sorted[j + 1] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i + 1);
    tie_term += t * t * t - t;
    i = j + 1;
  }
  const double dn = static_cast<double>(n);
  const double mu = static_cast<double>(na * nb) / 2.0;
  const double var = static_cast<double>(na * nb) / 12.0 * ((dn + 1.0) - tie_term / (dn * (dn - 1.0)));
  if (!(var > 0.0)) return make_result(TestKind::MannWhitneyU, u, 1.0);
  const double z = std::max(0.0, std::abs(u_a - mu) - 0.5) / std::sqrt(var);
  const double p = 2.0 * boost::math::cdf(boost::math::complement(boost::math::normal(), z));
  return make_result(TestKind::MannWhitneyU, u, p);
}

// ---------------------------------------------------------------------------
// Test selection

struct ProtocolConfig {
  double gaussianity_alpha = 0.05;
  bool welch = false;
};

/// True when the sample passes Shapiro-Wilk at `alpha`. Constant samples do not pass.
inline bool looks_gaussian(std::span<const double> x, double alpha) {
  try {
    return shapiro_wilk(x).p_value >= alpha;
  } catch (const DegenerateInputError&) {
    return false;
  }
}

/// Gaussianity check on both groups routes to the t-test; otherwise Mann-Whitney U.
/// Groups with fewer than three values go straight to Mann-Whitney U.
inline TestResult run_protocol(std::span<const double> a, std::span<const double> b, const ProtocolConfig& cfg = {}) {
  if (a.empty() || b.empty()) throw ArgumentError("both groups need at least one value");
  if (a.size() >= 3 && b.size() >= 3 && looks_gaussian(a, cfg.gaussianity_alpha) &&
      looks_gaussian(b, cfg.gaussianity_alpha)) {
    return student_t_unpaired(a, b, cfg.welch);
  }
  return mann_whitney_u(a, b);
}

// ---------------------------------------------------------------------------
// Boxplots

struct BoxplotSummary {
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double whisker_lo = 0.0;
  double whisker_hi = 0.0;
  std::vector<double> outliers;
};

/// Quantile by linear interpolation between order statistics (position p * (n - 1)).
inline double quantile_sorted(std::span<const double> sorted, double p) {
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline BoxplotSummary boxplot_summary(std::span<const double> x) {
  if (x.empty()) throw ArgumentError("boxplot of an empty sample");
  std::vector<double> s(x.begin(), x.end());
  std::sort(s.begin(), s.end());
  BoxplotSummary b;
  b.q1 = quantile_sorted(s, 0.25);
  b.median = quantile_sorted(s, 0.5);
  b.q3 = quantile_sorted(s, 0.75);
  const double iqr = b.q3 - b.q1;
  const double lo_fence = b.q1 - 1.5 * iqr, hi_fence = b.q3 + 1.5 * iqr;
  b.whisker_lo = s.back();
  b.whisker_hi = s.front();
  for (double v : s) {
    if (v < lo_fence || v > hi_fence) {
      b.outliers.push_back(v);
    } else {
      b.whisker_lo = std::min(b.whisker_lo, v);
      b.whisker_hi = std::max(b.whisker_hi, v);
    }
  }
  return b;
}

}  // namespace coughxai
