#include "gazegpt/stats.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <nlohmann/json.hpp>

#include "gazegpt/error.hpp"

namespace gazegpt::evalstats {

namespace bm = boost::math;

namespace {

double f_sf(double f, double df1, double df2) {
    if (f <= 0.0) return 1.0;
    if (std::isinf(f)) return 0.0;
    return bm::cdf(bm::complement(bm::fisher_f_distribution<double>(df1, df2), f));
}

double chi2_sf(double x, double df) {
    if (x <= 0.0) return 1.0;
    return bm::cdf(bm::complement(bm::chi_squared_distribution<double>(df), x));
}

}  // namespace

SumsOfSquares rm_sums_of_squares(const Matrix& data) {
    const auto n = static_cast<double>(data.rows());
    const auto k = static_cast<double>(data.cols());
    const double grand = data.mean();
    SumsOfSquares ss;
    ss.total = (data.array() - grand).square().sum();
    ss.subjects = k * (data.rowwise().mean().array() - grand).square().sum();
    ss.conditions = n * (data.colwise().mean().array() - grand).square().sum();
    ss.error = std::max(0.0, ss.total - ss.subjects - ss.conditions);
    return ss;
}

double greenhouse_geisser_epsilon(const Matrix& data) {
    const auto k = data.cols();
    const auto n = data.rows();
    if (k < 2 || n < 2) {
        throw DomainError("greenhouse_geisser_epsilon: need >= 2 conditions and >= 2 subjects");
    }
    const Matrix centered = data.rowwise() - data.colwise().mean();
    const Matrix cov = centered.transpose() * centered / static_cast<double>(n - 1);
    const Matrix c = Matrix::Identity(k, k) - Matrix::Constant(k, k, 1.0 / static_cast<double>(k));
    const Matrix sc = c * cov * c;
    const double trace = sc.trace();
    const double sum_sq = sc.array().square().sum();
    if (trace <= 0.0 || sum_sq <= 0.0) return 1.0;
    const double eps = trace * trace / (static_cast<double>(k - 1) * sum_sq);
    return std::clamp(eps, 1.0 / static_cast<double>(k - 1), 1.0);
}

RmAnovaResult rm_anova_gg(const Matrix& data) {
    if (data.cols() < 2 || data.rows() < 3) {
        throw DomainError("rm_anova_gg: need >= 2 conditions and >= 3 subjects");
    }
    if (!data.allFinite()) {
        throw DomainError("rm_anova_gg: missing or non-finite cells");
    }
    RmAnovaResult r;
    r.ss = rm_sums_of_squares(data);
    if (r.ss.total == 0.0) {
        throw DegenerateDataError("rm_anova_gg: no variance within or between conditions");
    }
    const auto n = static_cast<double>(data.rows());
    const auto k = static_cast<double>(data.cols());
    r.df_conditions = k - 1.0;
    r.df_error = (n - 1.0) * (k - 1.0);
    r.epsilon = greenhouse_geisser_epsilon(data);
    r.df_conditions_gg = r.epsilon * r.df_conditions;
    r.df_error_gg = r.epsilon * r.df_error;
    // Relative threshold guards against rounding residue in SS_conditions.
    if (r.ss.conditions <= 1e-14 * r.ss.total) {
        r.f = 0.0;
        r.p_uncorrected = 1.0;
        r.p = 1.0;
        return r;
    }
    if (r.ss.error <= 1e-14 * r.ss.total) {
        r.f = std::numeric_limits<double>::infinity();
        r.p_uncorrected = 0.0;
        r.p = 0.0;
        return r;
    }
    r.f = (r.ss.conditions / r.df_conditions) / (r.ss.error / r.df_error);
    r.p_uncorrected = f_sf(r.f, r.df_conditions, r.df_error);
    r.p = f_sf(r.f, r.df_conditions_gg, r.df_error_gg);
    return r;
}

OneWayAnovaResult one_way_anova(const Matrix& data) {
    if (data.cols() < 2 || data.rows() < 2) {
        throw DomainError("one_way_anova: need >= 2 groups with >= 2 observations");
    }
    const auto n = static_cast<double>(data.rows());
    const auto k = static_cast<double>(data.cols());
    const double grand = data.mean();
    OneWayAnovaResult r;
    r.ss_between = n * (data.colwise().mean().array() - grand).square().sum();
    r.ss_within = (data.rowwise() - data.colwise().mean()).array().square().sum();
    r.df_between = k - 1.0;
    r.df_within = k * (n - 1.0);
    if (r.ss_between + r.ss_within == 0.0) {
        throw DegenerateDataError("one_way_anova: all observations are equal");
    }
    if (r.ss_within == 0.0) {
        r.f = std::numeric_limits<double>::infinity();
        r.p = 0.0;
        return r;
    }
    r.f = (r.ss_between / r.df_between) / (r.ss_within / r.df_within);
    r.p = f_sf(r.f, r.df_between, r.df_within);
    return r;
}

PairedTTest paired_t_test(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.size() < 2) {
        throw DomainError("paired_t_test: need two equal-length samples of size >= 2");
    }
    const auto n = static_cast<double>(a.size());
    std::vector<double> d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
    const double mean = std::accumulate(d.begin(), d.end(), 0.0) / n;
    double ss = 0.0;
    for (double x : d) ss += (x - mean) * (x - mean);
    PairedTTest r;
    r.mean_diff = mean;
    r.df = n - 1.0;
    const double sd = std::sqrt(ss / (n - 1.0));
    if (sd <= 1e-15 * std::max(1.0, std::abs(mean))) {
        r.zero_variance = true;
        if (mean == 0.0) {
            r.t = 0.0;
            r.p = 1.0;
        } else {
            r.t = std::numeric_limits<double>::quiet_NaN();
            r.p = std::numeric_limits<double>::quiet_NaN();
        }
        return r;
    }
    r.t = mean / (sd / std::sqrt(n));
    r.p = 2.0 * bm::cdf(bm::complement(bm::students_t_distribution<double>(r.df), std::abs(r.t)));
    return r;
}

double bonferroni(double p, std::size_t comparisons) {
    if (std::isnan(p)) return p;
    return std::min(1.0, p * static_cast<double>(comparisons));
}

std::vector<PairwiseComparison> pairwise_tests(const Matrix& data, const std::vector<std::string>& names) {
    if (static_cast<Eigen::Index>(names.size()) != data.cols()) {
        throw DomainError("pairwise_tests: one name per column required");
    }
    const auto k = static_cast<std::size_t>(data.cols());
    const std::size_t m = k * (k - 1) / 2;
    std::vector<PairwiseComparison> out;
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = i + 1; j < k; ++j) {
            const Eigen::VectorXd a = data.col(static_cast<Eigen::Index>(i));
            const Eigen::VectorXd b = data.col(static_cast<Eigen::Index>(j));
            const auto t = paired_t_test({a.data(), static_cast<std::size_t>(a.size())},
                                         {b.data(), static_cast<std::size_t>(b.size())});
            out.push_back({names[i], names[j], t.t, t.mean_diff, t.p, bonferroni(t.p, m), t.zero_variance});
        }
    }
    return out;
}

std::vector<double> midranks(std::span<const double> values) {
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return values[x] < values[y]; });
    std::vector<double> ranks(values.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
        const double rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = rank;
        i = j + 1;
    }
    return ranks;
}

std::vector<double> signed_rank_null_pmf(std::span<const double> ranks) {
    std::vector<std::size_t> doubled;
    std::size_t total = 0;
    for (double r : ranks) {
        const double d = 2.0 * r;
        if (d < 0.0 || std::abs(d - std::round(d)) > 1e-9) {
            throw DomainError("signed_rank_null_pmf: ranks must be non-negative multiples of 1/2");
        }
        doubled.push_back(static_cast<std::size_t>(std::llround(d)));
        total += doubled.back();
    }
    // counts[s]: number of sign assignments with doubled W+ = s.
    std::vector<double> counts(total + 1, 0.0);
    counts[0] = 1.0;
    std::size_t reach = 0;
    for (std::size_t r : doubled) {
        for (std::size_t s = reach + 1; s-- > 0;) {
            if (counts[s] != 0.0) counts[s + r] += counts[s];
        }
        reach += r;
    }
    const double norm = std::ldexp(1.0, static_cast<int>(ranks.size()));
    for (double& c : counts) c /= norm;
    return counts;
}

WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw DomainError("wilcoxon_signed_rank: samples must have equal length");
    }
    std::vector<double> diffs;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] != b[i]) diffs.push_back(a[i] - b[i]);
    }
    WilcoxonResult r;
    r.n = diffs.size();
    if (r.n == 0) {
        r.p = 1.0;
        return r;
    }
    std::vector<double> abs_d(diffs.size());
    std::transform(diffs.begin(), diffs.end(), abs_d.begin(), [](double d) { return std::abs(d); });
    const auto ranks = midranks(abs_d);
    for (std::size_t i = 0; i < diffs.size(); ++i) {
        (diffs[i] > 0.0 ? r.w_plus : r.w_minus) += ranks[i];
    }
    const auto n = static_cast<double>(r.n);
    if (r.n <= 25) {
        r.exact = true;
        const auto pmf = signed_rank_null_pmf(ranks);
        const auto w = static_cast<std::size_t>(std::llround(2.0 * r.w_plus));
        double lower = 0.0;
        double upper = 0.0;
        for (std::size_t s = 0; s < pmf.size(); ++s) {
            if (s <= w) lower += pmf[s];
            if (s >= w) upper += pmf[s];
        }
        r.p = std::min(1.0, 2.0 * std::min(lower, upper));
        return r;
    }
    r.exact = false;
    const double mean = n * (n + 1.0) / 4.0;
    double tie_term = 0.0;
    std::vector<double> sorted = ranks;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size();) {
        std::size_t j = i;
        while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
        const auto t = static_cast<double>(j - i);
        tie_term += t * t * t - t;
        i = j;
    }
    const double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    const double dev = std::max(0.0, std::abs(r.w_plus - mean) - 0.5);
    r.z = (var > 0.0) ? dev / std::sqrt(var) : 0.0;
    r.p = std::min(1.0, 2.0 * bm::cdf(bm::complement(bm::normal_distribution<double>(), r.z)));
    return r;
}

FriedmanResult friedman_test(const Matrix& data) {
    const auto n = data.rows();
    const auto k = data.cols();
    if (k < 2) {
        throw DomainError("friedman_test: need at least 2 conditions");
    }
    if (n < 1 || !data.allFinite()) {
        throw DomainError("friedman_test: need a complete matrix");
    }
    FriedmanResult r;
    r.rank_sums.assign(static_cast<std::size_t>(k), 0.0);
    double tie_term = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        std::vector<double> row(static_cast<std::size_t>(k));
        for (Eigen::Index j = 0; j < k; ++j) row[static_cast<std::size_t>(j)] = data(i, j);
        const auto ranks = midranks(row);
        for (std::size_t j = 0; j < ranks.size(); ++j) r.rank_sums[j] += ranks[j];
        std::vector<double> sorted = row;
        std::sort(sorted.begin(), sorted.end());
        for (std::size_t a = 0; a < sorted.size();) {
            std::size_t b = a;
            while (b < sorted.size() && sorted[b] == sorted[a]) ++b;
            const auto t = static_cast<double>(b - a);
            tie_term += t * t * t - t;
            a = b;
        }
    }
    const auto nd = static_cast<double>(n);
    const auto kd = static_cast<double>(k);
    double sum_sq = 0.0;
    for (double s : r.rank_sums) sum_sq += s * s;
    const double raw = 12.0 / (nd * kd * (kd + 1.0)) * sum_sq - 3.0 * nd * (kd + 1.0);
    const double correction = 1.0 - tie_term / (nd * (kd * kd * kd - kd));
    r.df = kd - 1.0;
    if (correction <= 0.0) {
        r.chi2 = 0.0;
        r.p = 1.0;
        return r;
    }
    r.chi2 = std::max(0.0, raw / correction);
    r.p = chi2_sf(r.chi2, r.df);
    return r;
}

FriedmanWilcoxonResult friedman_wilcoxon(const Matrix& ranks, const std::vector<std::string>& names) {
    if (static_cast<Eigen::Index>(names.size()) != ranks.cols()) {
        throw DomainError("friedman_wilcoxon: one name per column required");
    }
    FriedmanWilcoxonResult out;
    out.omnibus = friedman_test(ranks);
    const auto k = static_cast<std::size_t>(ranks.cols());
    const std::size_t m = k * (k - 1) / 2;
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = i + 1; j < k; ++j) {
            const Eigen::VectorXd a = ranks.col(static_cast<Eigen::Index>(i));
            const Eigen::VectorXd b = ranks.col(static_cast<Eigen::Index>(j));
            const auto w = wilcoxon_signed_rank({a.data(), static_cast<std::size_t>(a.size())},
                                                {b.data(), static_cast<std::size_t>(b.size())});
            out.pairwise.push_back({names[i], names[j], w.w_plus, (a - b).mean(), w.p, bonferroni(w.p, m), w.n == 0});
        }
    }
    return out;
}

nlohmann::json to_json(const PairwiseComparison& c) {
    auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
    return {{"a", c.a},
            {"b", c.b},
            {"statistic", num(c.statistic)},
            {"mean_diff", num(c.mean_diff)},
            {"p_raw", num(c.p_raw)},
            {"p_corrected", num(c.p_corrected)},
            {"zero_variance", c.zero_variance}};
}

}  // namespace gazegpt::evalstats
