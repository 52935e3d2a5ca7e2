#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace gazegpt::evalstats {

/// Rows are participants (subjects), columns are conditions (modes).
using Matrix = Eigen::MatrixXd;

struct SumsOfSquares {
    double total = 0.0;
    double subjects = 0.0;
    double conditions = 0.0;
    double error = 0.0;
};

SumsOfSquares rm_sums_of_squares(const Matrix& data);

/// Greenhouse-Geisser epsilon from the k x k condition covariance S:
///   S_c = C S C with C = I - J/k (double centering)
///   eps = trace(S_c)^2 / ((k - 1) * sum_ij S_c(i,j)^2)
/// Lies in [1/(k-1), 1]; a covariance with zero trace (identical columns) gives 1.
double greenhouse_geisser_epsilon(const Matrix& data);

struct RmAnovaResult {
    SumsOfSquares ss;
    double f = 0.0;
    double df_conditions = 0.0;
    double df_error = 0.0;
    double epsilon = 1.0;
    double df_conditions_gg = 0.0;
    double df_error_gg = 0.0;
    double p_uncorrected = 1.0;
    double p = 1.0;  ///< Greenhouse-Geisser corrected
};

/// One-way repeated-measures ANOVA with the Greenhouse-Geisser correction. Needs >= 2
/// conditions and >= 3 subjects; throws DegenerateDataError for a constant matrix.
RmAnovaResult rm_anova_gg(const Matrix& data);

struct OneWayAnovaResult {
    double ss_between = 0.0;
    double ss_within = 0.0;
    double f = 0.0;
    double df_between = 0.0;
    double df_within = 0.0;
    double p = 1.0;
};

/// Between-groups one-way ANOVA; each column of `data` is a group.
OneWayAnovaResult one_way_anova(const Matrix& data);

struct PairedTTest {
    double mean_diff = 0.0;
    double t = 0.0;
    double df = 0.0;
    double p = 1.0;
    /// Differences are constant; t is 0 when they are all zero, otherwise undefined (NaN).
    bool zero_variance = false;
};

PairedTTest paired_t_test(std::span<const double> a, std::span<const double> b);

/// min(1, p * m)
double bonferroni(double p, std::size_t comparisons);

struct PairwiseComparison {
    std::string a;
    std::string b;
    double statistic = 0.0;
    double mean_diff = 0.0;  ///< mean(a - b)
    double p_raw = 1.0;
    double p_corrected = 1.0;
    bool zero_variance = false;
};

/// Paired t-tests over every column pair with Bonferroni correction.
std::vector<PairwiseComparison> pairwise_tests(const Matrix& data, const std::vector<std::string>& names);

/// Average ranks (1-based) with ties sharing the mean rank.
std::vector<double> midranks(std::span<const double> values);

/// Null distribution of W+ for the given (possibly tied) ranks. Index i is the probability
/// that W+ = i / 2; ranks must be multiples of 1/2.
std::vector<double> signed_rank_null_pmf(std::span<const double> ranks);

struct WilcoxonResult {
    double w_plus = 0.0;
    double w_minus = 0.0;
    std::size_t n = 0;  ///< non-zero differences
    bool exact = true;
    double z = 0.0;     ///< normal approximation only
    double p = 1.0;     ///< two-sided
};

/// Signed-rank test on paired samples. Zero differences are dropped; ties take midranks.
/// Exact (conditional on ties) for n <= 25, normal approximation with continuity and tie
/// corrections above.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b);

struct FriedmanResult {
    double chi2 = 0.0;
    double df = 0.0;
    double p = 1.0;
    std::vector<double> rank_sums;
};

/// Ranks within each row (ties averaged) and applies the tie-corrected Friedman statistic.
FriedmanResult friedman_test(const Matrix& data);

struct FriedmanWilcoxonResult {
    FriedmanResult omnibus;
    std::vector<PairwiseComparison> pairwise;  ///< statistic = W+, p Bonferroni-corrected
};

FriedmanWilcoxonResult friedman_wilcoxon(const Matrix& ranks, const std::vector<std::string>& names);

nlohmann::json to_json(const PairwiseComparison& c);

}  // namespace gazegpt::evalstats
