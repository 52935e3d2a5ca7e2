#pragma once

// Reference computations used to check the library. They are deliberately written from
// definitions with plain loops and share no code with gazegpt::core.

#include <array>
#include <cstdint>
#include <map>
#include <utility>
#include <vector>

namespace oracle {

struct Pinhole {
    double fx, fy, cx, cy, k1 = 0.0, k2 = 0.0;
};

/// Perspective division followed by radial distortion.
std::pair<double, double> project(const Pinhole& cam, double X, double Y, double Z);

/// Point where the ray origin + s * dir meets the plane Z = depth, projected.
std::pair<double, double> project_ray_at_depth(const Pinhole& cam, const std::array<double, 3>& origin,
                                               const std::array<double, 3>& dir, double depth);

/// Angle in degrees between two direction vectors via the law of cosines on unit vectors.
double angle_deg(const std::array<double, 3>& a, const std::array<double, 3>& b);

/// Homography with h33 = 1 from four correspondences: the 8x8 system solved by Gaussian
/// elimination with partial pivoting in long double.
std::array<long double, 9> homography_8x8(const std::array<std::pair<double, double>, 4>& src,
                                          const std::array<std::pair<double, double>, 4>& dst);

std::pair<double, double> apply(const std::array<long double, 9>& h, double x, double y);

/// Repeated-measures sums of squares from their definitions.
struct SS {
    double total, subjects, conditions, error;
};
SS rm_sums_of_squares(const std::vector<std::vector<double>>& rows);

/// F of the uncorrected one-way repeated-measures ANOVA.
double rm_f(const std::vector<std::vector<double>>& rows);

/// Greenhouse-Geisser epsilon computed through the orthonormal-contrast route
/// (Helmert contrasts), a different path from double centering.
double gg_epsilon_helmert(const std::vector<std::vector<double>>& rows);

/// Paired t statistic from the textbook formula.
double paired_t(const std::vector<double>& a, const std::vector<double>& b);

/// Exact signed-rank null distribution by enumerating all 2^n sign vectors.
/// Keys are 2 * W+ (integers since midranks are multiples of 1/2).
std::map<long, double> signed_rank_enumeration(const std::vector<double>& ranks);

/// Two-sided exact p of W+ by enumeration.
double signed_rank_p_enumeration(const std::vector<double>& ranks, double w_plus);

/// Friedman chi-square (tie corrected) with ranks counted from the definition.
double friedman_chi2(const std::vector<std::vector<double>>& rows);

/// Area in square pixels of the window [x - 0.5, x + size - 0.5)^2 covered by a rectangle,
/// estimated by sampling `samples` x `samples` points per pixel.
double covered_area_by_sampling(double wx, double wy, int size, double rx0, double ry0, double rx1, double ry1,
                                int samples);

}  // namespace oracle
