#include "gazegpt/oracle.hpp"

#include <boost/random/uniform_01.hpp>
#include <boost/random/uniform_int_distribution.hpp>

#include <set>

namespace gazegpt::evalstats {

Coverage dominant_coverage(const capture::SceneLayout& layout, const foveation::MultiscaleCrop& crop) {
    if (crop.levels.empty()) {
        throw DomainError("dominant_coverage: crop has no levels");
    }
    const auto& w = crop.levels.front().window;
    // Pixel i covers [i - 0.5, i + 0.5).
    const capture::PixelRect window{w.x - 0.5, w.y - 0.5, w.x + w.size - 0.5, w.y + w.size - 0.5};
    Coverage best;
    for (const auto& region : layout.regions) {
        const double area = capture::overlap_area(window, region.rect);
        if (area <= 0.0) continue;
        if (area > best.area || (area == best.area && region.label < best.label)) {
            best = {region.label, area};
        }
    }
    if (best.area <= 0.0) {
        throw EmptyCoverageError("coverage oracle: crop intersects no labeled region");
    }
    return best;
}

std::string coverage_oracle(const capture::SceneLayout& layout, const foveation::MultiscaleCrop& crop,
                            double base_accuracy, Rng& rng) {
    if (!(base_accuracy >= 0.0 && base_accuracy <= 1.0)) {
        throw DomainError("coverage_oracle: base_accuracy must lie in [0, 1]");
    }
    const auto covered = dominant_coverage(layout, crop).label;
    boost::random::uniform_01<double> unit;
    if (unit(rng) < base_accuracy) return covered;
    std::set<std::string> others;
    for (const auto& region : layout.regions) {
        if (region.label != covered) others.insert(region.label);
    }
    if (others.empty()) return covered;
    boost::random::uniform_int_distribution<std::size_t> pick(0, others.size() - 1);
    return *std::next(others.begin(), static_cast<std::ptrdiff_t>(pick(rng)));
}

}  // namespace gazegpt::evalstats
