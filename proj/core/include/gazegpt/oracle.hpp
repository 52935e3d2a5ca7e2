#pragma once

#include <string>

#include "gazegpt/error.hpp"
#include "gazegpt/foveation.hpp"
#include "gazegpt/rng.hpp"
#include "gazegpt/scene.hpp"

namespace gazegpt::evalstats {

class EmptyCoverageError : public DomainError {
public:
    using DomainError::DomainError;
};

struct Coverage {
    std::string label;
    double area = 0.0;  ///< square pixels of the finest window covered by `label`
};

/// Region covering the largest part of the finest crop window. Equal areas resolve to the
/// lexicographically smaller label. Throws EmptyCoverageError if nothing overlaps.
Coverage dominant_coverage(const capture::SceneLayout& layout, const foveation::MultiscaleCrop& crop);

/// Stand-in classifier: answers the dominant label with probability `base_accuracy`,
/// otherwise a uniformly drawn different label from the layout.
std::string coverage_oracle(const capture::SceneLayout& layout, const foveation::MultiscaleCrop& crop,
                            double base_accuracy, Rng& rng);

}  // namespace gazegpt::evalstats
