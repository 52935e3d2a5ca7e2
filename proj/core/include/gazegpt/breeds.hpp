#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace gazegpt::evalstats {

/// 81 recognized dog breeds used as the default label set.
const std::vector<std::string>& default_breeds();

/// One label per line; blank lines and surrounding whitespace are ignored, duplicates rejected.
std::vector<std::string> load_labels(const std::filesystem::path& path);

}  // namespace gazegpt::evalstats
