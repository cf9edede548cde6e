#pragma once

#include <string>
#include <string_view>

namespace tgt::metrics {

// Classic Porter (1980) suffix-stripping stemmer over lowercase ASCII words.
// Non-alphabetic input is returned unchanged.
std::string porter_stem(std::string_view word);

}  // namespace tgt::metrics
