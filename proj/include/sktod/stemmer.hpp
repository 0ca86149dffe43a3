#pragma once

#include <string>
#include <string_view>

namespace sktod {

// Porter (1980) suffix-stripping stemmer. Expects a lowercase ASCII word;
// anything containing non-letters is returned unchanged.
std::string porter_stem(std::string_view word);

}  // namespace sktod
