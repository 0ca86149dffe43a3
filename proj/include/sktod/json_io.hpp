#pragma once

#include <string>
#include <string_view>

#include <json.hpp>

namespace sktod {

// Parses JSON text, rejecting duplicate object keys. Errors are raised as
// ParseError with "source:line:column" or the key path of the duplicate.
nlohmann::json parse_json_strict(std::string_view text, std::string_view source);

}  // namespace sktod
