#pragma once

#include <string_view>

// Data files compiled into the library (see resources/ and data/).
namespace tag2cred::resources {

std::string_view public_suffix_list();
std::string_view codebook_prompt();
std::string_view vocabulary_json();

}  // namespace tag2cred::resources
