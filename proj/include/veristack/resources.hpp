#pragma once

#include <string_view>

// Data files compiled into the library.
namespace veristack::resources {

std::string_view generic_patterns();
std::string_view login_patterns();
std::string_view browser_domains();

}  // namespace veristack::resources
