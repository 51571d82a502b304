#pragma once

#include <string_view>

namespace mgcsl {

// git-describe style identifier baked in at configure time.
std::string_view version_string();

}  // namespace mgcsl
