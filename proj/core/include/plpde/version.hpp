#pragma once

#include "plpde/json.hpp"

namespace plpde {

/// Library version string (MAJOR.MINOR.PATCH).
const char* version();

/// Versions of plpde and of the numerical libraries it was built against.
json build_versions();

}  // namespace plpde
