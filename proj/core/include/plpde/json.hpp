#pragma once

#if __has_include(<json.hpp>)
#include <json.hpp>
#else
#include "third_party/json.hpp"
#endif

namespace plpde {
using json = nlohmann::json;
}
