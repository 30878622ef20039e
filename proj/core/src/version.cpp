#include "plpde/version.hpp"

#include <string>

#include <Eigen/Core>
#include <fftw3.h>

namespace plpde {

const char* version() { return PLPDE_VERSION; }

json build_versions() {
    return json{{"plpde", PLPDE_VERSION},
                {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                              std::to_string(EIGEN_MINOR_VERSION)},
                {"fftw", std::string(fftw_version)},
                {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                      std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                      std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
                {"compiler", __VERSION__}};
}

}  // namespace plpde
