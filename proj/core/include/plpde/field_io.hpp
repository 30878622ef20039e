#pragma once

// Field dump format: raw little-endian 64-bit floats in row-major grid order
// (`<stem>.f64`) with a JSON sidecar header (`<stem>.json`).

#include <filesystem>

#include "plpde/hermfield.hpp"
#include "plpde/json.hpp"

namespace plpde {

/// Writes a scalar field; `extra` is merged into the header.
void write_field(const std::filesystem::path& stem, const ScalarField& field, const json& extra = json::object());

/// Writes a Hermitian field as (re, im) pairs, point-major, each matrix row-major.
void write_field(const std::filesystem::path& stem, const HermitianField& field, const json& extra = json::object());

/// Reads a scalar field written by write_field. Throws ConfigurationError on
/// a missing or inconsistent file.
ScalarField read_scalar_field(const std::filesystem::path& stem);

/// Reads the sidecar header of a dumped field.
json read_field_header(const std::filesystem::path& stem);

}  // namespace plpde
