#include "plpde/field_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "plpde/errors.hpp"

namespace plpde {

namespace {

std::filesystem::path with_suffix(const std::filesystem::path& stem, const char* suffix) {
    return std::filesystem::path(stem.string() + suffix);
}

void write_doubles(const std::filesystem::path& path, const double* data, std::size_t count) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigurationError("cannot open '" + path.string() + "' for writing");
    if constexpr (std::endian::native == std::endian::little) {
        out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * sizeof(double)));
    } else {
        for (std::size_t i = 0; i < count; ++i) {
            std::uint64_t bits;
            std::memcpy(&bits, data + i, sizeof bits);
            bits = __builtin_bswap64(bits);
            out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
        }
    }
    if (!out) throw ConfigurationError("write to '" + path.string() + "' failed");
}

void write_header(const std::filesystem::path& stem, json header, const json& extra) {
    for (auto it = extra.begin(); it != extra.end(); ++it) header[it.key()] = it.value();
    std::ofstream out(with_suffix(stem, ".json"));
    if (!out) throw ConfigurationError("cannot open '" + with_suffix(stem, ".json").string() + "' for writing");
    out << header.dump(2) << '\n';
}

}  // namespace

void write_field(const std::filesystem::path& stem, const ScalarField& field, const json& extra) {
    write_doubles(with_suffix(stem, ".f64"), field.values.data(), field.values.size());
    write_header(stem,
                 json{{"geometry", field.geometry.to_json()},
                      {"shape", field.geometry.shape()},
                      {"components", json::array({"value"})},
                      {"layout", "row-major grid, one float64 per point"},
                      {"dtype", "float64"},
                      {"endianness", "little"}},
                 extra);
}

void write_field(const std::filesystem::path& stem, const HermitianField& field, const json& extra) {
    write_doubles(with_suffix(stem, ".f64"), reinterpret_cast<const double*>(field.data.data()), field.data.size() * 2);
    write_header(stem,
                 json{{"geometry", field.geometry.to_json()},
                      {"shape", field.geometry.shape()},
                      {"matrix_size", field.n()},
                      {"components", json::array({"re", "im"})},
                      {"layout", "row-major grid; per point an n x n row-major matrix of (re, im) pairs"},
                      {"dtype", "float64"},
                      {"endianness", "little"}},
                 extra);
}

json read_field_header(const std::filesystem::path& stem) {
    std::ifstream in(with_suffix(stem, ".json"));
    if (!in) throw ConfigurationError("cannot read field header '" + with_suffix(stem, ".json").string() + "'");
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigurationError("malformed field header: " + std::string(e.what()));
    }
}

ScalarField read_scalar_field(const std::filesystem::path& stem) {
    const json header = read_field_header(stem);
    if (header.value("endianness", "") != "little" || header.value("dtype", "") != "float64") {
        throw ConfigurationError("unsupported field encoding in '" + stem.string() + "'");
    }
    ModelGeometry geometry = ModelGeometry::from_json(header.at("geometry"));
    ScalarField field(geometry);
    const auto path = with_suffix(stem, ".f64");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigurationError("cannot read field data '" + path.string() + "'");
    in.read(reinterpret_cast<char*>(field.values.data()), static_cast<std::streamsize>(field.values.size() * sizeof(double)));
    if (in.gcount() != static_cast<std::streamsize>(field.values.size() * sizeof(double))) {
        throw ConfigurationError("field data '" + path.string() + "' is shorter than its header declares");
    }
    if constexpr (std::endian::native != std::endian::little) {
        for (auto& v : field.values) {
            std::uint64_t bits;
            std::memcpy(&bits, &v, sizeof bits);
            bits = __builtin_bswap64(bits);
            std::memcpy(&v, &bits, sizeof bits);
        }
    }
    return field;
}

}  // namespace plpde
