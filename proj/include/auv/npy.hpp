#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace auv::npy {

enum class Dtype { float32, float64 };

/// A dense C-contiguous array read from an NPY v1.0 file. Values are held
/// as doubles whatever the on-disk type; `dtype` records what the file had.
struct Array {
    std::vector<std::size_t> shape;
    std::vector<double> data;
    Dtype dtype = Dtype::float32;

    std::size_t size() const noexcept;
};

/// Parses an NPY v1.0 file. Accepts little-endian '<f4' and '<f8' in C order.
/// Throws FormatError on a malformed container and IoError if unreadable.
Array read(const std::filesystem::path& path);
Array parse(std::span<const unsigned char> bytes);

/// Serializes to an NPY v1.0 byte stream, header padded to 64 bytes as numpy
/// does. Narrowing to float32 rounds to nearest.
std::vector<unsigned char> serialize(std::span<const std::size_t> shape,
                                     std::span<const double> data,
                                     Dtype dtype = Dtype::float32);
void write(const std::filesystem::path& path,
           std::span<const std::size_t> shape,
           std::span<const double> data,
           Dtype dtype = Dtype::float32);

}  // namespace auv::npy
