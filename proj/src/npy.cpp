#include "auv/npy.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>
#include <sstream>

#include "auv/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "npy codec assumes a little-endian host");

namespace auv::npy {

namespace {

constexpr unsigned char magic[] = {0x93, 'N', 'U', 'M', 'P', 'Y'};
constexpr std::size_t preamble = 10;  // magic + version + u16 header length

std::string dict_value(const std::string& header, const std::string& key) {
    const std::string quoted = "'" + key + "'";
    auto pos = header.find(quoted);
    if (pos == std::string::npos)
        throw FormatError("npy header missing key " + key);
    pos = header.find(':', pos + quoted.size());
    if (pos == std::string::npos)
        throw FormatError("npy header malformed near " + key);
    ++pos;
    while (pos < header.size() && header[pos] == ' ')
        ++pos;
    if (pos >= header.size())
        throw FormatError("npy header truncated");

    std::size_t end;
    if (header[pos] == '\'') {
        end = header.find('\'', pos + 1);
        if (end == std::string::npos)
            throw FormatError("npy header unterminated string");
        return header.substr(pos + 1, end - pos - 1);
    }
    if (header[pos] == '(') {
        end = header.find(')', pos);
        if (end == std::string::npos)
            throw FormatError("npy header unterminated tuple");
        return header.substr(pos, end - pos + 1);
    }
    end = header.find_first_of(",}", pos);
    if (end == std::string::npos)
        throw FormatError("npy header malformed value");
    auto v = header.substr(pos, end - pos);
    while (!v.empty() && v.back() == ' ')
        v.pop_back();
    return v;
}

std::vector<std::size_t> parse_shape(const std::string& tuple) {
    std::vector<std::size_t> shape;
    std::string body = tuple.substr(1, tuple.size() - 2);
    std::stringstream ss(body);
    std::string item;
    while (std::getline(ss, item, ',')) {
        auto first = item.find_first_not_of(' ');
        if (first == std::string::npos)
            continue;
        auto last = item.find_last_not_of(' ');
        item = item.substr(first, last - first + 1);
        std::size_t used = 0;
        unsigned long long v = 0;
        try {
            v = std::stoull(item, &used);
        } catch (const std::exception&) {
            throw FormatError("npy shape entry is not an integer: " + item);
        }
        if (used != item.size())
            throw FormatError("npy shape entry is not an integer: " + item);
        shape.push_back(static_cast<std::size_t>(v));
    }
    return shape;
}

}  // namespace

std::size_t Array::size() const noexcept {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                           std::multiplies<>());
}

Array parse(std::span<const unsigned char> bytes) {
    if (bytes.size() < preamble || std::memcmp(bytes.data(), magic, 6) != 0)
        throw FormatError("not an npy container (bad magic)");
    if (bytes[6] != 1 || bytes[7] != 0)
        throw FormatError("unsupported npy version " + std::to_string(bytes[6]) +
                          "." + std::to_string(bytes[7]));
    const std::size_t header_len = bytes[8] | (std::size_t{bytes[9]} << 8);
    if (bytes.size() < preamble + header_len)
        throw FormatError("npy header truncated");
    const std::string header(reinterpret_cast<const char*>(bytes.data()) + preamble,
                             header_len);
    if (header.find('{') == std::string::npos || header.find('}') == std::string::npos)
        throw FormatError("npy header is not a dict");

    Array out;
    const auto descr = dict_value(header, "descr");
    std::size_t width;
    if (descr == "<f4") {
        out.dtype = Dtype::float32;
        width = 4;
    } else if (descr == "<f8") {
        out.dtype = Dtype::float64;
        width = 8;
    } else {
        throw FormatError("unsupported npy dtype " + descr);
    }
    if (dict_value(header, "fortran_order") != "False")
        throw FormatError("fortran-ordered npy arrays are not supported");
    out.shape = parse_shape(dict_value(header, "shape"));

    const std::size_t count = out.size();
    const std::size_t payload = bytes.size() - preamble - header_len;
    if (payload != count * width)
        throw FormatError("npy payload has " + std::to_string(payload) +
                          " bytes, expected " + std::to_string(count * width));

    out.data.resize(count);
    const unsigned char* src = bytes.data() + preamble + header_len;
    if (width == 4) {
        for (std::size_t i = 0; i < count; ++i) {
            float f;
            std::memcpy(&f, src + 4 * i, 4);
            out.data[i] = f;
        }
    } else {
        std::memcpy(out.data.data(), src, 8 * count);
    }
    return out;
}

Array read(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    try {
        return parse(bytes);
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

std::vector<unsigned char> serialize(std::span<const std::size_t> shape,
                                     std::span<const double> data, Dtype dtype) {
    const std::size_t count = std::accumulate(shape.begin(), shape.end(),
                                              std::size_t{1}, std::multiplies<>());
    if (count != data.size())
        throw ShapeError("npy shape does not match data length");

    std::string header = "{'descr': '";
    header += dtype == Dtype::float32 ? "<f4" : "<f8";
    header += "', 'fortran_order': False, 'shape': (";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        header += std::to_string(shape[i]);
        if (shape.size() == 1 || i + 1 < shape.size())
            header += ",";
        if (i + 1 < shape.size())
            header += " ";
    }
    header += "), }";
    const std::size_t unpadded = preamble + header.size() + 1;
    header.append((64 - unpadded % 64) % 64, ' ');
    header += '\n';

    std::vector<unsigned char> out(magic, magic + 6);
    out.push_back(1);
    out.push_back(0);
    out.push_back(static_cast<unsigned char>(header.size() & 0xff));
    out.push_back(static_cast<unsigned char>(header.size() >> 8));
    out.insert(out.end(), header.begin(), header.end());

    const std::size_t width = dtype == Dtype::float32 ? 4 : 8;
    const std::size_t offset = out.size();
    out.resize(offset + width * count);
    unsigned char* dst = out.data() + offset;
    if (dtype == Dtype::float32) {
        for (std::size_t i = 0; i < count; ++i) {
            const float f = static_cast<float>(data[i]);
            std::memcpy(dst + 4 * i, &f, 4);
        }
    } else {
        std::memcpy(dst, data.data(), 8 * count);
    }
    return out;
}

void write(const std::filesystem::path& path, std::span<const std::size_t> shape,
           std::span<const double> data, Dtype dtype) {
    const auto bytes = serialize(shape, data, dtype);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out)
        throw IoError("short write to " + path.string());
}

}  // namespace auv::npy
