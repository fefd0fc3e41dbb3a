#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "auv/spectrum.hpp"

namespace auv {

/// First line of an AUV records file.
struct RecordsHeader {
    std::string tool_version;
    double epsilon = default_epsilon;
    double floor = default_floor;
    bool center = true;
    std::vector<int> classes;  ///< class subset; empty means all
    LogRange range;
    bool frozen_range = false;
    std::string input;
};

struct RecordsFile {
    RecordsHeader header;
    std::vector<AUVRecord> records;
};

/// JSON Lines: a header object, then one object per record in the order given.
std::string format_records(const RecordsFile& file);
void write_records(const std::filesystem::path& path, const RecordsFile& file);
/// Throws FormatError on schema mismatch.
RecordsFile read_records(const std::filesystem::path& path);

void write_stats(const std::filesystem::path& path, const LogRange& range, double floor);
LogRange read_stats(const std::filesystem::path& path);

}  // namespace auv
