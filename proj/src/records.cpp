#include "auv/records.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "auv/errors.hpp"
#include "auv/version.hpp"

namespace auv {

using json = nlohmann::ordered_json;

namespace {

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoError("cannot write " + path.string());
    out << text;
    if (!out)
        throw IoError("failed writing " + path.string());
}

json parse_line(const std::string& line, const std::filesystem::path& path, std::size_t n) {
    try {
        return json::parse(line);
    } catch (const json::exception& e) {
        throw FormatError(path.string() + ":" + std::to_string(n) + ": " + e.what());
    }
}

}  // namespace

std::string format_records(const RecordsFile& file) {
    const auto& h = file.header;
    json header;
    header["schema"] = records_schema;
    header["tool_version"] = h.tool_version.empty() ? tool_version : h.tool_version;
    header["epsilon"] = h.epsilon;
    header["floor"] = h.floor;
    header["center"] = h.center;
    header["classes"] = h.classes;
    header["log_min"] = h.range.log_min;
    header["log_max"] = h.range.log_max;
    header["frozen_stats"] = h.frozen_range;
    header["input"] = h.input;
    header["count"] = file.records.size();

    std::string out = header.dump() + "\n";
    for (const auto& r : file.records) {
        json per_class = json::object();
        for (const auto& [c, s] : r.per_class_scale)
            per_class[std::to_string(c)] = s;
        json line;
        line["sample_id"] = r.sample_id;
        line["per_class_scale"] = per_class;
        line["sample_scale"] = r.sample_scale;
        line["auv"] = r.auv;
        out += line.dump() + "\n";
    }
    return out;
}

void write_records(const std::filesystem::path& path, const RecordsFile& file) {
    write_text(path, format_records(file));
}

RecordsFile read_records(const std::filesystem::path& path) {
    std::istringstream in(read_text(path));
    std::string line;
    std::size_t n = 0;
    RecordsFile file;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty())
            continue;
        const auto j = parse_line(line, path, n);
        try {
            if (!have_header) {
                if (j.value("schema", "") != records_schema)
                    throw FormatError(path.string() + ": not an AUV records file (schema " +
                                      j.value("schema", "<none>") + ")");
                auto& h = file.header;
                h.tool_version = j.at("tool_version").get<std::string>();
                h.epsilon = j.at("epsilon").get<double>();
                h.floor = j.at("floor").get<double>();
                h.center = j.at("center").get<bool>();
                h.classes = j.at("classes").get<std::vector<int>>();
                h.range = {j.at("log_min").get<double>(), j.at("log_max").get<double>()};
                h.frozen_range = j.value("frozen_stats", false);
                h.input = j.value("input", "");
                have_header = true;
                continue;
            }
            AUVRecord r;
            r.sample_id = j.at("sample_id").get<std::string>();
            for (const auto& [key, value] : j.at("per_class_scale").items())
                r.per_class_scale[std::stoi(key)] = value.get<double>();
            r.sample_scale = j.at("sample_scale").get<double>();
            r.auv = j.at("auv").get<double>();
            file.records.push_back(std::move(r));
        } catch (const json::exception& e) {
            throw FormatError(path.string() + ":" + std::to_string(n) + ": " + e.what());
        } catch (const std::invalid_argument&) {
            throw FormatError(path.string() + ":" + std::to_string(n) +
                              ": class keys must be integers");
        }
    }
    if (!have_header)
        throw FormatError(path.string() + ": empty records file");
    return file;
}

void write_stats(const std::filesystem::path& path, const LogRange& range, double floor) {
    json j;
    j["schema"] = stats_schema;
    j["log_min"] = range.log_min;
    j["log_max"] = range.log_max;
    j["floor"] = floor;
    write_text(path, j.dump(2) + "\n");
}

LogRange read_stats(const std::filesystem::path& path) {
    json j;
    try {
        j = json::parse(read_text(path));
        if (j.value("schema", "") != stats_schema)
            throw FormatError(path.string() + ": not an AUV stats file");
        return {j.at("log_min").get<double>(), j.at("log_max").get<double>()};
    } catch (const json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

}  // namespace auv
