#include "auv/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include <json.hpp>

#include "auv/errors.hpp"

namespace auv {

std::vector<DatasetEntry> scan_dataset(const std::filesystem::path& input,
                                       std::optional<std::filesystem::path> sidecar) {
    namespace fs = std::filesystem;
    std::vector<DatasetEntry> entries;
    if (fs::is_regular_file(input)) {
        entries.push_back({input.stem().string(), input, {}});
    } else if (fs::is_directory(input)) {
        for (const auto& item : fs::directory_iterator(input))
            if (item.is_regular_file() && item.path().extension() == ".npy")
                entries.push_back({item.path().stem().string(), item.path(), {}});
        if (!sidecar && fs::exists(input / classes_sidecar))
            sidecar = input / classes_sidecar;
    } else {
        throw InputError("input " + input.string() + " does not exist");
    }
    if (entries.empty())
        throw InputError("no tensor files in " + input.string());
    std::sort(entries.begin(), entries.end(),
              [](const auto& a, const auto& b) { return a.sample_id < b.sample_id; });

    if (sidecar) {
        std::ifstream in(*sidecar);
        if (!in)
            throw IoError("cannot open " + sidecar->string());
        std::map<std::string, std::vector<int>> classes;
        try {
            classes = nlohmann::json::parse(in).get<std::map<std::string, std::vector<int>>>();
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(sidecar->string() + ": " + e.what());
        }
        for (auto& e : entries) {
            auto it = classes.find(e.sample_id);
            if (it != classes.end())
                e.class_ids = it->second;
        }
    }
    return entries;
}

}  // namespace auv
