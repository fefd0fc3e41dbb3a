#include "auv/filtering.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

#include "auv/errors.hpp"
#include "auv/version.hpp"

namespace auv {

using json = nlohmann::ordered_json;

std::string to_string(Strategy s) {
    switch (s) {
    case Strategy::global_raw: return "global_raw";
    case Strategy::global_normalized: return "global_normalized";
    case Strategy::per_class_raw: return "per_class_raw";
    case Strategy::per_class_normalized: return "per_class_normalized";
    }
    return "unknown";
}

Strategy parse_strategy(const std::string& text) {
    if (text == "global_raw" || text == "a") return Strategy::global_raw;
    if (text == "global_normalized" || text == "b") return Strategy::global_normalized;
    if (text == "per_class_raw" || text == "c") return Strategy::per_class_raw;
    if (text == "per_class_normalized" || text == "d") return Strategy::per_class_normalized;
    throw ParameterError("unknown strategy " + text);
}

bool is_per_class(Strategy s) noexcept {
    return s == Strategy::per_class_raw || s == Strategy::per_class_normalized;
}

std::size_t FilterManifest::retained_count() const noexcept {
    return static_cast<std::size_t>(
        std::count_if(entries.begin(), entries.end(), [](const auto& e) { return e.retained; }));
}

double quantile_threshold(std::span<const double> values, double p_tilde) {
    if (values.empty())
        throw ParameterError("quantile of an empty list");
    if (!(p_tilde > 0.0 && p_tilde <= 1.0))
        throw ParameterError("quantile must lie in (0, 1]");
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const auto n = sorted.size();
    // F jumps only at observed values; the first index whose CDF reaches
    // p_tilde, skipping past ties so F is evaluated at the value itself.
    for (std::size_t i = 0; i < n; ++i) {
        if (i + 1 < n && sorted[i + 1] == sorted[i])
            continue;
        if (static_cast<double>(i + 1) / static_cast<double>(n) >= p_tilde)
            return sorted[i];
    }
    return sorted.back();
}

namespace {

void check_quantile(double p_tilde) {
    if (!(p_tilde > 0.0 && p_tilde <= 1.0))
        throw ParameterError("quantile must lie in (0, 1]");
}

std::vector<const AUVRecord*> sorted_by_id(const std::vector<AUVRecord>& records) {
    std::vector<const AUVRecord*> out;
    out.reserve(records.size());
    for (const auto& r : records)
        out.push_back(&r);
    std::stable_sort(out.begin(), out.end(),
                     [](const auto* a, const auto* b) { return a->sample_id < b->sample_id; });
    return out;
}

}  // namespace

FilterManifest filter_global(const std::vector<AUVRecord>& records, double p_tilde,
                             Strategy strategy) {
    check_quantile(p_tilde);
    if (records.empty())
        throw ParameterError("no records to filter");
    if (is_per_class(strategy))
        throw ParameterError("filter_global needs a global strategy");

    std::vector<double> auvs;
    auvs.reserve(records.size());
    for (const auto& r : records)
        auvs.push_back(r.auv);
    const double threshold = quantile_threshold(auvs, p_tilde);

    FilterManifest m;
    m.strategy = strategy;
    m.quantile = p_tilde;
    m.thresholds[global_key] = threshold;
    for (const auto* r : sorted_by_id(records)) {
        ManifestEntry e;
        e.sample_id = r->sample_id;
        e.auv = r->auv;
        e.retained = r->auv <= threshold;
        if (!e.retained)
            e.reason = global_key;
        m.entries.push_back(std::move(e));
    }
    return m;
}

FilterManifest filter_per_class(const std::vector<AUVRecord>& records, double p_tilde,
                                std::vector<int> classes, Strategy strategy,
                                bool union_mode, double floor) {
    check_quantile(p_tilde);
    if (records.empty())
        throw ParameterError("no records to filter");
    if (!is_per_class(strategy))
        throw ParameterError("filter_per_class needs a per-class strategy");

    if (classes.empty()) {
        std::set<int> seen;
        for (const auto& r : records)
            for (const auto& [c, s] : r.per_class_scale)
                seen.insert(c);
        classes.assign(seen.begin(), seen.end());
    }

    const auto ordered = sorted_by_id(records);
    // class -> per-sample AUV, indexed like `ordered`
    std::map<int, std::vector<std::optional<double>>> class_auv;
    std::map<int, double> thresholds;
    for (int c : classes) {
        std::vector<double> scales;
        std::vector<std::size_t> owners;
        for (std::size_t i = 0; i < ordered.size(); ++i) {
            auto it = ordered[i]->per_class_scale.find(c);
            if (it != ordered[i]->per_class_scale.end()) {
                scales.push_back(it->second);
                owners.push_back(i);
            }
        }
        if (scales.empty())
            throw ClassError("class " + std::to_string(c) + " is absent from every record");
        const auto auvs = auv_values(scales, floor);
        auto& column = class_auv[c];
        column.assign(ordered.size(), std::nullopt);
        for (std::size_t k = 0; k < owners.size(); ++k)
            column[owners[k]] = auvs[k];
        thresholds[c] = quantile_threshold(auvs, p_tilde);
    }

    FilterManifest m;
    m.strategy = strategy;
    m.quantile = p_tilde;
    m.union_mode = union_mode;
    m.classes = classes;
    for (const auto& [c, t] : thresholds)
        m.thresholds[std::to_string(c)] = t;

    for (std::size_t i = 0; i < ordered.size(); ++i) {
        ManifestEntry e;
        e.sample_id = ordered[i]->sample_id;
        e.auv = ordered[i]->auv;
        std::optional<int> first_violation;
        bool any_present = false;
        bool any_pass = false;
        for (int c : classes) {
            const auto& a = class_auv[c][i];
            if (!a)
                continue;
            any_present = true;
            e.per_class_auv[c] = *a;
            if (*a <= thresholds[c])
                any_pass = true;
            else if (!first_violation)
                first_violation = c;
        }
        if (union_mode) {
            e.retained = any_pass;
            if (!e.retained)
                e.reason = any_present ? std::to_string(*first_violation) : "NONE";
        } else {
            e.retained = !first_violation;
            if (!e.retained)
                e.reason = std::to_string(*first_violation);
        }
        m.entries.push_back(std::move(e));
    }
    return m;
}

std::vector<std::size_t> histogram_counts(std::span<const double> auvs, std::size_t bins) {
    if (bins < 1)
        throw ParameterError("histogram needs at least one bin");
    std::vector<std::size_t> counts(bins, 0);
    for (double v : auvs) {
        const double clamped = std::clamp(v, 0.0, 1.0);
        auto k = static_cast<std::size_t>(clamped * static_cast<double>(bins));
        counts[std::min(k, bins - 1)]++;
    }
    return counts;
}

void export_histogram(std::span<const double> auvs, std::size_t bins,
                      const std::filesystem::path& path) {
    const auto counts = histogram_counts(auvs, bins);
    std::ofstream out(path, std::ios::trunc);
    if (!out)
        throw IoError("cannot write " + path.string());
    out.precision(std::numeric_limits<double>::max_digits10);
    out << "bin_lo,bin_hi,count\n";
    const double width = 1.0 / static_cast<double>(bins);
    for (std::size_t k = 0; k < bins; ++k) {
        const double hi = k + 1 == bins ? 1.0 : static_cast<double>(k + 1) * width;
        out << static_cast<double>(k) * width << ',' << hi << ',' << counts[k] << '\n';
    }
    if (!out)
        throw IoError("failed writing " + path.string());
}

std::string format_manifest(const FilterManifest& m, const std::string& extra_json) {
    json header;
    header["schema"] = manifest_schema;
    header["tool_version"] = tool_version;
    header["strategy"] = to_string(m.strategy);
    header["quantile"] = m.quantile;
    header["union"] = m.union_mode;
    header["classes"] = m.classes;
    json thresholds = json::object();
    for (const auto& [k, t] : m.thresholds)
        thresholds[k] = t;
    header["thresholds"] = thresholds;
    header["retained"] = m.retained_count();
    header["total"] = m.entries.size();
    const auto extra = json::parse(extra_json);
    for (const auto& [k, v] : extra.items())
        header[k] = v;

    std::string out = header.dump() + "\n";
    const bool per_class = is_per_class(m.strategy);
    for (const auto& e : m.entries) {
        json line;
        line["sample_id"] = e.sample_id;
        line["auv"] = e.auv;
        json pc = json::object();
        for (const auto& [c, a] : e.per_class_auv)
            pc[std::to_string(c)] = a;
        line["per_class_auv"] = pc;
        line["retained"] = e.retained;
        line["reason"] = e.retained ? json(nullptr) : json(e.reason);
        line["strategy"] = to_string(m.strategy);
        line["quantile"] = m.quantile;
        if (per_class) {
            json governing = json::object();
            for (const auto& [c, a] : e.per_class_auv)
                governing[std::to_string(c)] = m.thresholds.at(std::to_string(c));
            line["thresholds"] = governing;
        } else {
            line["threshold"] = m.thresholds.at(global_key);
        }
        out += line.dump() + "\n";
    }
    return out;
}

void write_manifest(const std::filesystem::path& path, const FilterManifest& manifest,
                    const std::string& extra_json) {
    const auto text = format_manifest(manifest, extra_json);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoError("cannot write " + path.string());
    out << text;
    if (!out)
        throw IoError("failed writing " + path.string());
}

FilterManifest read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open " + path.string());
    FilterManifest m;
    std::string line;
    bool have_header = false;
    std::size_t n = 0;
    try {
        while (std::getline(in, line)) {
            ++n;
            if (line.empty())
                continue;
            const auto j = json::parse(line);
            if (!have_header) {
                if (j.value("schema", "") != manifest_schema)
                    throw FormatError(path.string() + ": not a filter manifest");
                m.strategy = parse_strategy(j.at("strategy").get<std::string>());
                m.quantile = j.at("quantile").get<double>();
                m.union_mode = j.at("union").get<bool>();
                m.classes = j.at("classes").get<std::vector<int>>();
                for (const auto& [k, v] : j.at("thresholds").items())
                    m.thresholds[k] = v.get<double>();
                have_header = true;
                continue;
            }
            ManifestEntry e;
            e.sample_id = j.at("sample_id").get<std::string>();
            e.auv = j.at("auv").get<double>();
            for (const auto& [k, v] : j.at("per_class_auv").items())
                e.per_class_auv[std::stoi(k)] = v.get<double>();
            e.retained = j.at("retained").get<bool>();
            if (!j.at("reason").is_null())
                e.reason = j.at("reason").get<std::string>();
            m.entries.push_back(std::move(e));
        }
    } catch (const json::exception& e) {
        throw FormatError(path.string() + ":" + std::to_string(n) + ": " + e.what());
    }
    if (!have_header)
        throw FormatError(path.string() + ": empty manifest");
    return m;
}

}  // namespace auv
