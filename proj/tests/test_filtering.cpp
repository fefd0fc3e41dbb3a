#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "auv/errors.hpp"
#include "auv/filtering.hpp"
#include "oracles.hpp"
#include "temp_dir.hpp"

using namespace auv;

namespace {

std::vector<AUVRecord> global_records(const std::vector<double>& auvs) {
    std::vector<AUVRecord> r;
    for (std::size_t i = 0; i < auvs.size(); ++i) {
        AUVRecord rec;
        char id[16];
        std::snprintf(id, sizeof id, "s%03zu", i);
        rec.sample_id = id;
        rec.auv = auvs[i];
        r.push_back(rec);
    }
    return r;
}

/// Records whose only class is 0, with AUVs computed the normal way.
std::vector<AUVRecord> single_class_records(const std::vector<double>& scales) {
    std::vector<AUVRecord> r;
    for (std::size_t i = 0; i < scales.size(); ++i) {
        AUVRecord rec;
        rec.sample_id = "s" + std::to_string(100 + i);
        rec.per_class_scale[0] = scales[i];
        rec.sample_scale = scales[i];
        r.push_back(rec);
    }
    normalize_records(r);
    return r;
}

std::set<std::string> retained_ids(const FilterManifest& m) {
    std::set<std::string> out;
    for (const auto& e : m.entries)
        if (e.retained)
            out.insert(e.sample_id);
    return out;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("quantile threshold examples") {
    const std::vector<double> steps{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
    CHECK(quantile_threshold(steps, 0.5) == 0.5);
    CHECK(quantile_threshold(steps, 1.0) == 1.0);
    CHECK(quantile_threshold(steps, 0.05) == 0.1);

    std::vector<double> twenty;
    for (int i = 1; i <= 20; ++i)
        twenty.push_back(0.05 * i);
    CHECK(quantile_threshold(twenty, 0.95) == twenty[18]);

    const std::vector<double> ties{0.3, 0.3, 0.3, 0.9};
    CHECK(quantile_threshold(ties, 0.5) == 0.3);
    CHECK(quantile_threshold(ties, 0.8) == 0.9);

    CHECK_THROWS_AS(quantile_threshold(std::vector<double>{}, 0.5), ParameterError);
    CHECK_THROWS_AS(quantile_threshold(steps, 0.0), ParameterError);
    CHECK_THROWS_AS(quantile_threshold(steps, 1.5), ParameterError);
}

TEST_CASE("quantile threshold agrees with enumeration") {
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> grid(0, 6);
    std::uniform_int_distribution<int> size(1, 30);
    std::uniform_real_distribution<double> pd(0.01, 1.0);
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<double> v(static_cast<std::size_t>(size(rng)));
        for (auto& x : v)
            x = grid(rng) / 6.0;
        const double p = pd(rng);
        CHECK(quantile_threshold(v, p) == oracle::quantile_brute(v, p));
    }
}

TEST_CASE("global filter examples") {
    std::vector<double> auvs;
    for (int i = 0; i < 20; ++i)
        auvs.push_back(i / 19.0);
    const auto records = global_records(auvs);

    const auto m = filter_global(records, 0.95);
    CHECK(m.retained_count() == 19);
    CHECK(m.thresholds.at(global_key) == auvs[18]);
    const auto& last = m.entries.back();
    CHECK(last.auv == 1.0);
    CHECK_FALSE(last.retained);
    CHECK(last.reason == global_key);

    CHECK(filter_global(records, 1.0).retained_count() == 20);

    const auto degenerate = global_records(std::vector<double>(7, 0.0));
    CHECK(filter_global(degenerate, 0.5).retained_count() == 7);

    CHECK_THROWS_AS(filter_global({}, 0.5), ParameterError);
    CHECK_THROWS_AS(filter_global(records, 0.5, Strategy::per_class_raw), ParameterError);
    CHECK_THROWS_AS(filter_global(records, 0.0), ParameterError);
}

TEST_CASE("entries are ordered by sample id whatever the input order") {
    auto records = global_records({0.1, 0.5, 0.9, 0.3});
    auto shuffled = records;
    std::reverse(shuffled.begin(), shuffled.end());
    const auto a = format_manifest(filter_global(records, 0.75));
    const auto b = format_manifest(filter_global(shuffled, 0.75));
    CHECK(a == b);
}

TEST_CASE("per-class filter drops on the violating class") {
    // class 1 background, class 2 tumor; sample c has an unusually low tumor scale
    std::vector<AUVRecord> r(4);
    const char* ids[] = {"a", "b", "c", "d"};
    const double bg[] = {0.80, 0.82, 0.81, 0.79};
    const double tumor[] = {0.70, 0.72, 0.10, 0.71};
    for (int i = 0; i < 4; ++i) {
        r[i].sample_id = ids[i];
        r[i].per_class_scale = {{1, bg[i]}, {2, tumor[i]}};
        r[i].sample_scale = bg[i] + tumor[i];
    }
    normalize_records(r);

    const auto m = filter_per_class(r, 0.75);
    CHECK(m.retained_count() == 2);
    for (const auto& e : m.entries) {
        if (e.sample_id == "c") {
            CHECK_FALSE(e.retained);
            CHECK(e.reason == "2");
        }
    }
    CHECK(m.thresholds.size() == 2);

    CHECK(filter_per_class(r, 1.0).retained_count() == 4);

    const auto tumor_only = filter_per_class(r, 0.75, {2});
    CHECK(tumor_only.retained_count() == 3);
    CHECK_FALSE(tumor_only.entries[2].retained);

    // the union reading keeps a sample that passes any one class
    const auto any = filter_per_class(r, 0.75, {}, Strategy::per_class_raw, true);
    CHECK(any.retained_count() >= m.retained_count());
    CHECK(any.union_mode);

    CHECK_THROWS_AS(filter_per_class(r, 0.75, {9}), ClassError);
    CHECK_THROWS_AS(filter_per_class(r, 0.75, {}, Strategy::global_raw), ParameterError);
}

TEST_CASE("union mode drops samples that carry none of the selected classes") {
    std::vector<AUVRecord> r(3);
    r[0].sample_id = "a";
    r[0].per_class_scale = {{1, 0.5}};
    r[1].sample_id = "b";
    r[1].per_class_scale = {{1, 0.6}};
    r[2].sample_id = "c";
    r[2].per_class_scale = {{2, 0.6}};
    const auto conj = filter_per_class(r, 1.0, {1});
    CHECK(conj.entries[2].retained);
    const auto uni = filter_per_class(r, 1.0, {1}, Strategy::per_class_raw, true);
    CHECK_FALSE(uni.entries[2].retained);
    CHECK(uni.entries[2].reason == "NONE");
}

TEST_CASE("single-class per-class filter matches the global path") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.05, 2.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> s(15);
        for (auto& x : s)
            x = u(rng);
        const auto r = single_class_records(s);
        for (double p : {0.5, 0.8, 0.95, 1.0}) {
            const auto g = filter_global(r, p);
            const auto c = filter_per_class(r, p);
            CHECK(retained_ids(g) == retained_ids(c));
            CHECK(g.thresholds.at(global_key) == c.thresholds.at("0"));
        }
    }
}

TEST_CASE("filter properties on random batches") {
    std::mt19937_64 rng(6);
    std::uniform_int_distribution<int> grid(0, 9);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> auvs(1 + trial % 25);
        for (auto& x : auvs)
            x = grid(rng) / 9.0;
        const auto r = global_records(auvs);
        std::set<std::string> previous;
        for (double p : {0.1, 0.3, 0.5, 0.75, 0.9, 0.95, 1.0}) {
            const auto m = filter_global(r, p);
            const auto kept = retained_ids(m);
            CHECK(std::includes(kept.begin(), kept.end(), previous.begin(), previous.end()));
            previous = kept;
            const double n = static_cast<double>(auvs.size());
            CHECK(m.retained_count() >= static_cast<std::size_t>(std::ceil(p * n - 1e-9)));
            const double t = m.thresholds.at(global_key);
            for (const auto& e : m.entries)
                CHECK(e.retained == (e.auv <= t));

            // re-filtering the retained set at its own threshold keeps all of it
            std::vector<double> kept_auvs;
            for (const auto& e : m.entries)
                if (e.retained)
                    kept_auvs.push_back(e.auv);
            CHECK(std::all_of(kept_auvs.begin(), kept_auvs.end(),
                              [&](double a) { return a <= t; }));
        }
    }
}

TEST_CASE("re-filtering at the same quantile need not keep everything") {
    // three distinct values at p = 0.5: the retained pair has its own median
    const auto r = global_records({0.0, 0.5, 1.0});
    const auto first = filter_global(r, 0.5);
    REQUIRE(first.retained_count() == 2);
    std::vector<AUVRecord> kept;
    for (std::size_t i = 0; i < r.size(); ++i)
        if (first.entries[i].retained)
            kept.push_back(r[i]);
    CHECK(filter_global(kept, 0.5).retained_count() == 1);
}

TEST_CASE("conjunctive per-class retention is the intersection of single-class runs") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.05, 2.0);
    std::bernoulli_distribution present(0.8);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<AUVRecord> r(12);
        for (std::size_t i = 0; i < r.size(); ++i) {
            r[i].sample_id = "s" + std::to_string(10 + i);
            r[i].per_class_scale[0] = u(rng);
            for (int c = 1; c < 3; ++c)
                if (present(rng))
                    r[i].per_class_scale[c] = u(rng);
        }
        const std::vector<int> classes{0, 1, 2};
        bool skip = false;
        for (int c : classes) {
            skip = skip || std::none_of(r.begin(), r.end(), [&](const auto& rec) {
                       return rec.per_class_scale.count(c) > 0;
                   });
        }
        if (skip)
            continue;
        const auto all = filter_per_class(r, 0.8, classes);
        auto expected = retained_ids(filter_per_class(r, 0.8, {0}));
        for (int c : {1, 2}) {
            const auto one = retained_ids(filter_per_class(r, 0.8, {c}));
            std::set<std::string> both;
            std::set_intersection(expected.begin(), expected.end(), one.begin(), one.end(),
                                  std::inserter(both, both.begin()));
            expected = both;
        }
        CHECK(retained_ids(all) == expected);
    }
}

TEST_CASE("histogram counts") {
    const std::vector<double> ends{0.0, 1.0};
    CHECK(histogram_counts(ends, 2) == std::vector<std::size_t>{1, 1});

    const std::vector<double> halves(9, 0.5);
    const auto h = histogram_counts(halves, 10);
    CHECK(std::count_if(h.begin(), h.end(), [](auto c) { return c > 0; }) == 1);

    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> many(1000);
    for (auto& x : many)
        x = u(rng);
    const auto counts = histogram_counts(many, 10);
    const double sd = std::sqrt(1000 * 0.1 * 0.9);
    std::size_t total = 0;
    for (auto c : counts) {
        CHECK(std::abs(static_cast<double>(c) - 100.0) <= 5 * sd);
        total += c;
    }
    CHECK(total == 1000);
    CHECK_THROWS_AS(histogram_counts(many, 0), ParameterError);
}

TEST_CASE("histogram CSV") {
    TempDir dir("hist");
    const std::vector<double> v{0.0, 0.2, 0.7, 1.0};
    export_histogram(v, 4, dir / "h.csv");
    std::ifstream in(dir / "h.csv");
    std::string line;
    std::getline(in, line);
    CHECK(line == "bin_lo,bin_hi,count");
    std::size_t total = 0, rows = 0;
    while (std::getline(in, line)) {
        total += std::stoul(line.substr(line.rfind(',') + 1));
        ++rows;
    }
    CHECK(rows == 4);
    CHECK(total == 4);
    CHECK_THROWS_AS(export_histogram(v, 4, dir / "missing" / "h.csv"), IoError);
}

TEST_CASE("manifest round trip and stable bytes") {
    TempDir dir("manifest");
    std::vector<AUVRecord> r(3);
    const char* ids[] = {"b", "a", "c"};
    for (int i = 0; i < 3; ++i) {
        r[i].sample_id = ids[i];
        r[i].per_class_scale = {{1, 0.3 + 0.2 * i}, {4, 0.9 - 0.3 * i}};
        r[i].sample_scale = 1.2;
    }
    normalize_records(r);
    const auto m = filter_per_class(r, 0.6, {}, Strategy::per_class_normalized);
    write_manifest(dir / "m1.jsonl", m, R"({"note": "x"})");
    write_manifest(dir / "m2.jsonl", filter_per_class(r, 0.6, {}, Strategy::per_class_normalized),
                   R"({"note": "x"})");
    CHECK(slurp(dir / "m1.jsonl") == slurp(dir / "m2.jsonl"));

    const auto back = read_manifest(dir / "m1.jsonl");
    CHECK(back.strategy == Strategy::per_class_normalized);
    CHECK(back.quantile == 0.6);
    CHECK(back.thresholds == m.thresholds);
    REQUIRE(back.entries.size() == 3);
    CHECK(back.entries[0].sample_id == "a");
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(back.entries[i].retained == m.entries[i].retained);
        CHECK(back.entries[i].reason == m.entries[i].reason);
        CHECK(back.entries[i].per_class_auv == m.entries[i].per_class_auv);
    }

    std::ofstream(dir / "bad.jsonl") << "{\"schema\": \"other\"}\n";
    CHECK_THROWS_AS(read_manifest(dir / "bad.jsonl"), FormatError);
    CHECK_THROWS_AS(read_manifest(dir / "absent.jsonl"), IoError);
}

TEST_CASE("strategy names") {
    for (auto s : {Strategy::global_raw, Strategy::global_normalized, Strategy::per_class_raw,
                   Strategy::per_class_normalized})
        CHECK(parse_strategy(to_string(s)) == s);
    CHECK(parse_strategy("c") == Strategy::per_class_raw);
    CHECK(is_per_class(Strategy::per_class_normalized));
    CHECK_FALSE(is_per_class(Strategy::global_normalized));
    CHECK_THROWS_AS(parse_strategy("zzz"), ParameterError);
}
