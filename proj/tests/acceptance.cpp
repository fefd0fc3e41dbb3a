// Acceptance suite: one PASS/FAIL line per criterion, exit status 0 only if
// every criterion passes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "auv/commands.hpp"
#include "auv/duo_loss.hpp"
#include "auv/errors.hpp"
#include "auv/filtering.hpp"
#include "auv/gradcheck.hpp"
#include "auv/spectrum.hpp"
#include "oracles.hpp"
#include "temp_dir.hpp"

using namespace auv;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok && pass) {
            pass = false;
            detail = what;
        }
    }
};

int failures = 0;

void report(const std::string& name, const std::function<Outcome()>& body) {
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o.pass = false;
        o.detail = std::string("exception: ") + e.what();
    }
    if (!o.pass)
        ++failures;
    std::printf("%s %s%s%s\n", o.pass ? "PASS" : "FAIL", name.c_str(),
                o.detail.empty() ? "" : " -- ", o.detail.c_str());
    std::fflush(stdout);
}

std::string fmt(const char* f, double a, double b = 0.0) {
    char buf[160];
    std::snprintf(buf, sizeof buf, f, a, b);
    return buf;
}

double scale_of(const RowMatrix& m, double eps) {
    return semantic_scale(energy_distribution(singular_values(m), eps));
}

Outcome svd_matches_covariance() {
    Outcome o;
    const auto start = Clock::now();
    std::mt19937_64 rng(20240601);
    std::uniform_int_distribution<int> rows_d(2, 32);
    std::uniform_int_distribution<int> cols_d(2, 1024);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        int rows = rows_d(rng), cols = cols_d(rng);
        if (trial % 10 == 0) {
            rows = 32;
            cols = 1024;
        }
        ClassFeatureMatrix m{0, oracle::centered(oracle::random_matrix(rng, rows, cols)), true};
        const auto route = trial % 2 == 0 ? SvdRoute::gram : SvdRoute::bidiagonal;
        const auto p = energy_distribution(singular_values(m, route), 0.0).probs;
        const auto lambda = covariance_eigenvalues_oracle(m);
        const double total = std::accumulate(lambda.begin(), lambda.end(), 0.0);
        // the D x D covariance has D - min(D, cols) extra eigenvalues that must vanish
        o.require(p.size() == static_cast<std::size_t>(std::min(rows, cols)),
                  "spectrum length is not min(rows, cols)");
        for (std::size_t j = 0; j < lambda.size(); ++j) {
            const double expected = j < p.size() ? p[j] : 0.0;
            worst = std::max(worst, std::abs(expected - lambda[j] / total));
        }
    }
    const double t = seconds_since(start);
    o.require(worst <= 1e-8, fmt("max energy difference %.3g", worst));
    o.require(t < 10.0, fmt("took %.1f s", t));
    if (o.pass)
        o.detail = fmt("max energy difference %.3g, %.2f s", worst, t);
    return o;
}

Outcome scale_invariances() {
    Outcome o;
    std::mt19937_64 rng(77);
    std::uniform_int_distribution<int> dim(2, 12);
    std::uniform_real_distribution<double> mag(0.01, 100.0);
    std::uniform_int_distribution<int> pow2(-20, 20);
    std::bernoulli_distribution sign(0.5);
    double scale_err = 0, eps_err = 0, orth_err = 0, perm_err = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const int r = dim(rng), c = dim(rng) + 2;
        const auto z = oracle::random_matrix(rng, r, c);
        const double base0 = scale_of(z, 0.0);
        const double base_eps = scale_of(z, 1e-12);
        o.require(base0 >= 0.0 && base0 <= 1.0, "scale outside [0, 1]");

        // exact for power-of-two factors, which commute with every rounding
        const double k = std::ldexp(sign(rng) ? -1.0 : 1.0, pow2(rng));
        o.require(scale_of(RowMatrix(k * z), 0.0) == base0, "power-of-two rescale not exact");
        const double cfac = (sign(rng) ? -1.0 : 1.0) * mag(rng);
        scale_err = std::max(scale_err, std::abs(scale_of(RowMatrix(cfac * z), 0.0) - base0));
        eps_err = std::max(eps_err, std::abs(scale_of(RowMatrix(cfac * z), 1e-12) - base_eps));

        const RowMatrix rotated =
            oracle::random_orthogonal(rng, r) * z * oracle::random_orthogonal(rng, c);
        orth_err = std::max(orth_err, std::abs(scale_of(rotated, 0.0) - base0));

        std::vector<int> ri(r), ci(c);
        std::iota(ri.begin(), ri.end(), 0);
        std::iota(ci.begin(), ci.end(), 0);
        std::shuffle(ri.begin(), ri.end(), rng);
        std::shuffle(ci.begin(), ci.end(), rng);
        RowMatrix permuted(r, c);
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j)
                permuted(i, j) = z(ri[i], ci[j]);
        perm_err = std::max(perm_err, std::abs(scale_of(permuted, 0.0) - base0));
    }
    o.require(scale_err <= 1e-12, fmt("scale invariance error %.3g", scale_err));
    o.require(eps_err <= 1e-6, fmt("smoothed scale invariance error %.3g", eps_err));
    o.require(orth_err <= 1e-8, fmt("orthogonal invariance error %.3g", orth_err));
    o.require(perm_err <= 1e-8, fmt("permutation invariance error %.3g", perm_err));
    if (o.pass) {
        char buf[200];
        std::snprintf(buf, sizeof buf, "scale %.2g, eps %.2g, orthogonal %.2g, permutation %.2g",
                      scale_err, eps_err, orth_err, perm_err);
        o.detail = buf;
    }
    return o;
}

Outcome auv_normalization() {
    Outcome o;
    const std::vector<double> s{std::exp(-2.0), std::exp(-1.0), 1.0};
    const auto a = auv_values(s);
    o.require(std::abs(a[0] - 1.0) <= 1e-12 && std::abs(a[1] - 0.5) <= 1e-12 &&
                  std::abs(a[2]) <= 1e-12,
              "(e^-2, e^-1, 1) did not map to (1, 0.5, 0)");

    const std::vector<double> flat(6, 0.42);
    for (double x : auv_values(flat))
        o.require(x == 0.0, "degenerate batch not all zero");

    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(1e-6, 1.0);
    std::uniform_real_distribution<double> k(1e-3, 1e3);
    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> v(2 + trial % 30);
        for (auto& x : v)
            x = u(rng);
        const double c = k(rng);
        std::vector<double> w(v);
        for (auto& x : w)
            x *= c;
        const auto av = auv_values(v);
        const auto aw = auv_values(w);
        for (std::size_t i = 0; i < v.size(); ++i)
            worst = std::max(worst, std::abs(av[i] - aw[i]));
    }
    o.require(worst <= 1e-12, fmt("rescaling changed AUVs by %.3g", worst));
    if (o.pass)
        o.detail = fmt("rescaling error %.2g", worst);
    return o;
}

Outcome exhaustive_filtering() {
    Outcome o;
    // five scales whose log-spacing puts batch AUVs on a five-value grid
    const double grid[5] = {1.0, std::exp(-1.0), std::exp(-2.0), std::exp(-3.0),
                            std::exp(-4.0)};
    const double quantiles[] = {0.1, 0.125, 0.25, 1.0 / 3.0, 0.5, 0.6, 0.75, 0.9, 0.95, 1.0};
    std::size_t batches = 0;
    for (std::size_t n = 1; n <= 8; ++n) {
        std::vector<int> idx(n, 0);
        for (;;) {
            std::vector<AUVRecord> records(n);
            for (std::size_t i = 0; i < n; ++i) {
                records[i].sample_id = "s" + std::to_string(i);
                records[i].per_class_scale[0] = grid[idx[i]];
                records[i].sample_scale = grid[idx[i]];
            }
            normalize_records(records);
            std::vector<double> auvs;
            for (const auto& r : records)
                auvs.push_back(r.auv);

            std::vector<bool> previous(n, false);
            for (double p : quantiles) {
                const auto g = filter_global(records, p);
                const double brute = oracle::quantile_brute(auvs, p);
                o.require(g.thresholds.at(global_key) == brute, "threshold differs from oracle");
                std::size_t kept = 0;
                for (std::size_t i = 0; i < n; ++i) {
                    const bool r = g.entries[i].retained;
                    o.require(r == (auvs[i] <= brute), "retention differs from oracle");
                    o.require(!previous[i] || r, "retained set shrank as p grew");
                    previous[i] = r;
                    kept += r;
                }
                const auto bound = static_cast<std::size_t>(
                    std::ceil(p * static_cast<double>(n) - 1e-9));
                o.require(kept >= bound, "retention bound violated");

                const auto c = filter_per_class(records, p);
                for (std::size_t i = 0; i < n; ++i)
                    o.require(c.entries[i].retained == g.entries[i].retained,
                              "single-class per-class path differs from global");
                o.require(c.thresholds.at("0") == g.thresholds.at(global_key),
                          "per-class threshold differs from global");
            }
            ++batches;
            if (!o.pass)
                return o;

            std::size_t k = 0;
            while (k < n && ++idx[k] == 5)
                idx[k++] = 0;
            if (k == n)
                break;
        }
    }
    o.detail = std::to_string(batches) + " batches x " + std::to_string(std::size(quantiles)) +
               " quantiles";
    return o;
}

Outcome duo_gradients() {
    Outcome o;
    const auto start = Clock::now();
    const duo::DuoConfig cfg;
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto f = duo::random_batch(1000 + seed, {2, 2, 4, 4, 4}, cfg.gamma);
        const auto res = duo::check_gradients(f, cfg);
        worst = std::max(worst, res.max_rel());

        const auto noise = duo::standardize_noise(f.epsilon_raw);
        if (!noise.degenerate) {
            double m = 0, m2 = 0;
            for (double e : noise.epsilon_hat) {
                m += e;
                m2 += e * e;
            }
            const double n = static_cast<double>(noise.epsilon_hat.size());
            o.require(std::abs(m / n) <= 1e-9 && std::abs(m2 / n - 1.0) <= 1e-9,
                      "moment constraints violated");
        }

        duo::DuoConfig plain = cfg;
        plain.alpha = 0.0;
        duo::NoiseEstimate zero;
        zero.epsilon_hat.assign(2, 0.0);
        const auto shape = f.batch.shape();
        const double base = duo::baseline_loss(f.batch.probs, f.batch.labels, shape, plain);
        const double total = duo::duo_total_loss(f.batch, zero, f.scales, plain, 1).total;
        o.require(total == base, "alpha = 0, zero noise does not reduce to the baseline");
    }
    const double t = seconds_since(start);
    o.require(worst < 1e-4, fmt("max relative error %.3g", worst));
    o.require(t < 30.0, fmt("took %.1f s", t));
    if (o.pass)
        o.detail = fmt("max relative error %.3g, %.2f s", worst, t);
    return o;
}

Outcome noisy_sample_recovery() {
    Outcome o;
    const auto start = Clock::now();
    double recall = 0.0, precision = 0.0;
    const int seeds = 10;
    for (int s = 0; s < seeds; ++s) {
        cli::DemoOptions opt;
        opt.spec.seed = 7 + static_cast<std::uint64_t>(s);
        opt.workers = 1;
        const auto r = cli::run_demo(opt);
        recall += r.recall;
        precision += r.precision;
    }
    recall /= seeds;
    precision /= seeds;
    const double t = seconds_since(start);
    o.require(recall >= 0.9, fmt("mean recall %.3f", recall));
    o.require(precision >= 0.8, fmt("mean precision %.3f", precision));
    o.require(t < 60.0, fmt("took %.1f s", t));
    if (o.pass) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "mean recall %.3f, mean precision %.3f, %.1f s", recall,
                      precision, t);
        o.detail = buf;
    }
    return o;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int invoke(std::vector<std::string> args) {
    args.insert(args.begin(), "auvtool");
    std::vector<char*> argv;
    for (auto& a : args)
        argv.push_back(a.data());
    std::ostringstream out, err;
    return cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
}

Outcome cli_determinism() {
    Outcome o;
    TempDir data("accept-data"), out("accept-out");
    o.require(invoke({"synth", "-o", data.path().string()}) == 0, "synth failed");
    std::string records, manifests[2];
    int runs = 0;
    for (const char* w : {"1", "4", "8", "1", "4", "8"}) {
        // same file names in separate directories: the manifest header names its input
        const auto run_dir = out / ("run" + std::to_string(runs++));
        std::filesystem::create_directories(run_dir);
        const auto rec = (run_dir / "auv.jsonl").string();
        o.require(invoke({"compute-auv", data.path().string(), "-o", rec, "--workers", w}) == 0,
                  "compute-auv failed");
        const std::string strategies[2] = {"global_raw", "per_class_raw"};
        for (int s = 0; s < 2; ++s) {
            const auto man = (run_dir / ("manifest-" + std::to_string(s) + ".jsonl")).string();
            o.require(invoke({"filter", rec, "-o", man, "--strategy", strategies[s], "--workers",
                              w}) == 0,
                      "filter failed");
            if (manifests[s].empty())
                manifests[s] = slurp(man);
            else
                o.require(slurp(man) == manifests[s], "manifest bytes differ");
        }
        if (records.empty())
            records = slurp(rec);
        else
            o.require(slurp(rec) == records, "records bytes differ");
    }
    if (o.pass)
        o.detail = "6 runs over workers {1, 4, 8}";
    return o;
}

}  // namespace

int main() {
    report("svd-covariance-oracle", svd_matches_covariance);
    report("entropy-scale-invariances", scale_invariances);
    report("auv-normalization", auv_normalization);
    report("filtering-exhaustive", exhaustive_filtering);
    report("duo-gradients", duo_gradients);
    report("noisy-sample-recovery", noisy_sample_recovery);
    report("cli-determinism", cli_determinism);
    std::printf("%s: %d failed\n", failures == 0 ? "ALL PASS" : "SOME FAILED", failures);
    return failures == 0 ? exit_codes::ok : exit_codes::acceptance;
}
