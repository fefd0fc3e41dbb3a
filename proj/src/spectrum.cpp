#include "auv/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "auv/errors.hpp"

namespace auv {

namespace {

bool all_finite(const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

std::vector<double> gram_route(const RowMatrix& a) {
    Eigen::MatrixXd gram = a.rows() <= a.cols() ? Eigen::MatrixXd(a * a.transpose())
                                                : Eigen::MatrixXd(a.transpose() * a);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success)
        return {};
    const auto& ev = solver.eigenvalues();
    std::vector<double> out(static_cast<std::size_t>(ev.size()));
    for (Eigen::Index i = 0; i < ev.size(); ++i)
        out[static_cast<std::size_t>(i)] = std::sqrt(std::max(ev(ev.size() - 1 - i), 0.0));
    return out;
}

template <typename Solver>
std::vector<double> svd_route(const RowMatrix& a) {
    Solver svd(a);
    if (svd.info() != Eigen::Success)
        return {};
    const auto& sv = svd.singularValues();
    return std::vector<double>(sv.data(), sv.data() + sv.size());
}

}  // namespace

SingularSpectrum singular_values(const RowMatrix& matrix, SvdRoute route) {
    if (matrix.size() == 0)
        throw ShapeError("singular_values of an empty matrix");
    if (!matrix.allFinite())
        throw DataError("singular_values of a non-finite matrix");

    const auto min_dim = std::min(matrix.rows(), matrix.cols());
    if (route == SvdRoute::automatic)
        route = min_dim <= gram_route_limit ? SvdRoute::gram : SvdRoute::bidiagonal;

    std::vector<double> values = route == SvdRoute::gram
                                     ? gram_route(matrix)
                                     : svd_route<Eigen::BDCSVD<Eigen::MatrixXd>>(matrix);
    // Retry with one-sided Jacobi, which always converges in exact arithmetic.
    if (values.empty() || !all_finite(values))
        values = svd_route<Eigen::JacobiSVD<Eigen::MatrixXd>>(matrix);
    if (values.empty() || !all_finite(values))
        throw NumericalError("SVD did not converge");

    std::sort(values.begin(), values.end(), std::greater<>());
    return {std::move(values)};
}

SingularSpectrum singular_values(const ClassFeatureMatrix& matrix, SvdRoute route) {
    return singular_values(matrix.data, route);
}

EnergySpectrum energy_distribution(const SingularSpectrum& spectrum, double epsilon) {
    if (!(epsilon >= 0.0))
        throw ParameterError("epsilon must be >= 0");
    double total = 0.0;
    for (double s : spectrum.values)
        total += s * s;

    EnergySpectrum out;
    out.epsilon = epsilon;
    out.probs.assign(spectrum.values.size(), 0.0);
    const double denom = total + epsilon;
    if (denom > 0.0)
        for (std::size_t j = 0; j < spectrum.values.size(); ++j)
            out.probs[j] = spectrum.values[j] * spectrum.values[j] / denom;
    return out;
}

double semantic_scale(const EnergySpectrum& energy) {
    const auto r = energy.probs.size();
    if (r <= 1)
        return 0.0;
    double h = 0.0;
    for (double p : energy.probs)
        if (p > 0.0)
            h -= p * std::log(p);
    if (h <= 0.0)
        return 0.0;
    return std::clamp(h / std::log(static_cast<double>(r)), 0.0, 1.0);
}

double sample_scale(const std::map<int, double>& per_class, std::span<const int> subset) {
    if (per_class.empty())
        throw ParameterError("sample_scale of an empty class map");
    if (subset.empty()) {
        double sum = 0.0;
        for (const auto& [c, s] : per_class)
            sum += s;
        return sum;
    }
    double sum = 0.0;
    bool any = false;
    for (const auto& [c, s] : per_class) {
        if (std::find(subset.begin(), subset.end(), c) != subset.end()) {
            sum += s;
            any = true;
        }
    }
    if (!any)
        throw ParameterError("none of the selected classes is present");
    return sum;
}

LogRange log_range(std::span<const double> scales, double floor) {
    if (scales.empty())
        throw ParameterError("AUV normalization needs at least one sample");
    if (!(floor > 0.0))
        throw ParameterError("floor must be > 0");
    LogRange range{std::numeric_limits<double>::infinity(),
                   -std::numeric_limits<double>::infinity()};
    for (double s : scales) {
        const double l = std::log(std::max(s, floor));
        range.log_min = std::min(range.log_min, l);
        range.log_max = std::max(range.log_max, l);
    }
    return range;
}

double auv_value(double scale, const LogRange& range, double floor) {
    const double span = range.log_max - range.log_min;
    if (!(span > 0.0))
        return 0.0;
    const double l = std::log(std::max(scale, floor));
    return std::clamp(1.0 - (l - range.log_min) / span, 0.0, 1.0);
}

std::vector<double> auv_values(std::span<const double> scales, double floor) {
    const auto range = log_range(scales, floor);
    std::vector<double> out;
    out.reserve(scales.size());
    for (double s : scales)
        out.push_back(auv_value(s, range, floor));
    return out;
}

std::vector<AUVRecord> auv_batch(std::span<const std::pair<std::string, double>> scales,
                                 double floor) {
    std::vector<AUVRecord> records;
    records.reserve(scales.size());
    for (const auto& [id, s] : scales) {
        AUVRecord r;
        r.sample_id = id;
        r.sample_scale = s;
        records.push_back(std::move(r));
    }
    normalize_records(records, floor);
    return records;
}

LogRange normalize_records(std::vector<AUVRecord>& records, double floor,
                           std::optional<LogRange> frozen) {
    if (!(floor > 0.0))
        throw ParameterError("floor must be > 0");
    LogRange range;
    if (frozen) {
        range = *frozen;
    } else {
        std::vector<double> scales;
        scales.reserve(records.size());
        for (const auto& r : records)
            scales.push_back(r.sample_scale);
        range = log_range(scales, floor);
    }
    for (auto& r : records)
        r.auv = auv_value(r.sample_scale, range, floor);
    return range;
}

std::vector<double> symmetric_eigenvalues_jacobi(RowMatrix a) {
    const Eigen::Index n = a.rows();
    if (a.cols() != n)
        throw ShapeError("Jacobi eigensolver needs a square matrix");

    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        double diag = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            diag += a(i, i) * a(i, i);
            for (Eigen::Index j = i + 1; j < n; ++j)
                off += a(i, j) * a(i, j);
        }
        if (off <= 1e-32 * diag || off == 0.0)
            break;

        for (Eigen::Index p = 0; p < n - 1; ++p) {
            for (Eigen::Index q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0)
                    continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double akp = a(k, p);
                    const double akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double apk = a(p, k);
                    const double aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
            }
        }
    }

    std::vector<double> ev(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i)
        ev[static_cast<std::size_t>(i)] = a(i, i);
    std::sort(ev.begin(), ev.end(), std::greater<>());
    return ev;
}

std::vector<double> covariance_eigenvalues_oracle(const ClassFeatureMatrix& matrix) {
    if (matrix.rows() < 2)
        throw ParameterError("covariance oracle needs at least two rows");
    if (matrix.cols() < 2)
        throw ParameterError("covariance oracle needs at least two columns");
    const auto& z = matrix.data;
    const double scale = 1.0 / static_cast<double>(z.cols() - 1);
    RowMatrix cov(z.rows(), z.rows());
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        for (Eigen::Index j = i; j < z.rows(); ++j) {
            double acc = 0.0;
            for (Eigen::Index k = 0; k < z.cols(); ++k)
                acc += z(i, k) * z(j, k);
            cov(i, j) = cov(j, i) = acc * scale;
        }
    }
    auto ev = symmetric_eigenvalues_jacobi(std::move(cov));
    for (auto& v : ev)
        v = std::max(v, 0.0);
    return ev;
}

void export_spectrum_curves(std::span<const SingularSpectrum> spectra,
                            const std::filesystem::path& path,
                            std::span<const std::string> labels) {
    if (spectra.empty())
        throw ParameterError("no spectra to export");
    if (!labels.empty() && labels.size() != spectra.size())
        throw ParameterError("one label per spectrum is required");
    std::ofstream out(path, std::ios::trunc);
    if (!out)
        throw IoError("cannot write " + path.string());
    out.precision(std::numeric_limits<double>::max_digits10);
    out << "spectrum,index,sigma,energy_fraction,cumulative_energy\n";
    for (std::size_t s = 0; s < spectra.size(); ++s) {
        const auto energy = energy_distribution(spectra[s], 0.0);
        double cumulative = 0.0;
        for (std::size_t j = 0; j < energy.probs.size(); ++j) {
            cumulative += energy.probs[j];
            if (!labels.empty())
                out << labels[s];
            else
                out << s;
            out << ',' << j + 1 << ',' << spectra[s].values[j] << ','
                << energy.probs[j] << ',' << cumulative << '\n';
        }
    }
    if (!out)
        throw IoError("failed writing " + path.string());
}

}  // namespace auv
