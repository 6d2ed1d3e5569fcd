#pragma once

// Expression loading, coefficient-of-variation gene filter and binarization into
// the experiments-by-genes incidence matrix.

#include "alsi/core.hpp"
#include "alsi/csv.hpp"

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace alsi {

struct ExpressionMatrix {
    std::vector<std::string> experiments;  // row labels, e.g. cancer types
    std::vector<std::string> genes;        // column ids, unique
    Matrix values;                         // experiments x genes
};

enum class CvConvention { SdOverMean, MeanOverSd };

inline std::string to_string(CvConvention c) {
    return c == CvConvention::SdOverMean ? "sd-over-mean" : "mean-over-sd";
}

inline CvConvention parse_cv_convention(const std::string& s) {
    if (s == "sd-over-mean") return CvConvention::SdOverMean;
    if (s == "mean-over-sd") return CvConvention::MeanOverSd;
    throw ContractViolation("unknown CV convention '" + s + "' (expected sd-over-mean or mean-over-sd)");
}

struct FilterReport {
    std::vector<double> mean;
    std::vector<double> sd;  // sample standard deviation (n - 1)
    std::vector<double> cv;
    std::vector<bool> kept;
    double threshold_cv = 0.5;
    CvConvention convention = CvConvention::SdOverMean;
    Histogram cv_histogram;  // finite CV values only

    std::size_t kept_count() const { return static_cast<std::size_t>(std::count(kept.begin(), kept.end(), true)); }
};

struct IncidenceMatrix {
    std::vector<std::string> experiments;
    std::vector<std::string> genes;  // kept genes that survived binarization
    Matrix x;                        // experiments x genes, entries 0/1
    double expression_threshold = 0.0;
    std::vector<std::string> dropped;  // kept genes whose column became all-zero
};

inline void validate(const ExpressionMatrix& y) {
    if (y.values.rows() != static_cast<Eigen::Index>(y.experiments.size()) ||
        y.values.cols() != static_cast<Eigen::Index>(y.genes.size()))
        throw ContractViolation("expression matrix: label counts do not match matrix dimensions");
    for (std::size_t i = 0; i < y.experiments.size(); ++i)
        if (y.experiments[i].empty())
            throw ContractViolation("expression matrix: empty experiment label in row " + std::to_string(i + 1));
    std::set<std::string> seen;
    for (const auto& g : y.genes)
        if (!seen.insert(g).second) throw ParseError("duplicate gene id '" + g + "'");
}

inline ExpressionMatrix read_expression(std::istream& in, const std::string& source = "<stream>") {
    CsvTable t = read_csv(in, {.header = true, .row_labels = true}, source);
    if (t.header.empty()) throw ParseError(source + ": missing header row");
    ExpressionMatrix y;
    y.genes.assign(t.header.begin() + 1, t.header.end());
    y.experiments = std::move(t.row_labels);
    y.values = std::move(t.values);
    if (y.values.rows() == 0) y.values.resize(0, static_cast<Eigen::Index>(y.genes.size()));
    std::map<std::string, std::size_t> first_col;
    for (std::size_t j = 0; j < y.genes.size(); ++j) {
        auto [it, inserted] = first_col.emplace(y.genes[j], j + 2);
        if (!inserted)
            throw ParseError(source + ": duplicate gene id '" + y.genes[j] + "' in header columns " +
                             std::to_string(it->second) + " and " + std::to_string(j + 2));
    }
    validate(y);
    return y;
}

inline ExpressionMatrix load_expression(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    return read_expression(in, path);
}

inline void write_expression(const std::string& path, const ExpressionMatrix& y) {
    CsvTable t;
    t.header.push_back("label");
    t.header.insert(t.header.end(), y.genes.begin(), y.genes.end());
    t.row_labels = y.experiments;
    t.values = y.values;
    write_csv_file(path, t);
}

/// Per-gene coefficient of variation across experiments; kept iff cv > threshold.
inline FilterReport cv_filter(const ExpressionMatrix& y, double threshold_cv = 0.5,
                              CvConvention convention = CvConvention::SdOverMean, std::size_t bins = 30) {
    const Eigen::Index n = y.values.rows();
    if (n < 2) throw ContractViolation("cv_filter: need at least 2 experiments, got " + std::to_string(n));
    const Eigen::Index p = y.values.cols();
    constexpr double inf = std::numeric_limits<double>::infinity();

    FilterReport r;
    r.threshold_cv = threshold_cv;
    r.convention = convention;
    r.mean.resize(static_cast<std::size_t>(p));
    r.sd.resize(static_cast<std::size_t>(p));
    r.cv.resize(static_cast<std::size_t>(p));
    r.kept.resize(static_cast<std::size_t>(p));
    for (Eigen::Index j = 0; j < p; ++j) {
        const auto col = y.values.col(j);
        const double mean = col.mean();
        const double ss = (col.array() - mean).square().sum();
        const double sd = std::sqrt(ss / static_cast<double>(n - 1));
        const double am = std::abs(mean);
        double cv = 0.0;
        if (convention == CvConvention::SdOverMean) {
            if (sd == 0.0) cv = 0.0;
            else cv = am == 0.0 ? inf : sd / am;
        } else {
            if (sd == 0.0) cv = am > 0.0 ? inf : 0.0;
            else cv = am / sd;
        }
        const auto k = static_cast<std::size_t>(j);
        r.mean[k] = mean;
        r.sd[k] = sd;
        r.cv[k] = cv;
        r.kept[k] = cv > threshold_cv;
    }
    r.cv_histogram = make_histogram(r.cv, bins);
    return r;
}

/// Thresholds kept genes at the largest value observed among non-kept genes (or an override).
inline IncidenceMatrix binarize(const ExpressionMatrix& y, const FilterReport& report,
                                std::optional<double> threshold_override = std::nullopt,
                                Warnings* warnings = nullptr) {
    const Eigen::Index p = y.values.cols();
    if (report.kept.size() != static_cast<std::size_t>(p))
        throw ContractViolation("binarize: filter report does not match the expression matrix");

    double threshold = 0.0;
    if (threshold_override) {
        threshold = *threshold_override;
    } else {
        bool any = false;
        threshold = -std::numeric_limits<double>::infinity();
        for (Eigen::Index j = 0; j < p; ++j) {
            if (report.kept[static_cast<std::size_t>(j)]) continue;
            any = true;
            threshold = std::max(threshold, y.values.col(j).maxCoeff());
        }
        if (!any)
            throw ContractViolation(
                "binarize: every gene passed the CV filter, so the expression threshold is undefined; "
                "supply an explicit threshold override");
    }

    IncidenceMatrix out;
    out.experiments = y.experiments;
    out.expression_threshold = threshold;
    std::vector<Eigen::Index> cols;
    for (Eigen::Index j = 0; j < p; ++j) {
        if (!report.kept[static_cast<std::size_t>(j)]) continue;
        if ((y.values.col(j).array() > threshold).any()) {
            cols.push_back(j);
        } else {
            out.dropped.push_back(y.genes[static_cast<std::size_t>(j)]);
            warn(warnings, "binarize: gene '" + y.genes[static_cast<std::size_t>(j)] +
                               "' is never above the expression threshold; column dropped");
        }
    }
    out.x = Matrix::Zero(y.values.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) {
        out.genes.push_back(y.genes[static_cast<std::size_t>(cols[c])]);
        out.x.col(static_cast<Eigen::Index>(c)) =
            (y.values.col(cols[c]).array() > threshold).cast<double>().matrix();
    }
    return out;
}

inline void write_incidence(const std::string& path, const IncidenceMatrix& x) {
    CsvTable t;
    t.header.push_back("label");
    t.header.insert(t.header.end(), x.genes.begin(), x.genes.end());
    t.row_labels = x.experiments;
    t.values = x.x;
    write_csv_file(path, t);
}

/// Reads an incidence CSV. The expression threshold is not stored in the file.
inline IncidenceMatrix load_incidence(const std::string& path) {
    ExpressionMatrix y = load_expression(path);
    IncidenceMatrix x;
    x.experiments = std::move(y.experiments);
    x.genes = std::move(y.genes);
    x.x = std::move(y.values);
    for (Eigen::Index i = 0; i < x.x.size(); ++i) {
        const double v = x.x.data()[i];
        if (v != 0.0 && v != 1.0) throw ParseError(path + ": incidence entries must be 0 or 1");
    }
    return x;
}

}  // namespace alsi
