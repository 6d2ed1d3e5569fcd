#pragma once

// Low-dimensional projections (classical MDS, Sammon mapping) and their file
// outputs: static SVG scatter plots and CSV coordinate tables.

#include "alsi/core.hpp"
#include "alsi/csv.hpp"
#include "alsi/linalg.hpp"
#include "alsi/mixture.hpp"
#include "alsi/rng.hpp"

#include <fstream>
#include <map>
#include <set>

namespace alsi {

struct Projection {
    std::vector<std::string> items;
    Matrix coords;                   // items x dims
    double stress = 0.0;             // Sammon stress; 0 for MDS
    std::vector<double> explained;   // MDS: retained eigenvalue fractions of the positive spectrum
    std::vector<double> trace;       // Sammon: stress after each accepted step
    std::vector<std::string> color_key;  // optional, one per item
};

namespace detail {

inline void require_distance_matrix(const Matrix& d, const std::string& name) {
    require_symmetric(d, name);
    require_finite(d, name);
    for (Eigen::Index i = 0; i < d.rows(); ++i)
        if (d(i, i) != 0.0) throw ContractViolation(name + ": distance matrix must have a zero diagonal");
    if ((d.array() < 0.0).any()) throw ContractViolation(name + ": distances must be non-negative");
}

inline std::vector<std::string> default_ids(Eigen::Index n) {
    std::vector<std::string> ids;
    for (Eigen::Index i = 0; i < n; ++i) ids.push_back(std::to_string(i + 1));
    return ids;
}

}  // namespace detail

/// Torgerson scaling: double-center -D^2/2 and keep the top `dims` eigenpairs.
inline Projection classical_mds(const Matrix& d, Eigen::Index dims, Warnings* warnings = nullptr) {
    detail::require_distance_matrix(d, "classical_mds");
    if (dims < 1) throw ContractViolation("classical_mds: dims must be >= 1");
    const Eigen::Index n = d.rows();
    const Matrix j = Matrix::Identity(n, n) - Matrix::Constant(n, n, 1.0 / static_cast<double>(n));
    const Matrix b = symmetrized(-0.5 * j * d.cwiseAbs2() * j);
    const EigResult e = sym_eig(b, "double-centered distances");

    const double top = e.values.empty() ? 0.0 : std::max(0.0, e.values.front());
    Eigen::Index positive = 0;
    double positive_sum = 0.0;
    for (double v : e.values)
        if (top > 0.0 && v > kRankTol * top) {
            ++positive;
            positive_sum += v;
        }
    if (!e.values.empty() && e.values.back() < -1e-10 * std::max(1.0, top)) {
        std::size_t negatives = 0;
        for (double v : e.values) negatives += v < -1e-10 * std::max(1.0, top);
        warn(warnings, "classical_mds: dropped " + std::to_string(negatives) +
                           " negative eigenvalue(s); distances are not exactly Euclidean");
    }
    Eigen::Index kept = dims;
    if (dims > positive) {
        warn(warnings, "classical_mds: requested " + std::to_string(dims) + " dimensions but only " +
                           std::to_string(positive) + " positive eigenvalue(s) exist");
        kept = positive;
    }

    Projection p;
    p.items = detail::default_ids(n);
    p.coords = Matrix::Zero(n, std::max<Eigen::Index>(kept, positive == 0 ? dims : kept));
    for (Eigen::Index c = 0; c < kept; ++c) {
        const double lambda = e.values[static_cast<std::size_t>(c)];
        p.coords.col(c) = e.vectors.col(c) * std::sqrt(lambda);
        p.explained.push_back(lambda / positive_sum);
    }
    return p;
}

struct SammonConfig {
    int max_iter = 1000;
    double step = 0.1;  // first trial move, as a fraction of the mean distance
    double tol = 1e-12;
    std::uint64_t seed = 0;
};

/// Sammon stress sum_{i<j} (d_ij - e_ij)^2 / d_ij / sum_{i<j} d_ij of a configuration.
inline double sammon_stress(const Matrix& d, const Matrix& y) {
    double num = 0.0;
    double c = 0.0;
    for (Eigen::Index i = 0; i < d.rows(); ++i)
        for (Eigen::Index j = i + 1; j < d.rows(); ++j) {
            const double e = (y.row(i) - y.row(j)).norm();
            num += (d(i, j) - e) * (d(i, j) - e) / d(i, j);
            c += d(i, j);
        }
    return c > 0.0 ? num / c : 0.0;
}

/// Gradient descent on the Sammon stress from the classical MDS start. The step halves
/// on every rejected move, so accepted stresses never increase.
inline Projection sammon(const Matrix& d, Eigen::Index dims, const SammonConfig& cfg = {},
                         Warnings* warnings = nullptr) {
    detail::require_distance_matrix(d, "sammon");
    const Eigen::Index n = d.rows();
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j)
            if (!(d(i, j) > 0.0))
                throw ContractViolation("sammon: items " + std::to_string(i) + " and " + std::to_string(j) +
                                        " are at zero distance; merge duplicates first");

    Projection start = classical_mds(d, dims, warnings);
    Matrix y = Matrix::Zero(n, dims);
    y.leftCols(std::min(dims, start.coords.cols())) = start.coords.leftCols(std::min(dims, start.coords.cols()));

    double mean_d = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) mean_d += d(i, j);
    const double pairs = static_cast<double>(n * (n - 1) / 2);
    mean_d = pairs > 0 ? mean_d / pairs : 1.0;
    const double c = mean_d * pairs;

    // Coincident starting points make the gradient undefined; separate them slightly.
    Rng rng(derive_seed(cfg.seed, "sammon"));
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j)
            if ((y.row(i) - y.row(j)).norm() == 0.0)
                for (Eigen::Index a = 0; a < dims; ++a) y(j, a) += 1e-6 * mean_d * rng.normal();

    const auto gradient = [&](const Matrix& cur) {
        Matrix g = Matrix::Zero(n, dims);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = i + 1; j < n; ++j) {
                const Vector diff = (cur.row(i) - cur.row(j)).transpose();
                const double e = diff.norm();
                if (e == 0.0) continue;
                const double f = -2.0 / c * (d(i, j) - e) / (d(i, j) * e);
                g.row(i) += f * diff.transpose();
                g.row(j) -= f * diff.transpose();
            }
        return g;
    };

    Projection p;
    p.items = detail::default_ids(n);
    double stress = sammon_stress(d, y);
    p.trace.push_back(stress);
    double alpha = -1.0;
    for (int it = 0; it < cfg.max_iter && stress > 0.0; ++it) {
        const Matrix g = gradient(y);
        const double gmax = g.cwiseAbs().maxCoeff();
        if (gmax == 0.0) break;
        if (alpha < 0.0) alpha = cfg.step * mean_d / gmax;
        bool accepted = false;
        while (alpha * gmax > cfg.tol * mean_d) {
            const Matrix trial = y - alpha * g;
            const double s = sammon_stress(d, trial);
            if (s < stress) {
                y = trial;
                const double improvement = stress - s;
                stress = s;
                p.trace.push_back(stress);
                alpha *= 1.5;
                accepted = improvement > cfg.tol * std::max(stress, 1e-300);
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) break;
    }
    p.coords = y;
    p.stress = stress;
    return p;
}

enum class ProfileMetric { Euclidean, ChiSquare };

/// Distances between the row profiles (row-normalized counts) of a cross table.
inline Matrix profile_distances(const CrossTable& ct, ProfileMetric metric = ProfileMetric::Euclidean) {
    const Matrix counts = ct.counts.cast<double>();
    const Vector totals = counts.rowwise().sum();
    for (Eigen::Index r = 0; r < totals.size(); ++r)
        if (!(totals(r) > 0.0))
            throw ContractViolation("profile_distances: class '" + ct.rows[static_cast<std::size_t>(r)] +
                                    "' has no items");
    const Matrix prof = totals.cwiseInverse().asDiagonal() * counts;
    Vector col_weight = Vector::Ones(counts.cols());
    if (metric == ProfileMetric::ChiSquare) {
        const Vector mass = counts.colwise().sum().transpose() / counts.sum();
        for (Eigen::Index c = 0; c < mass.size(); ++c) col_weight(c) = mass(c) > 0.0 ? 1.0 / mass(c) : 0.0;
    }
    const Eigen::Index m = counts.rows();
    Matrix d = Matrix::Zero(m, m);
    for (Eigen::Index a = 0; a < m; ++a)
        for (Eigen::Index b = a + 1; b < m; ++b) {
            const Vector diff = (prof.row(a) - prof.row(b)).transpose();
            d(a, b) = d(b, a) = std::sqrt(diff.cwiseAbs2().dot(col_weight));
        }
    return d;
}

/// Fixed categorical palette; keys are assigned colors in sorted order.
inline const std::vector<std::string>& palette() {
    static const std::vector<std::string> colors = {
        "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2",
        "#7f7f7f", "#bcbd22", "#17becf", "#aec7e8", "#ffbb78", "#98df8a", "#ff9896",
        "#c5b0d5", "#c49c94", "#f7b6d2", "#c7c7c7", "#dbdb8d", "#9edae5"};
    return colors;
}

namespace detail {

inline std::string xml_escape(const std::string& s) {
    std::string out;
    for (char ch : s) {
        switch (ch) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += ch;
        }
    }
    return out;
}

inline std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

inline std::string fmt_tick(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

}  // namespace detail

/// Writes the first two coordinates as an SVG 1.1 scatter plot.
inline void emit_scatter(const Projection& p, const std::string& path, const std::string& title = "") {
    if (p.coords.rows() == 0) throw ContractViolation("emit_scatter: projection is empty");
    if (!p.color_key.empty() && p.color_key.size() != static_cast<std::size_t>(p.coords.rows()))
        throw ContractViolation("emit_scatter: color_key length does not match the item count");

    const double width = 640, height = 480, margin = 50, legend_w = 150;
    const double plot_w = width - 2 * margin - legend_w, plot_h = height - 2 * margin;
    const auto xs = p.coords.col(0);
    const Vector ys = p.coords.cols() > 1 ? Vector(p.coords.col(1)) : Vector::Zero(p.coords.rows());
    double x0 = xs.minCoeff(), x1 = xs.maxCoeff(), y0 = ys.minCoeff(), y1 = ys.maxCoeff();
    if (x1 - x0 == 0.0) { x0 -= 1.0; x1 += 1.0; }
    if (y1 - y0 == 0.0) { y0 -= 1.0; y1 += 1.0; }
    const auto sx = [&](double v) { return margin + (v - x0) / (x1 - x0) * plot_w; };
    const auto sy = [&](double v) { return height - margin - (v - y0) / (y1 - y0) * plot_h; };

    std::map<std::string, std::string> color_of;
    if (!p.color_key.empty()) {
        std::set<std::string> keys(p.color_key.begin(), p.color_key.end());
        std::size_t idx = 0;
        for (const auto& k : keys) color_of[k] = palette()[idx++ % palette().size()];
    }

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("emit_scatter: cannot write " + path);
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << width << "\" height=\"" << height
        << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    if (!title.empty())
        out << "<text x=\"" << margin << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">"
            << detail::xml_escape(title) << "</text>\n";
    // Axes with end-point tick labels.
    out << "<g stroke=\"black\" stroke-width=\"1\">\n"
        << "<line x1=\"" << margin << "\" y1=\"" << height - margin << "\" x2=\"" << margin + plot_w << "\" y2=\""
        << height - margin << "\"/>\n"
        << "<line x1=\"" << margin << "\" y1=\"" << height - margin << "\" x2=\"" << margin << "\" y2=\"" << margin
        << "\"/>\n</g>\n";
    out << "<g font-family=\"sans-serif\" font-size=\"10\">\n"
        << "<text x=\"" << margin << "\" y=\"" << height - margin + 14 << "\">" << detail::fmt_tick(x0) << "</text>\n"
        << "<text x=\"" << margin + plot_w << "\" y=\"" << height - margin + 14 << "\" text-anchor=\"end\">"
        << detail::fmt_tick(x1) << "</text>\n"
        << "<text x=\"" << margin - 4 << "\" y=\"" << height - margin << "\" text-anchor=\"end\">"
        << detail::fmt_tick(y0) << "</text>\n"
        << "<text x=\"" << margin - 4 << "\" y=\"" << margin + 4 << "\" text-anchor=\"end\">" << detail::fmt_tick(y1)
        << "</text>\n"
        << "<text x=\"" << margin + plot_w / 2 << "\" y=\"" << height - 12 << "\" text-anchor=\"middle\">axis 1</text>\n"
        << "<text x=\"14\" y=\"" << margin + plot_h / 2 << "\" transform=\"rotate(-90 14 " << margin + plot_h / 2
        << ")\" text-anchor=\"middle\">axis 2</text>\n</g>\n";

    out << "<g class=\"points\">\n";
    for (Eigen::Index i = 0; i < p.coords.rows(); ++i) {
        const std::string color = p.color_key.empty() ? palette()[0] : color_of[p.color_key[static_cast<std::size_t>(i)]];
        out << "<circle class=\"point\" cx=\"" << detail::fmt(sx(xs(i))) << "\" cy=\"" << detail::fmt(sy(ys(i))) << "\" r=\"3\" fill=\""
            << color << "\" fill-opacity=\"0.8\"><title>"
            << detail::xml_escape(i < static_cast<Eigen::Index>(p.items.size()) ? p.items[static_cast<std::size_t>(i)] : "")
            << "</title></circle>\n";
    }
    out << "</g>\n";

    if (!color_of.empty()) {
        out << "<g class=\"legend\" font-family=\"sans-serif\" font-size=\"11\">\n";
        double ly = margin;
        for (const auto& [key, color] : color_of) {
            const double lx = width - legend_w - margin / 2 + 10;
            out << "<rect class=\"legend\" x=\"" << lx << "\" y=\"" << ly - 8 << "\" width=\"10\" height=\"10\" fill=\"" << color
                << "\"/><text x=\"" << lx + 16 << "\" y=\"" << ly + 1 << "\">" << detail::xml_escape(key)
                << "</text>\n";
            ly += 16;
        }
        out << "</g>\n";
    }
    out << "</svg>\n";
    if (!out) throw IoError("emit_scatter: write failed for " + path);
}

/// CSV with header "id,dim1..dimN[,key]".
inline void emit_csv(const Projection& p, const std::string& path) {
    if (p.coords.rows() == 0) throw ContractViolation("emit_csv: projection is empty");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("emit_csv: cannot write " + path);
    out << "id";
    for (Eigen::Index j = 0; j < p.coords.cols(); ++j) out << ",dim" << j + 1;
    if (!p.color_key.empty()) out << ",key";
    out << '\n';
    for (Eigen::Index i = 0; i < p.coords.rows(); ++i) {
        out << (i < static_cast<Eigen::Index>(p.items.size()) ? p.items[static_cast<std::size_t>(i)] : std::to_string(i + 1));
        for (Eigen::Index j = 0; j < p.coords.cols(); ++j) out << ',' << format_double(p.coords(i, j));
        if (!p.color_key.empty()) out << ',' << p.color_key[static_cast<std::size_t>(i)];
        out << '\n';
    }
    if (!out) throw IoError("emit_csv: write failed for " + path);
}

inline Projection load_projection_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path + ": empty file");
    const auto header = detail::split_fields(line);
    const bool keyed = !header.empty() && header.back() == "key";
    const std::size_t dims = header.size() - 1 - (keyed ? 1 : 0);
    Projection p;
    std::vector<std::vector<double>> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        auto f = detail::split_fields(line);
        if (f.size() != header.size()) throw ParseError(path + ": ragged row at line " + std::to_string(line_no));
        p.items.push_back(f[0]);
        std::vector<double> row;
        for (std::size_t j = 0; j < dims; ++j)
            row.push_back(parse_double(f[j + 1], path + " line " + std::to_string(line_no) + ", column " + std::to_string(j + 2)));
        if (keyed) p.color_key.push_back(f.back());
        rows.push_back(std::move(row));
    }
    p.coords.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(dims));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < dims; ++j) p.coords(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    return p;
}

}  // namespace alsi
