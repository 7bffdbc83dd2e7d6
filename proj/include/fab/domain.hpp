#pragma once

// Area-level data model: direct estimates with known or estimated sampling
// variances, covariates, locations, proximity matrices, and model variants.

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace fab {

struct AreaDatum {
    std::string id;
    double y = 0.0;                       // direct estimate
    std::optional<double> sigma2;         // known sampling variance
    std::optional<double> sigma2_hat;     // estimated sampling variance
    std::optional<int> dof;               // effective degrees of freedom for sigma2_hat
    std::optional<int> n;                 // within-area sample size
    std::vector<double> x;                // covariates (without intercept)
    std::optional<std::pair<double, double>> centroid;  // (lon, lat)

    bool variance_known() const { return sigma2.has_value(); }
    // Eligible for interval construction: needs either a known variance or an
    // estimated one with at least one degree of freedom.
    bool interval_eligible() const {
        return sigma2.has_value() || (sigma2_hat.has_value() && dof.value_or(0) >= 1);
    }

    void validate() const {
        if (sigma2 && sigma2_hat)
            throw std::invalid_argument("AreaDatum " + id + ": sigma2 and sigma2_hat are mutually exclusive");
        if (sigma2 && !(*sigma2 > 0.0))
            throw std::invalid_argument("AreaDatum " + id + ": sigma2 must be positive");
        if (sigma2_hat) {
            if (!(*sigma2_hat > 0.0))
                throw std::invalid_argument("AreaDatum " + id + ": sigma2_hat must be positive");
            if (!dof || *dof < 1)
                throw std::invalid_argument("AreaDatum " + id + ": sigma2_hat requires dof >= 1");
        }
    }
};

enum class ModelVariant { Exchangeable, Covariate, Spatial, Full };

struct LinkingSpec {
    ModelVariant variant = ModelVariant::Exchangeable;
    // When false the linking mean drops the intercept: the Exchangeable and
    // Spatial variants become zero-mean and the Covariate/Full variants regress
    // on the covariates alone.
    bool intercept = true;
    bool intercept_only() const {
        return variant == ModelVariant::Exchangeable || variant == ModelVariant::Spatial;
    }
    bool spatial() const {
        return variant == ModelVariant::Spatial || variant == ModelVariant::Full;
    }
};

struct HyperParams {
    Eigen::VectorXd beta;
    double tau2 = 1.0;
    double rho = 0.0;

    void validate() const {
        if (!(tau2 > 0.0)) throw std::invalid_argument("HyperParams: tau2 must be positive");
        if (!(std::fabs(rho) < 1.0)) throw std::invalid_argument("HyperParams: |rho| must be < 1");
    }
};

enum class Method { Direct, Bayes, EB, FABz, FABt };

inline const char* method_name(Method m) {
    switch (m) {
        case Method::Direct: return "direct";
        case Method::Bayes: return "bayes";
        case Method::EB: return "eb";
        case Method::FABz: return "fab-z";
        case Method::FABt: return "fab-t";
    }
    return "?";
}

struct Interval {
    double lower = 0.0;
    double upper = 0.0;
    double alpha = 0.05;
    Method method = Method::Direct;

    double width() const { return upper - lower; }
    bool contains(double theta) const { return lower < theta && theta < upper; }
};

// ---------------------------------------------------------------------------
// Proximity matrices

// Row-standardizes a nonnegative zero-diagonal matrix in place; rows with no
// neighbors are left as zeros and their indices returned.
inline std::vector<int> row_standardize(Eigen::MatrixXd& W) {
    if (W.rows() != W.cols()) throw std::invalid_argument("row_standardize: W must be square");
    std::vector<int> isolated;
    for (int i = 0; i < W.rows(); ++i) {
        if (W(i, i) != 0.0) throw std::invalid_argument("row_standardize: diagonal must be zero");
        double s = 0.0;
        for (int j = 0; j < W.cols(); ++j) {
            if (W(i, j) < 0.0) throw std::invalid_argument("row_standardize: negative entry");
            s += W(i, j);
        }
        if (s > 0.0)
            W.row(i) /= s;
        else
            isolated.push_back(i);
    }
    return isolated;
}

// Row-standardized 4-neighbor binary contiguity on a rows x cols grid,
// areas in row-major order.
inline Eigen::MatrixXd lattice_contiguity(int rows, int cols) {
    if (rows < 1 || cols < 1 || rows * cols < 2)
        throw std::invalid_argument("lattice_contiguity: need at least 2 cells");
    const int m = rows * cols;
    Eigen::MatrixXd W = Eigen::MatrixXd::Zero(m, m);
    auto idx = [cols](int r, int c) { return r * cols + c; };
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            if (r > 0) W(idx(r, c), idx(r - 1, c)) = 1.0;
            if (r + 1 < rows) W(idx(r, c), idx(r + 1, c)) = 1.0;
            if (c > 0) W(idx(r, c), idx(r, c - 1)) = 1.0;
            if (c + 1 < cols) W(idx(r, c), idx(r, c + 1)) = 1.0;
        }
    row_standardize(W);
    return W;
}

// Row-standardized squared-exponential proximity from (lon, lat) centroids,
// Euclidean distance in degrees.  An optional length scale divides the
// distances before squaring.
inline Eigen::MatrixXd sqexp_proximity(const std::vector<std::pair<double, double>>& centroids,
                                       double length_scale = 1.0) {
    const int m = static_cast<int>(centroids.size());
    if (m < 2) throw std::invalid_argument("sqexp_proximity: need at least 2 areas");
    if (!(length_scale > 0.0)) throw std::invalid_argument("sqexp_proximity: length_scale must be positive");
    Eigen::MatrixXd W = Eigen::MatrixXd::Zero(m, m);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) {
            if (i == j) continue;
            double dx = (centroids[i].first - centroids[j].first) / length_scale;
            double dy = (centroids[i].second - centroids[j].second) / length_scale;
            W(i, j) = std::exp(-(dx * dx + dy * dy));
        }
    row_standardize(W);
    return W;
}

// ---------------------------------------------------------------------------

struct AreaTable {
    std::vector<AreaDatum> areas;
    std::optional<Eigen::MatrixXd> W;

    int size() const { return static_cast<int>(areas.size()); }

    void validate() const {
        std::size_t xdim = areas.empty() ? 0 : areas.front().x.size();
        for (const auto& a : areas) {
            a.validate();
            if (a.x.size() != xdim)
                throw std::invalid_argument("AreaTable: covariate dimension differs for area " + a.id);
        }
        if (W) {
            if (W->rows() != size() || W->cols() != size())
                throw std::invalid_argument("AreaTable: proximity matrix dimension mismatch");
            for (int i = 0; i < W->rows(); ++i) {
                if ((*W)(i, i) != 0.0)
                    throw std::invalid_argument("AreaTable: proximity diagonal must be zero");
                double s = W->row(i).sum();
                if (s > 0.0 && std::fabs(s - 1.0) > 1e-12)
                    throw std::invalid_argument("AreaTable: proximity rows must sum to 1");
            }
        }
    }

    Eigen::VectorXd y() const {
        Eigen::VectorXd v(size());
        for (int j = 0; j < size(); ++j) v[j] = areas[j].y;
        return v;
    }

    // Design matrix for a linking-model variant: optional intercept column,
    // plus the covariates for the Covariate/Full variants.  A zero-mean
    // variant (no intercept, no covariates) yields an m-by-0 matrix.
    Eigen::MatrixXd design(const LinkingSpec& spec) const {
        const int m = size();
        const int k = spec.intercept_only()
                          ? 0
                          : static_cast<int>(areas.empty() ? 0 : areas.front().x.size());
        if (!spec.intercept_only() && k == 0)
            throw std::invalid_argument("AreaTable: covariate variant requires covariates");
        const int off = spec.intercept ? 1 : 0;
        Eigen::MatrixXd X = Eigen::MatrixXd::Ones(m, off + k);
        for (int j = 0; j < m; ++j)
            for (int c = 0; c < k; ++c) X(j, off + c) = areas[j].x[c];
        return X;
    }

    // Diagonal of sampling variances; uses sigma2 when known, sigma2_hat otherwise.
    Eigen::VectorXd sampling_variances() const {
        Eigen::VectorXd d(size());
        for (int j = 0; j < size(); ++j) {
            const auto& a = areas[j];
            if (a.sigma2)
                d[j] = *a.sigma2;
            else if (a.sigma2_hat)
                d[j] = *a.sigma2_hat;
            else
                throw std::invalid_argument("AreaTable: area " + a.id + " has no sampling variance");
        }
        return d;
    }

    // Table with area j removed; the proximity submatrix keeps the original
    // row standardization (weights toward the removed area are dropped).
    AreaTable without(int j) const {
        AreaTable t;
        t.areas.reserve(areas.size() - 1);
        for (int i = 0; i < size(); ++i)
            if (i != j) t.areas.push_back(areas[i]);
        if (W) {
            const int m = size();
            Eigen::MatrixXd sub(m - 1, m - 1);
            for (int r = 0, rr = 0; r < m; ++r) {
                if (r == j) continue;
                for (int c = 0, cc = 0; c < m; ++c) {
                    if (c == j) continue;
                    sub(rr, cc) = (*W)(r, c);
                    ++cc;
                }
                ++rr;
            }
            t.W = std::move(sub);
        }
        return t;
    }
};

}  // namespace fab
