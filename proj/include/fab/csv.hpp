#pragma once

// CSV ingestion and emission: household-level data (aggregated to area
// summaries), area-level tables, and dense proximity matrices.
// Dialect: comma-separated, UTF-8, '.' decimal separator; header row required
// except for proximity matrices.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "domain.hpp"

namespace fab {

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

inline std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t");
    return s.substr(a, b - a + 1);
}

inline double parse_double(const std::string& s, const std::string& what, int line_no) {
    std::size_t pos = 0;
    double v;
    try {
        v = std::stod(s, &pos);
    } catch (const std::exception&) {
        throw std::runtime_error("csv line " + std::to_string(line_no) + ": non-numeric " +
                                 what + " value '" + s + "'");
    }
    if (pos != s.size())
        throw std::runtime_error("csv line " + std::to_string(line_no) + ": non-numeric " +
                                 what + " value '" + s + "'");
    return v;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Household-level ingestion

struct IngestConfig {
    bool log_transform = false;
    double offset = 0.0;  // additive adjustment applied before the log transform
    int min_n = 1;        // areas with fewer observations are dropped
};

// Columns: area_id, value, optional covariate columns, optional lon/lat.
// Produces per-area sample means and variance estimates: y_j = mean of
// (optionally log-transformed) values, omega2_hat = sample variance,
// sigma2_hat = omega2_hat / n_j, dof = n_j - 1.  Areas with n < 2 are kept
// but carry no variance estimate and are interval-ineligible.
inline AreaTable ingest_household_csv(std::istream& in, const IngestConfig& cfg = {}) {
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("household csv: empty file");
    std::vector<std::string> header = detail::split_csv_line(line);
    int id_col = -1, value_col = -1, lon_col = -1, lat_col = -1;
    std::vector<int> cov_cols;
    std::vector<std::string> cov_names;
    for (int c = 0; c < static_cast<int>(header.size()); ++c) {
        std::string h = detail::trim(header[c]);
        if (h == "area_id") id_col = c;
        else if (h == "value") value_col = c;
        else if (h == "lon") lon_col = c;
        else if (h == "lat") lat_col = c;
        else if (!h.empty()) {
            cov_cols.push_back(c);
            cov_names.push_back(h);
        }
    }
    if (id_col < 0 || value_col < 0)
        throw std::runtime_error("household csv: required columns area_id and value missing");
    if ((lon_col >= 0) != (lat_col >= 0))
        throw std::runtime_error("household csv: lon and lat must both be present or absent");

    struct Acc {
        int n = 0;
        double sum = 0.0, sumsq = 0.0;
        std::vector<double> cov_sum;
        double lon = 0.0, lat = 0.0;
        int order = 0;
    };
    std::map<std::string, Acc> acc;
    int order = 0, line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        std::vector<std::string> f = detail::split_csv_line(line);
        if (static_cast<int>(f.size()) <= std::max(id_col, value_col))
            throw std::runtime_error("household csv line " + std::to_string(line_no) +
                                     ": too few fields");
        std::string id = detail::trim(f[id_col]);
        if (id.empty())
            throw std::runtime_error("household csv line " + std::to_string(line_no) +
                                     ": empty area_id");
        double v = detail::parse_double(detail::trim(f[value_col]), "value", line_no);
        if (cfg.log_transform) {
            double shifted = v + cfg.offset;
            if (!(shifted > 0.0))
                throw std::runtime_error("household csv line " + std::to_string(line_no) +
                                         ": value + offset must be positive for log transform");
            v = std::log(shifted);
        }
        Acc& a = acc.try_emplace(id).first->second;
        if (a.n == 0) {
            a.order = order++;
            a.cov_sum.assign(cov_cols.size(), 0.0);
        }
        ++a.n;
        a.sum += v;
        a.sumsq += v * v;
        for (std::size_t k = 0; k < cov_cols.size(); ++k)
            a.cov_sum[k] += detail::parse_double(detail::trim(f[cov_cols[k]]), cov_names[k],
                                                 line_no);
        if (lon_col >= 0) {
            a.lon = detail::parse_double(detail::trim(f[lon_col]), "lon", line_no);
            a.lat = detail::parse_double(detail::trim(f[lat_col]), "lat", line_no);
        }
    }
    if (acc.empty()) throw std::runtime_error("household csv: no data rows");

    std::vector<const std::pair<const std::string, Acc>*> rows;
    rows.reserve(acc.size());
    for (const auto& kv : acc) rows.push_back(&kv);
    std::sort(rows.begin(), rows.end(),
              [](auto* a, auto* b) { return a->second.order < b->second.order; });

    AreaTable t;
    for (auto* kv : rows) {
        const Acc& a = kv->second;
        if (a.n < cfg.min_n) continue;
        AreaDatum d;
        d.id = kv->first;
        d.y = a.sum / a.n;
        if (a.n >= 2) {
            double omega2 = (a.sumsq - a.sum * a.sum / a.n) / (a.n - 1);
            omega2 = std::max(omega2, 0.0);
            if (omega2 > 0.0) {
                d.sigma2_hat = omega2 / a.n;
                d.dof = a.n - 1;
            }
        }
        d.n = a.n;
        d.x.resize(a.cov_sum.size());
        for (std::size_t k = 0; k < a.cov_sum.size(); ++k) d.x[k] = a.cov_sum[k] / a.n;
        if (lon_col >= 0) d.centroid = std::make_pair(a.lon, a.lat);
        t.areas.push_back(std::move(d));
    }
    if (t.areas.empty()) throw std::runtime_error("household csv: no areas after filtering");
    return t;
}

inline AreaTable ingest_household_csv(const std::string& path, const IngestConfig& cfg = {}) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    return ingest_household_csv(in, cfg);
}

// ---------------------------------------------------------------------------
// Area-level CSV

// Recognized header names: area_id, y, sigma2, sigma2_hat, dof, n, lon, lat.
// Every other column is a covariate, in header order.  Empty cells denote
// missing optional values.
inline AreaTable read_area_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("area csv: empty file");
    std::vector<std::string> header = detail::split_csv_line(line);
    std::map<std::string, int> cols;
    std::vector<int> cov_cols;
    for (int c = 0; c < static_cast<int>(header.size()); ++c) {
        std::string h = detail::trim(header[c]);
        if (h == "area_id" || h == "y" || h == "sigma2" || h == "sigma2_hat" || h == "dof" ||
            h == "n" || h == "lon" || h == "lat")
            cols[h] = c;
        else if (!h.empty())
            cov_cols.push_back(c);
    }
    if (!cols.count("area_id") || !cols.count("y"))
        throw std::runtime_error("area csv: required columns area_id and y missing");

    auto field = [&](const std::vector<std::string>& f, const std::string& name)
        -> std::optional<std::string> {
        auto it = cols.find(name);
        if (it == cols.end() || it->second >= static_cast<int>(f.size())) return std::nullopt;
        std::string v = detail::trim(f[it->second]);
        if (v.empty()) return std::nullopt;
        return v;
    };

    AreaTable t;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        std::vector<std::string> f = detail::split_csv_line(line);
        AreaDatum d;
        auto id = field(f, "area_id");
        auto y = field(f, "y");
        if (!id || !y)
            throw std::runtime_error("area csv line " + std::to_string(line_no) +
                                     ": missing area_id or y");
        d.id = *id;
        d.y = detail::parse_double(*y, "y", line_no);
        if (auto v = field(f, "sigma2")) d.sigma2 = detail::parse_double(*v, "sigma2", line_no);
        if (auto v = field(f, "sigma2_hat"))
            d.sigma2_hat = detail::parse_double(*v, "sigma2_hat", line_no);
        if (auto v = field(f, "dof"))
            d.dof = static_cast<int>(detail::parse_double(*v, "dof", line_no));
        if (auto v = field(f, "n"))
            d.n = static_cast<int>(detail::parse_double(*v, "n", line_no));
        auto lon = field(f, "lon");
        auto lat = field(f, "lat");
        if (lon && lat)
            d.centroid = std::make_pair(detail::parse_double(*lon, "lon", line_no),
                                        detail::parse_double(*lat, "lat", line_no));
        for (int c : cov_cols) {
            if (c >= static_cast<int>(f.size()))
                throw std::runtime_error("area csv line " + std::to_string(line_no) +
                                         ": too few fields");
            d.x.push_back(detail::parse_double(detail::trim(f[c]), header[c], line_no));
        }
        t.areas.push_back(std::move(d));
    }
    if (t.areas.empty()) throw std::runtime_error("area csv: no data rows");
    return t;
}

inline AreaTable read_area_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    return read_area_csv(in);
}

inline void write_area_csv(std::ostream& out, const AreaTable& t) {
    std::size_t k = t.areas.empty() ? 0 : t.areas.front().x.size();
    bool centroids = false;
    for (const auto& a : t.areas) centroids = centroids || a.centroid.has_value();
    out << "area_id,y,sigma2,sigma2_hat,dof,n";
    for (std::size_t i = 0; i < k; ++i) out << ",x" << (i + 1);
    if (centroids) out << ",lon,lat";
    out << "\n";
    out.precision(17);
    for (const auto& a : t.areas) {
        out << a.id << ',' << a.y << ',';
        if (a.sigma2) out << *a.sigma2;
        out << ',';
        if (a.sigma2_hat) out << *a.sigma2_hat;
        out << ',';
        if (a.dof) out << *a.dof;
        out << ',';
        if (a.n) out << *a.n;
        for (double x : a.x) out << ',' << x;
        if (centroids) {
            out << ',';
            if (a.centroid) out << a.centroid->first;
            out << ',';
            if (a.centroid) out << a.centroid->second;
        }
        out << "\n";
    }
}

inline void write_area_csv(const std::string& path, const AreaTable& t) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    write_area_csv(out, t);
}

// ---------------------------------------------------------------------------
// Proximity matrix CSV (dense, header-free)

inline Eigen::MatrixXd read_proximity_csv(std::istream& in) {
    std::vector<std::vector<double>> rows;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        std::vector<std::string> f = detail::split_csv_line(line);
        std::vector<double> r;
        r.reserve(f.size());
        for (const auto& s : f) r.push_back(detail::parse_double(detail::trim(s), "W", line_no));
        if (!rows.empty() && r.size() != rows.front().size())
            throw std::runtime_error("proximity csv: ragged rows");
        rows.push_back(std::move(r));
    }
    if (rows.empty()) throw std::runtime_error("proximity csv: empty file");
    if (rows.size() != rows.front().size())
        throw std::runtime_error("proximity csv: matrix must be square");
    Eigen::MatrixXd W(rows.size(), rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows.size(); ++j) W(i, j) = rows[i][j];
    return W;
}

inline Eigen::MatrixXd read_proximity_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    return read_proximity_csv(in);
}

inline void write_proximity_csv(std::ostream& out, const Eigen::MatrixXd& W) {
    out.precision(17);
    for (Eigen::Index i = 0; i < W.rows(); ++i) {
        for (Eigen::Index j = 0; j < W.cols(); ++j) {
            if (j) out << ',';
            out << W(i, j);
        }
        out << "\n";
    }
}

}  // namespace fab
