#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <vector>

#include <json.hpp>

#include "heliostat/geometry.hpp"
#include "heliostat/normal_cloud.hpp"
#include "heliostat/parallel.hpp"
#include "heliostat/surface.hpp"

namespace helio {

struct FitConfig {
    int max_iters = 2000;
    double tol_grad = 1e-10;
    double learning_rate = 1e-3; // m per step, initial
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-12;
    double monotone_slack = 1e-12; // a step raising the loss by more than this is rejected
    double residual_tol_mrad = 1e-3;
    int degree = kDefaultDegree;

    void validate() const {
        if (max_iters < 1)
            throw Error(ErrorKind::config, "max_iters must be >= 1");
        if (!(tol_grad > 0.0))
            throw Error(ErrorKind::config, "tol_grad must be positive");
        if (!(learning_rate > 0.0) || !(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) ||
            !(epsilon > 0.0))
            throw Error(ErrorKind::config, "invalid optimizer parameters");
    }
};

/// Distribution summary of per-point angular deviations (mrad).
struct ResidualStats {
    double min = 0.0, median = 0.0, q3 = 0.0, max = 0.0;
    double frac_below_tol = 1.0;
    std::size_t count = 0;
};

struct FitReport {
    double final_loss = 0.0;
    int iterations = 0;
    int rejected_steps = 0;
    double final_grad_norm = 0.0;
    ResidualStats residual_mrad;
    std::vector<double> loss_history; // accepted loss after every iteration, index 0 = initial
};

/// Linear-interpolated quantile (q in [0,1]) of a sorted range.
inline double sorted_quantile(const std::vector<double> &sorted, double q) {
    if (sorted.empty())
        return 0.0;
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline ResidualStats summarize_residuals(std::vector<double> mrad, double tol_mrad) {
    ResidualStats s;
    s.count = mrad.size();
    if (mrad.empty())
        return s;
    std::sort(mrad.begin(), mrad.end());
    s.min = mrad.front();
    s.max = mrad.back();
    s.median = sorted_quantile(mrad, 0.5);
    s.q3 = sorted_quantile(mrad, 0.75);
    const auto below = std::upper_bound(mrad.begin(), mrad.end(), tol_mrad) - mrad.begin();
    s.frac_below_tol = static_cast<double>(below) / static_cast<double>(mrad.size());
    return s;
}

/// Per-point angle (mrad) between the spline normal and the measured normal.
inline std::vector<double> angular_residual_values(const FacetSpline &spline, const CloudFacet &facet) {
    const SplineBasis basis(spline);
    std::vector<double> out;
    out.reserve(facet.points.size());
    for (const auto &p : facet.points) {
        const double u = std::clamp(p.position.x() / spline.width, 0.0, 1.0);
        const double v = std::clamp(p.position.y() / spline.height, 0.0, 1.0);
        const SurfaceJet j = surface_jet(spline, basis, u, v);
        const Vec3 n = normal_from_slopes(j.dz_du / spline.width, j.dz_dv / spline.height);
        out.push_back(angle_between(n, p.normal) * 1e3);
    }
    return out;
}

inline ResidualStats angular_residuals(const FacetSpline &spline, const CloudFacet &facet, double tol_mrad = 1e-3) {
    return summarize_residuals(angular_residual_values(spline, facet), tol_mrad);
}

/// Precomputed basis data for one facet cloud. Clouds on a full tensor grid (every
/// combination of a set of xs and a set of ys exactly once) are evaluated with dense
/// matrix products; scattered clouds fall back to a per-point loop.
class FitProblem {
public:
    FitProblem(const CloudFacet &facet, int degree = kDefaultDegree)
        : width_(facet.width), height_(facet.height), basis_(degree, degree) {
        if (facet.points.empty())
            throw Error(ErrorKind::input, "empty cloud facet");
        if (facet.points.size() < 64)
            throw Error(ErrorKind::input, "a facet cloud needs at least 64 points");
        for (const auto &p : facet.points) {
            const double x = p.position.x(), y = p.position.y();
            if (!(x >= -1e-9 && x <= width_ + 1e-9 && y >= -1e-9 && y <= height_ + 1e-9))
                throw Error(ErrorKind::input, "cloud point outside the facet extent");
        }
        if (!build_grid(facet))
            build_scattered(facet);
    }

    bool is_grid() const { return grid_; }
    std::size_t size() const { return grid_ ? static_cast<std::size_t>(nx_) * ny_ : pts_.size(); }

    /// Loss sum ||n_hat - n||^2 and its gradient with respect to z_ctrl.
    double loss_grad(const ControlGrid &c, ControlGrid *grad) const {
        return grid_ ? grid_loss_grad(c, grad) : scattered_loss_grad(c, grad);
    }

private:
    using Mat = Eigen::MatrixXd;
    using Arr = Eigen::ArrayXXd;

    bool build_grid(const CloudFacet &facet) {
        std::map<double, int> xs, ys;
        for (const auto &p : facet.points) {
            xs.emplace(p.position.x(), 0);
            ys.emplace(p.position.y(), 0);
        }
        if (xs.size() * ys.size() != facet.points.size())
            return false;
        nx_ = static_cast<int>(xs.size());
        ny_ = static_cast<int>(ys.size());
        int k = 0;
        for (auto &[x, idx] : xs)
            idx = k++;
        k = 0;
        for (auto &[y, idx] : ys)
            idx = k++;
        for (int c = 0; c < 3; ++c)
            target_[c] = Arr::Constant(nx_, ny_, std::numeric_limits<double>::quiet_NaN());
        for (const auto &p : facet.points) {
            const int i = xs.at(p.position.x()), j = ys.at(p.position.y());
            if (!std::isnan(target_[0](i, j)))
                return false; // duplicate position
            for (int c = 0; c < 3; ++c)
                target_[c](i, j) = p.normal[c];
        }
        auto fill = [&](const std::map<double, int> &vals, double extent, bool is_u, auto &b, auto &db) {
            b.setZero(static_cast<int>(vals.size()), kGridSize);
            db.setZero(static_cast<int>(vals.size()), kGridSize);
            for (const auto &[x, idx] : vals) {
                const double t = std::clamp(x / extent, 0.0, 1.0);
                const SpanBasis s = is_u ? basis_.u(t) : basis_.v(t);
                const int deg = is_u ? basis_.degree_u() : basis_.degree_v();
                for (int a = 0; a <= deg; ++a) {
                    b(idx, s.first + a) = s.value[a];
                    db(idx, s.first + a) = s.deriv[a] / extent;
                }
            }
        };
        fill(xs, width_, true, bu_, dbu_);
        fill(ys, height_, false, bv_, dbv_);
        grid_ = true;
        return true;
    }

    double grid_loss_grad(const ControlGrid &c, ControlGrid *grad) const {
        // Column-by-column so every temporary stays in cache.
        const Eigen::Matrix<double, kGridSize, Eigen::Dynamic> p = c * bv_.transpose();
        const Eigen::Matrix<double, kGridSize, Eigen::Dynamic> q = c * dbv_.transpose();
        Eigen::Matrix<double, kGridSize, Eigen::Dynamic> rx(kGridSize, ny_), ry(kGridSize, ny_);
        Eigen::ArrayXd zx(nx_), zy(nx_), inv(nx_), ex(nx_), ey(nx_), ez(nx_), proj(nx_);
        double loss = 0.0;
        for (int j = 0; j < ny_; ++j) {
            zx.matrix().noalias() = dbu_ * p.col(j);
            zy.matrix().noalias() = bu_ * q.col(j);
            inv = (1.0 + zx.square() + zy.square()).rsqrt();
            ex = -zx * inv - target_[0].col(j);
            ey = -zy * inv - target_[1].col(j);
            ez = inv - target_[2].col(j);
            loss += (ex.square() + ey.square() + ez.square()).sum();
            if (grad) {
                // 2e projected onto the tangent plane of n, scaled by 1/|m|, negated for z
                proj = -ex * zx * inv - ey * zy * inv + ez * inv;
                zx = -2.0 * (ex + proj * zx * inv) * inv;
                zy = -2.0 * (ey + proj * zy * inv) * inv;
                rx.col(j).noalias() = dbu_.transpose() * zx.matrix();
                ry.col(j).noalias() = bu_.transpose() * zy.matrix();
            }
        }
        if (grad)
            *grad = rx * bv_ + ry * dbv_;
        return loss;
    }

    struct Point {
        int iu, iv;
        std::array<double, kMaxDegree + 1> bu, dbu, bv, dbv;
        Vec3 normal;
    };

    void build_scattered(const CloudFacet &facet) {
        pts_.reserve(facet.points.size());
        for (const auto &p : facet.points) {
            Point q;
            const SpanBasis su = basis_.u(std::clamp(p.position.x() / width_, 0.0, 1.0));
            const SpanBasis sv = basis_.v(std::clamp(p.position.y() / height_, 0.0, 1.0));
            q.iu = su.first;
            q.iv = sv.first;
            for (int a = 0; a <= kMaxDegree; ++a) {
                q.bu[a] = su.value[a];
                q.dbu[a] = su.deriv[a] / width_;
                q.bv[a] = sv.value[a];
                q.dbv[a] = sv.deriv[a] / height_;
            }
            q.normal = p.normal;
            pts_.push_back(q);
        }
    }

    double scattered_loss_grad(const ControlGrid &c, ControlGrid *grad) const {
        const int pu = basis_.degree_u(), pv = basis_.degree_v();
        if (grad)
            grad->setZero();
        double loss = 0.0;
        for (const auto &q : pts_) {
            std::array<double, kMaxDegree + 1> row{}, row_dv{};
            for (int a = 0; a <= pu; ++a)
                for (int b = 0; b <= pv; ++b) {
                    const double z = c(q.iu + a, q.iv + b);
                    row[a] += q.bv[b] * z;
                    row_dv[a] += q.dbv[b] * z;
                }
            double zx = 0.0, zy = 0.0;
            for (int a = 0; a <= pu; ++a) {
                zx += q.dbu[a] * row[a];
                zy += q.bu[a] * row_dv[a];
            }
            const Vec3 m(-zx, -zy, 1.0);
            const double len = m.norm();
            const Vec3 n = m / len;
            const Vec3 e = n - q.normal;
            loss += e.squaredNorm();
            if (grad) {
                const Vec3 g = 2.0 * e;
                const Vec3 gm = (g - g.dot(n) * n) / len;
                for (int a = 0; a <= pu; ++a)
                    for (int b = 0; b <= pv; ++b)
                        (*grad)(q.iu + a, q.iv + b) -= gm.x() * q.dbu[a] * q.bv[b] + gm.y() * q.bu[a] * q.dbv[b];
            }
        }
        return loss;
    }

    double width_, height_;
    SplineBasis basis_;
    bool grid_ = false;
    int nx_ = 0, ny_ = 0;
    Eigen::Matrix<double, Eigen::Dynamic, kGridSize> bu_, dbu_, bv_, dbv_;
    std::array<Arr, 3> target_;
    std::vector<Point> pts_;
};

/// Loss and analytic gradient of the fit objective for a given control grid.
inline double fit_loss_gradient(const CloudFacet &facet, const FacetSpline &spline, ControlGrid *grad) {
    return FitProblem(facet, spline.degree_u).loss_grad(spline.z_ctrl, grad);
}

struct FacetFit {
    FacetSpline spline;
    FitReport report;
};

/// Adam from the flat initial guess; a step that raises the loss is rejected and the
/// learning rate halved, so the accepted loss sequence never increases.
inline FacetFit fit_facet(const CloudFacet &facet, const FitConfig &cfg = {}) {
    cfg.validate();
    const FitProblem problem(facet, cfg.degree);
    FacetSpline s;
    s.degree_u = s.degree_v = cfg.degree;
    s.width = facet.width;
    s.height = facet.height;

    ControlGrid z = ControlGrid::Zero(), g, g_new;
    ControlGrid m1 = ControlGrid::Zero(), m2 = ControlGrid::Zero();
    double loss = problem.loss_grad(z, &g);
    if (!std::isfinite(loss))
        throw NumericalError("non-finite loss", 0);
    FitReport rep;
    rep.loss_history.push_back(loss);
    double lr = cfg.learning_rate;
    int it = 0;
    while (it < cfg.max_iters && g.norm() >= cfg.tol_grad) {
        ++it;
        m1 = cfg.beta1 * m1 + (1.0 - cfg.beta1) * g;
        m2 = cfg.beta2 * m2 + (1.0 - cfg.beta2) * g.cwiseAbs2();
        const double c1 = 1.0 - std::pow(cfg.beta1, it), c2 = 1.0 - std::pow(cfg.beta2, it);
        const ControlGrid step = ((m1 / c1).array() / ((m2 / c2).array().sqrt() + cfg.epsilon)).matrix();
        const ControlGrid cand = z - lr * step;
        const double cand_loss = problem.loss_grad(cand, &g_new);
        if (!std::isfinite(cand_loss))
            throw NumericalError("non-finite loss", it);
        if (cand_loss <= loss + cfg.monotone_slack) {
            z = cand;
            loss = cand_loss;
            g = g_new;
        } else {
            lr *= 0.5;
            ++rep.rejected_steps;
        }
        rep.loss_history.push_back(loss);
    }
    s.z_ctrl = z;
    s = enforce_zero_mean(s);
    rep.final_loss = loss;
    rep.iterations = it;
    rep.final_grad_norm = g.norm();
    rep.residual_mrad = angular_residuals(s, facet, cfg.residual_tol_mrad);
    return {s, rep};
}

struct HeliostatFit {
    HeliostatSurface surface;
    std::array<FitReport, kFacetCount> reports;
};

/// Facets are independent and fitted concurrently; the result does not depend on `threads`.
inline HeliostatFit fit_heliostat(const NormalCloud &cloud, const FitConfig &cfg = {}, int threads = 0) {
    HeliostatFit out;
    out.surface.facet_layout = cloud.facet_layout;
    parallel_for(kFacetCount, threads, [&](std::size_t f) {
        FacetFit ff = fit_facet(cloud.facets[f], cfg);
        out.surface.facets[f] = ff.spline;
        out.reports[f] = std::move(ff.report);
    });
    return out;
}

inline nlohmann::json to_json(const ResidualStats &r) {
    return {{"min", r.min}, {"median", r.median}, {"q3", r.q3}, {"max", r.max}, {"frac_below_tol", r.frac_below_tol}};
}

inline nlohmann::json report_json(const HeliostatFit &fit) {
    nlohmann::json facets = nlohmann::json::array();
    for (const auto &r : fit.reports)
        facets.push_back({{"final_loss", r.final_loss},
                          {"iters", r.iterations},
                          {"rejected_steps", r.rejected_steps},
                          {"residual_mrad", to_json(r.residual_mrad)}});
    return {{"facet", facets}};
}

} // namespace helio
