#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "heliostat/bspline.hpp"
#include "heliostat/error.hpp"
#include "heliostat/geometry.hpp"

namespace helio {

inline constexpr int kGridSize = 8;
inline constexpr int kDefaultDegree = 3;
inline constexpr double kFacetWidth = 1.6;   // m, along facet-local x (spline u)
inline constexpr double kFacetHeight = 1.25; // m, along facet-local y (spline v)

/// z_ctrl(i, j): i indexes u (facet x), j indexes v (facet y). Meters.
using ControlGrid = Eigen::Matrix<double, kGridSize, kGridSize>;

/// One mirror facet: an 8x8 tensor-product B-spline height field over a fixed xy lattice.
///
/// The surface is S(u,v) = (width*u, height*v, z(u,v)) with z = sum N_i(u) N_j(v) z_ctrl(i,j),
/// all rational weights equal to one. The xy positions of the control points sit on the
/// Greville lattice (see `control_x`), which makes x and y exactly affine in u and v.
struct FacetSpline {
    int degree_u = kDefaultDegree;
    int degree_v = kDefaultDegree;
    double width = kFacetWidth;
    double height = kFacetHeight;
    ControlGrid z_ctrl = ControlGrid::Zero();

    std::vector<double> knots_u() const { return clamped_uniform_knots(kGridSize, degree_u); }
    std::vector<double> knots_v() const { return clamped_uniform_knots(kGridSize, degree_v); }

    /// Facet-local x of control column i.
    double control_x(int i) const { return width * greville_abscissae(knots_u(), degree_u)[i]; }
    double control_y(int j) const { return height * greville_abscissae(knots_v(), degree_v)[j]; }

    friend bool operator==(const FacetSpline &a, const FacetSpline &b) {
        return a.degree_u == b.degree_u && a.degree_v == b.degree_v && a.width == b.width &&
               a.height == b.height && a.z_ctrl == b.z_ctrl;
    }
};

/// Precomputed knot vectors for repeated evaluation of splines sharing degree.
class SplineBasis {
public:
    explicit SplineBasis(int degree_u = kDefaultDegree, int degree_v = kDefaultDegree)
        : pu_(degree_u), pv_(degree_v), ku_(clamped_uniform_knots(kGridSize, degree_u)),
          kv_(clamped_uniform_knots(kGridSize, degree_v)) {}
    explicit SplineBasis(const FacetSpline &s) : SplineBasis(s.degree_u, s.degree_v) {}

    SpanBasis u(double t) const { return span_basis(ku_, pu_, t); }
    SpanBasis v(double t) const { return span_basis(kv_, pv_, t); }
    int degree_u() const { return pu_; }
    int degree_v() const { return pv_; }

private:
    int pu_, pv_;
    std::vector<double> ku_, kv_;
};

/// Height and partial derivatives at one parameter point.
struct SurfaceJet {
    double z = 0.0;
    double dz_du = 0.0;
    double dz_dv = 0.0;
};

inline SurfaceJet surface_jet(const FacetSpline &s, const SplineBasis &basis, double u, double v) {
    const SpanBasis bu = basis.u(u);
    const SpanBasis bv = basis.v(v);
    SurfaceJet jet;
    for (int a = 0; a <= basis.degree_u(); ++a) {
        double row = 0.0, row_dv = 0.0;
        for (int b = 0; b <= basis.degree_v(); ++b) {
            const double c = s.z_ctrl(bu.first + a, bv.first + b);
            row += bv.value[b] * c;
            row_dv += bv.deriv[b] * c;
        }
        jet.z += bu.value[a] * row;
        jet.dz_du += bu.deriv[a] * row;
        jet.dz_dv += bu.value[a] * row_dv;
    }
    return jet;
}

inline void check_uv(double u, double v) {
    check_parameter(u);
    check_parameter(v);
}

/// z-offset (m) at (u,v) in [0,1]^2.
inline double surface_eval(const FacetSpline &s, double u, double v) {
    check_uv(u, v);
    return surface_jet(s, SplineBasis(s), u, v).z;
}

/// Unit normal from height slopes: normalize(-dz/dx, -dz/dy, 1).
inline Vec3 normal_from_slopes(double dz_dx, double dz_dy) {
    return Vec3(-dz_dx, -dz_dy, 1.0).normalized();
}

/// Outward (z > 0) unit normal, normalize(S_u x S_v).
inline Vec3 surface_normal(const FacetSpline &s, double u, double v) {
    check_uv(u, v);
    const SurfaceJet jet = surface_jet(s, SplineBasis(s), u, v);
    const Vec3 su(s.width, 0.0, jet.dz_du);
    const Vec3 sv(0.0, s.height, jet.dz_dv);
    const Vec3 m = su.cross(sv);
    const double len = m.norm();
    if (!(len > 0.0))
        throw Error(ErrorKind::numerical, "degenerate surface tangents");
    return m / len;
}

/// Sensitivities of height and normal with respect to every control point.
struct SurfaceSensitivity {
    ControlGrid dz;                    // dz / dz_ctrl(i,j)
    std::array<ControlGrid, 3> dnormal; // d normal_k / dz_ctrl(i,j), k = x, y, z
};

inline SurfaceSensitivity surface_grad_z(const FacetSpline &s, double u, double v) {
    check_uv(u, v);
    const SplineBasis basis(s);
    const SpanBasis bu = basis.u(u);
    const SpanBasis bv = basis.v(v);
    const SurfaceJet jet = surface_jet(s, basis, u, v);

    const Vec3 m(-jet.dz_du / s.width, -jet.dz_dv / s.height, 1.0);
    const double len = m.norm();
    const Vec3 n = m / len;
    // d n = (I - n n^T) d m / |m|
    const Mat3 proj = (Mat3::Identity() - n * n.transpose()) / len;

    SurfaceSensitivity out;
    out.dz.setZero();
    for (auto &g : out.dnormal)
        g.setZero();
    for (int a = 0; a <= basis.degree_u(); ++a) {
        for (int b = 0; b <= basis.degree_v(); ++b) {
            const int i = bu.first + a, j = bv.first + b;
            out.dz(i, j) = bu.value[a] * bv.value[b];
            const Vec3 dm(-bu.deriv[a] * bv.value[b] / s.width, -bu.value[a] * bv.deriv[b] / s.height, 0.0);
            const Vec3 dn = proj * dm;
            for (int k = 0; k < 3; ++k)
                out.dnormal[k](i, j) = dn[k];
        }
    }
    return out;
}

/// Least-squares projection of a height function z(x, y) (facet-local meters) onto the
/// spline space, using an n x n grid of cell-centred samples. Functions already in the
/// spline space (for instance any bicubic polynomial) are reproduced exactly.
inline ControlGrid project_heights(const FacetSpline &shape, const std::function<double(double, double)> &z,
                                   int samples = 64) {
    const SplineBasis basis(shape);
    Eigen::MatrixXd bu = Eigen::MatrixXd::Zero(samples, kGridSize);
    Eigen::MatrixXd bv = Eigen::MatrixXd::Zero(samples, kGridSize);
    for (int k = 0; k < samples; ++k) {
        const double t = (k + 0.5) / samples;
        const SpanBasis su = basis.u(t), sv = basis.v(t);
        for (int a = 0; a <= basis.degree_u(); ++a)
            bu(k, su.first + a) = su.value[a];
        for (int b = 0; b <= basis.degree_v(); ++b)
            bv(k, sv.first + b) = sv.value[b];
    }
    Eigen::MatrixXd f(samples, samples);
    for (int r = 0; r < samples; ++r)
        for (int c = 0; c < samples; ++c)
            f(r, c) = z(shape.width * (r + 0.5) / samples, shape.height * (c + 0.5) / samples);
    // F ~ Bu C Bv^T  =>  C = pinv(Bu) F pinv(Bv)^T
    const Eigen::MatrixXd pu = (bu.transpose() * bu).ldlt().solve(bu.transpose());
    const Eigen::MatrixXd pv = (bv.transpose() * bv).ldlt().solve(bv.transpose());
    return pu * f * pv.transpose();
}

} // namespace helio
