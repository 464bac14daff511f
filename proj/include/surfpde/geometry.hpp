#pragma once

#include <array>
#include <functional>
#include <memory>
#include <vector>

#include "surfpde/jets.hpp"
#include "surfpde/types.hpp"

namespace surfpde {

/// Pointwise geometric data of a closed surface embedded in R^3.
///
/// Conventions: nu is the outward unit normal, P = I - nu nu^T the tangential
/// projector, B = grad_M nu the shape operator (so B = P on the unit sphere and
/// tr B > 0 on convex surfaces), and M = tr(B) B - B^2 the curvature tensor that
/// separates the Bochner, Hodge and surface-diffusion vector Laplacians.
struct GeomSample {
    Vec3 x = Vec3::Zero();
    Vec3 nu = Vec3::Zero();
    Mat3 P = Mat3::Zero();
    Mat3 B = Mat3::Zero();
    double trB = 0.0;
    Mat3 M = Mat3::Zero();
    Mat2 g = Mat2::Zero();
    Mat2 g_inv = Mat2::Zero();
    double area_element = 0.0;
};

struct ChartMetric {
    Mat2 g;
    Mat2 g_inv;
    double area_element;
};

/// A single parametric chart y -> chi(y) with analytic derivatives up to third
/// order. Third derivatives are what pointwise evaluation of div_Gamma(B) needs.
class Chart {
public:
    virtual ~Chart() = default;

    Vec2 lo, hi;             // rectangular parameter domain
    bool periodic = false;   // both parameters wrap (torus)
    double orientation = 1;  // d1 chi x d2 chi times this points outward

    virtual Vec3 map(const Vec2& y) const = 0;
    // J.col(a) = d_a chi, H[a][b] = d_a d_b chi, T[a][b][c] = d_a d_b d_c chi
    virtual void derivatives(const Vec2& y,
                             Eigen::Matrix<double, 3, 2>& J,
                             std::array<std::array<Vec3, 2>, 2>& H,
                             std::array<std::array<std::array<Vec3, 2>, 2>, 2>& T) const = 0;
    /// Preimage of an on-surface point; returns false if x is not representable.
    virtual bool invert(const Vec3& x, Vec2& y) const = 0;

    bool contains(const Vec2& y) const;
    /// Distance of y to the domain boundary, normalized by the half-widths.
    /// Periodic charts report 1 (no boundary).
    double boundary_margin(const Vec2& y) const;
};

ChartMetric chart_metric(const Chart& chart, const Vec2& y);

/// Scalar field given by ambient closures; enough data to form a Jet2 on a chart.
struct AmbientScalar {
    std::function<double(const Vec3&)> value;
    std::function<Vec3(const Vec3&)> grad;
    std::function<Mat3(const Vec3&)> hess;
};

AmbientScalar ambient_constant(double c);
AmbientScalar ambient_coordinate(int i);
/// x^a * y^b * z^c with analytic derivatives.
AmbientScalar ambient_monomial(int a, int b, int c);

struct AmbientVector {
    std::array<AmbientScalar, 3> comp;
};

class Surface;

/// All jet-level data of one point on an analytic surface. Construction
/// evaluates the chart to third order; the tangential-calculus members then
/// give pointwise values of every operator the identity checks need.
class SurfacePoint {
public:
    SurfacePoint(const Chart& chart, const Vec2& y);

    const Chart& chart() const { return *chart_; }
    const Vec2& param() const { return y_; }
    const Vec3& position() const { return x_; }
    const Vec3& nu() const { return nu_; }
    const Mat3& P() const { return P_; }
    const Mat3& B() const { return B_; }
    const Mat3& M() const { return M_; }
    double trB() const { return trB_; }
    const Mat2& g() const { return g_; }
    const Mat2& g_inv() const { return ginv_; }
    double area_element() const { return area_; }
    Vec3 div_B() const;  // (div_Gamma B)_i = sum_k D_k B_ik

    GeomSample sample() const;

    /// Jet of an ambient scalar composed with the chart.
    Jet2 jet(const AmbientScalar& f) const;
    /// Jet of the i-th normal component / projector entry.
    const Jet2& nu_jet(int i) const { return jnu_[i]; }
    const Jet2& P_jet(int i, int j) const { return jP_[i][j]; }

    /// Tangential gradient (D_1 v, D_2 v, D_3 v) of a scalar jet.
    Vec3 tgrad(const Jet2& f) const;
    std::array<Jet1, 3> tgrad_jet(const Jet2& f) const;
    double tderiv(const Jet1& f, int i) const;  // D_i of a first-order jet
    /// Second tangential derivatives, entry (i,j) = D_i D_j f. Not symmetric.
    Mat3 second_tangential(const Jet2& f) const;
    /// Componentwise Laplace-Beltrami, sum_k D_k D_k f.
    double laplace_beltrami(const Jet2& f) const;

    // Vector-field helpers; fields are given componentwise as jets.
    using VecJet = std::array<Jet2, 3>;
    VecJet jet(const AmbientVector& q) const;
    /// u = P q for an ambient field q (the tangential test-field construction).
    VecJet tangential_jet(const AmbientVector& q) const;
    Vec3 value(const VecJet& u) const { return {u[0].v, u[1].v, u[2].v}; }
    /// grad_M u, entry (i,j) = D_j u_i.
    Mat3 grad_M(const VecJet& u) const;
    double div_gamma(const VecJet& u) const;  // tr(P grad_M u)
    Vec3 laplace_beltrami(const VecJet& u) const;
    /// Bochner Laplacian P div_Gamma (P grad_M u).
    Vec3 bochner(const VecJet& u) const;

private:
    const Chart* chart_;
    Vec2 y_;
    Vec3 x_;
    Eigen::Matrix<double, 3, 2> J_;
    std::array<std::array<Vec3, 2>, 2> H_;
    std::array<std::array<std::array<Vec3, 2>, 2>, 2> T_;
    std::array<std::array<Jet2, 2>, 3> jJ_;  // jJ_[i][a] = jet of J_ia
    std::array<std::array<Jet2, 2>, 2> jg_, jginv_;
    Jet2 jarea_;
    std::array<Jet2, 3> jnu_;
    std::array<std::array<Jet2, 3>, 3> jP_;
    Mat2 g_, ginv_;
    double area_ = 0;
    Vec3 nu_;
    Mat3 P_, B_, M_;
    double trB_ = 0;
    std::array<std::array<Jet1, 3>, 3> jB_;  // B_ij with first derivatives
};

/// Analytic description of a closed surface (or the absence of one).
class Surface {
public:
    enum class Kind { Sphere, Ellipsoid, Torus, Plane, MeshOnly };

    static Surface sphere(double radius = 1.0);
    static Surface ellipsoid(double a, double b, double c);
    static Surface torus(double R, double r);
    static Surface plane();
    static Surface mesh_only();

    Kind kind() const { return kind_; }
    bool analytic() const { return kind_ != Kind::MeshOnly; }
    std::string name() const;
    /// Parameters in declaration order (radius / a,b,c / R,r).
    std::array<double, 3> params() const { return {p1_, p2_, p3_}; }

    Vec3 closest_point(const Vec3& x) const;
    Vec3 normal(const Vec3& x_on_surface) const;
    GeomSample sample(const Vec3& x_on_surface) const;
    SurfacePoint at(const Vec3& x_on_surface) const;

    int num_charts() const { return static_cast<int>(charts_.size()); }
    const Chart& chart(int i) const { return *charts_[i]; }
    /// Chart whose preimage sits farthest from its domain boundary.
    int chart_index_at(const Vec3& x, Vec2* y_out = nullptr) const;

    double sample_tolerance() const { return sample_tol_; }
    void set_sample_tolerance(double t) { sample_tol_ = t; }

private:
    Surface(Kind k, double p1, double p2, double p3);
    Kind kind_;
    double p1_ = 0, p2_ = 0, p3_ = 0;
    std::vector<std::shared_ptr<Chart>> charts_;
    double sample_tol_ = 1e-6;
};

/// D_i v for a scalar field with a chart expression (parametric formula).
Vec3 tangential_gradient(const Surface& surface, const AmbientScalar& v, const Vec3& x);

}  // namespace surfpde
