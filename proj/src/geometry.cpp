#include "surfpde/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace surfpde {

namespace {

double wrap_angle(double a) {
    // into (-pi, pi]
    a = std::fmod(a, 2.0 * M_PI);
    if (a <= -M_PI) a += 2.0 * M_PI;
    if (a > M_PI) a -= 2.0 * M_PI;
    return a;
}

double ipow(double t, int n) {
    double r = 1.0;
    for (int i = 0; i < n; ++i) r *= t;
    return r;
}

}  // namespace

bool Chart::contains(const Vec2& y) const {
    for (int a = 0; a < 2; ++a) {
        if (periodic) continue;
        if (y[a] < lo[a] || y[a] > hi[a]) return false;
    }
    return true;
}

double Chart::boundary_margin(const Vec2& y) const {
    if (periodic) return 1.0;
    double m = 1.0;
    for (int a = 0; a < 2; ++a) {
        const double half = 0.5 * (hi[a] - lo[a]);
        const double d = std::min(y[a] - lo[a], hi[a] - y[a]) / half;
        m = std::min(m, d);
    }
    return m;
}

ChartMetric chart_metric(const Chart& chart, const Vec2& y) {
    Eigen::Matrix<double, 3, 2> J;
    std::array<std::array<Vec3, 2>, 2> H;
    std::array<std::array<std::array<Vec3, 2>, 2>, 2> T;
    chart.derivatives(y, J, H, T);
    ChartMetric m;
    m.g = J.transpose() * J;
    const double det = m.g.determinant();
    if (!(det > 1e-14)) throw RankDeficiencyError("degenerate chart metric, det g <= 0");
    m.g_inv = m.g.inverse();
    m.area_element = std::sqrt(det);
    return m;
}

// ---------------------------------------------------------------------------
// chart families

namespace {

// chi(theta, phi) = Q * (A sin(t)cos(p), B sin(t)sin(p), C cos(t)); the
// permutation Q sends the local pole axis to ambient axis `pole`, cyclically.
class SphericalChart final : public Chart {
public:
    SphericalChart(const Vec3& semiaxes, int pole) : pole_(pole) {
        const int i1 = (pole + 1) % 3, i2 = (pole + 2) % 3;
        A_ = semiaxes[i1];
        B_ = semiaxes[i2];
        C_ = semiaxes[pole];
        axes_[0] = i1;
        axes_[1] = i2;
        axes_[2] = pole;
        lo = Vec2(0.15, -M_PI);
        hi = Vec2(M_PI - 0.15, M_PI);
        periodic = false;  // theta has real boundaries; phi wraps (handled in invert)
    }

    Vec3 map(const Vec2& y) const override {
        const double s = std::sin(y[0]), c = std::cos(y[0]);
        const double cp = std::cos(y[1]), sp = std::sin(y[1]);
        return embed(A_ * s * cp, B_ * s * sp, C_ * c);
    }

    void derivatives(const Vec2& y,
                     Eigen::Matrix<double, 3, 2>& J,
                     std::array<std::array<Vec3, 2>, 2>& H,
                     std::array<std::array<std::array<Vec3, 2>, 2>, 2>& T) const override {
        const double s = std::sin(y[0]), c = std::cos(y[0]);
        const double cp = std::cos(y[1]), sp = std::sin(y[1]);
        const Vec3 dt = embed(A_ * c * cp, B_ * c * sp, -C_ * s);
        const Vec3 dp = embed(-A_ * s * sp, B_ * s * cp, 0.0);
        const Vec3 dtt = embed(-A_ * s * cp, -B_ * s * sp, -C_ * c);
        const Vec3 dtp = embed(-A_ * c * sp, B_ * c * cp, 0.0);
        const Vec3 dpp = embed(-A_ * s * cp, -B_ * s * sp, 0.0);
        const Vec3 dttt = embed(-A_ * c * cp, -B_ * c * sp, C_ * s);
        const Vec3 dttp = embed(A_ * s * sp, -B_ * s * cp, 0.0);
        const Vec3 dtpp = embed(-A_ * c * cp, -B_ * c * sp, 0.0);
        const Vec3 dppp = embed(A_ * s * sp, -B_ * s * cp, 0.0);
        J.col(0) = dt;
        J.col(1) = dp;
        H[0][0] = dtt;
        H[0][1] = H[1][0] = dtp;
        H[1][1] = dpp;
        T[0][0][0] = dttt;
        T[0][0][1] = T[0][1][0] = T[1][0][0] = dttp;
        T[0][1][1] = T[1][0][1] = T[1][1][0] = dtpp;
        T[1][1][1] = dppp;
    }

    bool invert(const Vec3& x, Vec2& y) const override {
        const double l1 = x[axes_[0]] / A_;
        const double l2 = x[axes_[1]] / B_;
        const double l3 = x[axes_[2]] / C_;
        y[0] = std::atan2(std::hypot(l1, l2), l3);
        y[1] = std::atan2(l2, l1);
        return y[0] >= lo[0] && y[0] <= hi[0];
    }

private:
    Vec3 embed(double l1, double l2, double l3) const {
        Vec3 v = Vec3::Zero();
        v[axes_[0]] = l1;
        v[axes_[1]] = l2;
        v[axes_[2]] = l3;
        return v;
    }
    int pole_;
    int axes_[3];
    double A_, B_, C_;
};

class TorusChart final : public Chart {
public:
    TorusChart(double R, double r) : R_(R), r_(r) {
        lo = Vec2(-M_PI, -M_PI);
        hi = Vec2(M_PI, M_PI);
        periodic = true;
        orientation = -1;  // d_theta x d_phi points into the tube
    }

    Vec3 map(const Vec2& y) const override {
        const double w = R_ + r_ * std::cos(y[0]);
        return {w * std::cos(y[1]), w * std::sin(y[1]), r_ * std::sin(y[0])};
    }

    void derivatives(const Vec2& y,
                     Eigen::Matrix<double, 3, 2>& J,
                     std::array<std::array<Vec3, 2>, 2>& H,
                     std::array<std::array<std::array<Vec3, 2>, 2>, 2>& T) const override {
        const double ct = std::cos(y[0]), st = std::sin(y[0]);
        const double cp = std::cos(y[1]), sp = std::sin(y[1]);
        const double w = R_ + r_ * ct, w1 = -r_ * st, w2 = -r_ * ct, w3 = r_ * st;
        J.col(0) = Vec3(w1 * cp, w1 * sp, r_ * ct);
        J.col(1) = Vec3(-w * sp, w * cp, 0.0);
        H[0][0] = Vec3(w2 * cp, w2 * sp, -r_ * st);
        H[0][1] = H[1][0] = Vec3(-w1 * sp, w1 * cp, 0.0);
        H[1][1] = Vec3(-w * cp, -w * sp, 0.0);
        T[0][0][0] = Vec3(w3 * cp, w3 * sp, -r_ * ct);
        T[0][0][1] = T[0][1][0] = T[1][0][0] = Vec3(-w2 * sp, w2 * cp, 0.0);
        T[0][1][1] = T[1][0][1] = T[1][1][0] = Vec3(-w1 * cp, -w1 * sp, 0.0);
        T[1][1][1] = Vec3(w * sp, -w * cp, 0.0);
    }

    bool invert(const Vec3& x, Vec2& y) const override {
        const double rho = std::hypot(x[0], x[1]);
        if (rho < 1e-13) return false;
        y[0] = wrap_angle(std::atan2(x[2] / r_, (rho - R_) / r_));
        y[1] = wrap_angle(std::atan2(x[1], x[0]));
        return true;
    }

private:
    double R_, r_;
};

class PlaneChart final : public Chart {
public:
    explicit PlaneChart(double extent) {
        lo = Vec2(-extent, -extent);
        hi = Vec2(extent, extent);
    }
    Vec3 map(const Vec2& y) const override { return {y[0], y[1], 0.0}; }
    void derivatives(const Vec2&,
                     Eigen::Matrix<double, 3, 2>& J,
                     std::array<std::array<Vec3, 2>, 2>& H,
                     std::array<std::array<std::array<Vec3, 2>, 2>, 2>& T) const override {
        J.setZero();
        J(0, 0) = 1.0;
        J(1, 1) = 1.0;
        for (auto& row : H)
            for (auto& v : row) v.setZero();
        for (auto& bl : T)
            for (auto& row : bl)
                for (auto& v : row) v.setZero();
    }
    bool invert(const Vec3& x, Vec2& y) const override {
        y = {x[0], x[1]};
        return contains(y);
    }
};

}  // namespace

// ---------------------------------------------------------------------------
// ambient fields

AmbientScalar ambient_constant(double c) {
    return {[c](const Vec3&) { return c; },
            [](const Vec3&) { return Vec3::Zero().eval(); },
            [](const Vec3&) { return Mat3::Zero().eval(); }};
}

AmbientScalar ambient_coordinate(int i) {
    return {[i](const Vec3& x) { return x[i]; },
            [i](const Vec3&) { return Vec3::Unit(i).eval(); },
            [](const Vec3&) { return Mat3::Zero().eval(); }};
}

AmbientScalar ambient_monomial(int a, int b, int c) {
    auto value = [a, b, c](const Vec3& x) { return ipow(x[0], a) * ipow(x[1], b) * ipow(x[2], c); };
    auto dmono = [](const Vec3& x, const int* e, int i) {
        if (e[i] == 0) return 0.0;
        double r = e[i] * ipow(x[i], e[i] - 1);
        for (int j = 0; j < 3; ++j)
            if (j != i) r *= ipow(x[j], e[j]);
        return r;
    };
    auto d2mono = [](const Vec3& x, const int* e, int i, int j) {
        int f[3] = {e[0], e[1], e[2]};
        double coef = 1.0;
        for (int k : {i, j}) {
            if (f[k] == 0) return 0.0;
            coef *= f[k];
            f[k] -= 1;
        }
        return coef * ipow(x[0], f[0]) * ipow(x[1], f[1]) * ipow(x[2], f[2]);
    };
    AmbientScalar m;
    m.value = value;
    m.grad = [dmono, a, b, c](const Vec3& x) {
        const int e[3] = {a, b, c};
        return Vec3(dmono(x, e, 0), dmono(x, e, 1), dmono(x, e, 2));
    };
    m.hess = [d2mono, a, b, c](const Vec3& x) {
        const int e[3] = {a, b, c};
        Mat3 h;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) h(i, j) = d2mono(x, e, i, j);
        return h;
    };
    return m;
}

// ---------------------------------------------------------------------------
// SurfacePoint

SurfacePoint::SurfacePoint(const Chart& chart, const Vec2& y) : chart_(&chart), y_(y) {
    x_ = chart.map(y);
    chart.derivatives(y, J_, H_, T_);

    for (int i = 0; i < 3; ++i)
        for (int a = 0; a < 2; ++a) {
            Jet2 j;
            j.v = J_(i, a);
            j.d = Vec2(H_[a][0][i], H_[a][1][i]);
            for (int b = 0; b < 2; ++b)
                for (int c = 0; c < 2; ++c) j.h(b, c) = T_[a][b][c][i];
            jJ_[i][a] = j;
        }

    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
            Jet2 s = Jet2::constant(0.0);
            for (int i = 0; i < 3; ++i) s = s + jJ_[i][a] * jJ_[i][b];
            jg_[a][b] = s;
        }
    const Jet2 det = jg_[0][0] * jg_[1][1] - jg_[0][1] * jg_[0][1];
    if (!(det.v > 1e-14)) throw RankDeficiencyError("degenerate chart, det g <= 0");
    const Jet2 idet = inverse(det);
    jginv_[0][0] = jg_[1][1] * idet;
    jginv_[1][1] = jg_[0][0] * idet;
    jginv_[0][1] = jginv_[1][0] = -1.0 * (jg_[0][1] * idet);
    jarea_ = sqrt(det);

    // unit normal: orientation * (d1 chi x d2 chi) / |.|
    std::array<Jet2, 3> w;
    w[0] = jJ_[1][0] * jJ_[2][1] - jJ_[2][0] * jJ_[1][1];
    w[1] = jJ_[2][0] * jJ_[0][1] - jJ_[0][0] * jJ_[2][1];
    w[2] = jJ_[0][0] * jJ_[1][1] - jJ_[1][0] * jJ_[0][1];
    Jet2 n2 = Jet2::constant(0.0);
    for (int i = 0; i < 3; ++i) n2 = n2 + w[i] * w[i];
    const Jet2 invn = inverse(sqrt(n2));
    for (int i = 0; i < 3; ++i) jnu_[i] = chart.orientation * (w[i] * invn);

    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            jP_[i][j] = -1.0 * (jnu_[i] * jnu_[j]);
            if (i == j) jP_[i][j].v += 1.0;
        }

    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
            g_(a, b) = jg_[a][b].v;
            ginv_(a, b) = jginv_[a][b].v;
        }
    area_ = jarea_.v;
    for (int i = 0; i < 3; ++i) nu_[i] = jnu_[i].v;
    P_ = Mat3::Identity() - nu_ * nu_.transpose();

    // shape operator rows: B_ij = D_j nu_i
    for (int i = 0; i < 3; ++i) {
        const auto row = tgrad_jet(jnu_[i]);
        for (int j = 0; j < 3; ++j) jB_[i][j] = row[j];
    }
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) B_(i, j) = jB_[i][j].v;
    trB_ = B_.trace();
    M_ = trB_ * B_ - B_ * B_;
}

Vec3 SurfacePoint::div_B() const {
    Vec3 r = Vec3::Zero();
    for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 3; ++k) r[i] += tderiv(jB_[i][k], k);
    return r;
}

GeomSample SurfacePoint::sample() const {
    GeomSample s;
    s.x = x_;
    s.nu = nu_;
    s.P = P_;
    s.B = B_;
    s.trB = trB_;
    s.M = M_;
    s.g = g_;
    s.g_inv = ginv_;
    s.area_element = area_;
    return s;
}

Jet2 SurfacePoint::jet(const AmbientScalar& f) const {
    Jet2 r;
    r.v = f.value(x_);
    const Vec3 G = f.grad(x_);
    const Mat3 Hs = f.hess(x_);
    for (int a = 0; a < 2; ++a) r.d[a] = G.dot(J_.col(a));
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) r.h(a, b) = J_.col(a).dot(Hs * J_.col(b)) + G.dot(H_[a][b]);
    return r;
}

Vec3 SurfacePoint::tgrad(const Jet2& f) const { return J_ * (ginv_ * f.d); }

std::array<Jet1, 3> SurfacePoint::tgrad_jet(const Jet2& f) const {
    std::array<Jet1, 3> r;
    for (int i = 0; i < 3; ++i) {
        Jet1 s;
        for (int k = 0; k < 2; ++k)
            for (int l = 0; l < 2; ++l)
                s = s + jJ_[i][k].lower() * jginv_[k][l].lower() * f.partial(l);
        r[i] = s;
    }
    return r;
}

double SurfacePoint::tderiv(const Jet1& f, int i) const { return (J_ * (ginv_ * f.d))(i); }

Mat3 SurfacePoint::second_tangential(const Jet2& f) const {
    const auto tj = tgrad_jet(f);
    Mat3 r;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) r(i, j) = tderiv(tj[j], i);
    return r;
}

double SurfacePoint::laplace_beltrami(const Jet2& f) const {
    const auto tj = tgrad_jet(f);
    double s = 0.0;
    for (int k = 0; k < 3; ++k) s += tderiv(tj[k], k);
    return s;
}

SurfacePoint::VecJet SurfacePoint::jet(const AmbientVector& q) const {
    return {jet(q.comp[0]), jet(q.comp[1]), jet(q.comp[2])};
}

SurfacePoint::VecJet SurfacePoint::tangential_jet(const AmbientVector& q) const {
    const VecJet jq = jet(q);
    VecJet u;
    for (int i = 0; i < 3; ++i) {
        Jet2 s = Jet2::constant(0.0);
        for (int j = 0; j < 3; ++j) s = s + jP_[i][j] * jq[j];
        u[i] = s;
    }
    return u;
}

Mat3 SurfacePoint::grad_M(const VecJet& u) const {
    Mat3 r;
    for (int i = 0; i < 3; ++i) r.row(i) = tgrad(u[i]).transpose();
    return r;
}

double SurfacePoint::div_gamma(const VecJet& u) const { return (P_ * grad_M(u)).trace(); }

Vec3 SurfacePoint::laplace_beltrami(const VecJet& u) const {
    return {laplace_beltrami(u[0]), laplace_beltrami(u[1]), laplace_beltrami(u[2])};
}

Vec3 SurfacePoint::bochner(const VecJet& u) const {
    std::array<std::array<Jet1, 3>, 3> du;  // du[l][k] = D_k u_l
    for (int l = 0; l < 3; ++l) du[l] = tgrad_jet(u[l]);
    // A_ik = sum_l P_il D_k u_l  (the covariant gradient)
    std::array<std::array<Jet1, 3>, 3> A;
    for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 3; ++k) {
            Jet1 s;
            for (int l = 0; l < 3; ++l) s = s + jP_[i][l].lower() * du[l][k];
            A[i][k] = s;
        }
    Vec3 divA = Vec3::Zero();
    for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 3; ++k) divA[i] += tderiv(A[i][k], k);
    return P_ * divA;
}

// ---------------------------------------------------------------------------
// Surface

Surface::Surface(Kind k, double p1, double p2, double p3) : kind_(k), p1_(p1), p2_(p2), p3_(p3) {}

Surface Surface::sphere(double radius) {
    if (!(radius > 0)) throw ConfigError("sphere radius must be positive");
    Surface s(Kind::Sphere, radius, 0, 0);
    const Vec3 ax(radius, radius, radius);
    for (int pole = 0; pole < 3; ++pole) s.charts_.push_back(std::make_shared<SphericalChart>(ax, pole));
    return s;
}

Surface Surface::ellipsoid(double a, double b, double c) {
    if (!(a > 0 && b > 0 && c > 0)) throw ConfigError("ellipsoid semiaxes must be positive");
    Surface s(Kind::Ellipsoid, a, b, c);
    const Vec3 ax(a, b, c);
    for (int pole = 0; pole < 3; ++pole) s.charts_.push_back(std::make_shared<SphericalChart>(ax, pole));
    return s;
}

Surface Surface::torus(double R, double r) {
    if (!(R > r && r > 0)) throw ConfigError("torus requires R > r > 0");
    Surface s(Kind::Torus, R, r, 0);
    s.charts_.push_back(std::make_shared<TorusChart>(R, r));
    return s;
}

Surface Surface::plane() {
    Surface s(Kind::Plane, 10.0, 0, 0);
    s.charts_.push_back(std::make_shared<PlaneChart>(10.0));
    return s;
}

Surface Surface::mesh_only() { return Surface(Kind::MeshOnly, 0, 0, 0); }

std::string Surface::name() const {
    switch (kind_) {
        case Kind::Sphere: return "sphere";
        case Kind::Ellipsoid: return "ellipsoid";
        case Kind::Torus: return "torus";
        case Kind::Plane: return "plane";
        case Kind::MeshOnly: return "mesh-only";
    }
    return "?";
}

Vec3 Surface::closest_point(const Vec3& x) const {
    switch (kind_) {
        case Kind::Sphere: {
            const double n = x.norm();
            if (n < 1e-13) throw ProjectionError("point at sphere center has no closest point");
            return (p1_ / n) * x;
        }
        case Kind::Ellipsoid: {
            const Vec3 a2(p1_ * p1_, p2_ * p2_, p3_ * p3_);
            if (x.norm() < 1e-13) throw ProjectionError("point at ellipsoid center has no closest point");
            // Lagrange condition p_i = a_i^2 x_i / (a_i^2 + t); solve Phi(t) = 0 by
            // damped (bracketed) Newton.
            auto phi = [&](double t) {
                double s = -1.0;
                for (int i = 0; i < 3; ++i) {
                    const double d = a2[i] + t;
                    s += a2[i] * x[i] * x[i] / (d * d);
                }
                return s;
            };
            auto dphi = [&](double t) {
                double s = 0.0;
                for (int i = 0; i < 3; ++i) {
                    const double d = a2[i] + t;
                    s += -2.0 * a2[i] * x[i] * x[i] / (d * d * d);
                }
                return s;
            };
            const double a2min = a2.minCoeff();
            double t_lo, t_hi;
            if (phi(0.0) >= 0.0) {
                t_lo = 0.0;
                t_hi = std::max(1.0, x.norm() * std::sqrt(a2.maxCoeff()));
                int guard = 0;
                while (phi(t_hi) > 0.0 && guard++ < 80) t_hi *= 2.0;
                if (guard >= 80) throw ProjectionError("ellipsoid projection bracket failed");
            } else {
                t_hi = 0.0;
                double step = 0.5 * a2min;
                t_lo = -a2min + step;
                int guard = 0;
                while (phi(t_lo) < 0.0 && guard++ < 60) {
                    step *= 0.5;
                    t_lo = -a2min + step;
                }
                if (guard >= 60) throw ProjectionError("ellipsoid projection is ambiguous near the axis");
            }
            double t = 0.5 * (t_lo + t_hi);
            for (int it = 0; it < 50; ++it) {
                const double f = phi(t);
                if (f > 0.0)
                    t_lo = t;
                else
                    t_hi = t;
                const double df = dphi(t);
                double tn = t - f / df;
                if (!(tn > t_lo && tn < t_hi)) tn = 0.5 * (t_lo + t_hi);  // damping
                if (std::abs(tn - t) <= 1e-12 * (1.0 + std::abs(t))) {
                    t = tn;
                    break;
                }
                t = tn;
            }
            Vec3 p;
            for (int i = 0; i < 3; ++i) p[i] = a2[i] * x[i] / (a2[i] + t);
            return p;
        }
        case Kind::Torus: {
            const double rho = std::hypot(x[0], x[1]);
            if (rho < 1e-13) throw ProjectionError("point on the torus axis has no closest point");
            const Vec3 ring(p1_ * x[0] / rho, p1_ * x[1] / rho, 0.0);
            const Vec3 d = x - ring;
            const double dn = d.norm();
            if (dn < 1e-13) throw ProjectionError("point on the torus core circle has no closest point");
            return ring + (p2_ / dn) * d;
        }
        case Kind::Plane: return {x[0], x[1], 0.0};
        case Kind::MeshOnly: throw ProjectionError("mesh-only surface has no closest-point map");
    }
    throw ProjectionError("unreachable");
}

Vec3 Surface::normal(const Vec3& x) const {
    const Vec3 p = closest_point(x);
    switch (kind_) {
        case Kind::Sphere: return p.normalized();
        case Kind::Ellipsoid: {
            Vec3 n(p[0] / (p1_ * p1_), p[1] / (p2_ * p2_), p[2] / (p3_ * p3_));
            return n.normalized();
        }
        case Kind::Torus: {
            const double rho = std::hypot(p[0], p[1]);
            const Vec3 ring(p1_ * p[0] / rho, p1_ * p[1] / rho, 0.0);
            return (p - ring).normalized();
        }
        case Kind::Plane: return Vec3::UnitZ();
        case Kind::MeshOnly: break;
    }
    throw ProjectionError("mesh-only surface has no normal map");
}

int Surface::chart_index_at(const Vec3& x, Vec2* y_out) const {
    int best = -1;
    double best_margin = -1.0;
    Vec2 best_y;
    for (int i = 0; i < num_charts(); ++i) {
        Vec2 y;
        if (!charts_[i]->invert(x, y)) continue;
        if (!charts_[i]->contains(y)) continue;
        const double m = charts_[i]->boundary_margin(y);
        if (m > best_margin) {
            best_margin = m;
            best = i;
            best_y = y;
        }
    }
    if (best < 0) throw ProjectionError("point outside all charts");
    if (y_out) *y_out = best_y;
    return best;
}

SurfacePoint Surface::at(const Vec3& x) const {
    if (!analytic()) throw ProjectionError("mesh-only surface has no charts");
    const Vec3 p = closest_point(x);
    const double scale = std::max(1.0, p.norm());
    if ((x - p).norm() > sample_tol_ * scale)
        throw ProjectionError("point is farther than tolerance from the surface");
    Vec2 y;
    const int ci = chart_index_at(p, &y);
    return SurfacePoint(*charts_[ci], y);
}

GeomSample Surface::sample(const Vec3& x) const { return at(x).sample(); }

Vec3 tangential_gradient(const Surface& surface, const AmbientScalar& v, const Vec3& x) {
    const SurfacePoint pt = surface.at(x);
    return pt.tgrad(pt.jet(v));
}

}  // namespace surfpde
