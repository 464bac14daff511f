#include <doctest.h>

#include <random>

#include "surfpde/solvers.hpp"

using namespace surfpde;

namespace {

std::shared_ptr<const Surface> sphere_surf(double r = 1.0) {
    return std::make_shared<Surface>(Surface::sphere(r));
}

std::shared_ptr<const TriMesh> sphere_mesh(std::shared_ptr<const Surface> s, int level) {
    return std::make_shared<TriMesh>(base_mesh(s, level));
}

Vec3 rotation_field(const Vec3& x) { return Vec3(0, 0, 1).cross(x); }

VecFunc grad_x3(std::shared_ptr<const Surface> s) {
    return [s](const Vec3& x) {
        const SurfacePoint pt = s->at(x);
        return pt.tgrad(pt.jet(ambient_coordinate(2)));
    };
}

}  // namespace

TEST_CASE("LB: zero source gives the zero solution") {
    auto s = sphere_surf();
    auto m = sphere_mesh(s, 1);
    const auto r = solve_laplace_beltrami(s, m, [](const Vec3&) { return 0.0; });
    CHECK(r.report.converged);
    CHECK(r.u.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("LB: sphere harmonic source converges at second order") {
    auto s = sphere_surf();
    double prev_l2 = -1, prev_h1 = -1, prev_h = -1;
    for (int level : {2, 3, 4}) {
        auto m = sphere_mesh(s, level);
        const auto r = solve_laplace_beltrami(s, m, [](const Vec3& x) { return 2.0 * x[2]; });
        REQUIRE(r.report.converged);
        const auto err = scalar_error(*r.space, r.u, [](const Vec3& x) { return x[2]; }, grad_x3(s));
        const double h = m->size().h_max;
        if (prev_l2 > 0) {
            CHECK(std::log(prev_l2 / err.l2) / std::log(prev_h / h) > 1.85);
            CHECK(std::log(prev_h1 / err.h1) / std::log(prev_h / h) > 0.85);
        }
        prev_l2 = err.l2;
        prev_h1 = err.h1;
        prev_h = h;
    }
}

TEST_CASE("LB: torus manufactured solution via the parametric formula") {
    auto s = std::make_shared<Surface>(Surface::torus(2.0, 1.0));
    // u(theta, phi) = cos(theta) cos(phi); f = -Lap_G u computed symbolically
    // from the chart jets
    auto chart_jet = [](const SurfacePoint& pt) {
        const double th = pt.param()[0], ph = pt.param()[1];
        Jet2 u;
        u.v = std::cos(th) * std::cos(ph);
        u.d = Vec2(-std::sin(th) * std::cos(ph), -std::cos(th) * std::sin(ph));
        u.h << -std::cos(th) * std::cos(ph), std::sin(th) * std::sin(ph),
            std::sin(th) * std::sin(ph), -std::cos(th) * std::cos(ph);
        return u;
    };
    const ScalarFunc f = [&, s](const Vec3& x) {
        const SurfacePoint pt = s->at(x);
        return -pt.laplace_beltrami(chart_jet(pt));
    };
    const ScalarFunc u_exact = [&, s](const Vec3& x) { return chart_jet(s->at(x)).v; };
    const VecFunc grad_exact = [&, s](const Vec3& x) {
        const SurfacePoint pt = s->at(x);
        return pt.tgrad(chart_jet(pt));
    };
    double prev_l2 = -1, prev_h = -1;
    for (int level : {1, 2, 3}) {
        auto m = std::make_shared<TriMesh>(base_mesh(s, level));
        const auto r = solve_laplace_beltrami(s, m, f);
        REQUIRE(r.report.converged);
        const auto err = scalar_error(*r.space, r.u, u_exact, grad_exact);
        const double h = m->size().h_max;
        if (prev_l2 > 0) CHECK(std::log(prev_l2 / err.l2) / std::log(prev_h / h) > 1.7);
        prev_l2 = err.l2;
        prev_h = h;
    }
    CHECK(prev_l2 < 2e-3);
}

TEST_CASE("vector Laplace: Bochner and Hodge spectral manufactured solutions") {
    auto s = sphere_surf();
    auto m = sphere_mesh(s, 2);
    // -Lap_B has eigenvalue 1 on the rotation field, -Lap_H eigenvalue 2
    {
        VectorLaplaceOptions o;
        o.variant = OperatorVariant::Bochner;
        const auto r = solve_vector_laplace(s, m, rotation_field, o);
        REQUIRE(r.report.converged);
        const auto err = vector_error(*r.space, r.u, rotation_field, {});
        CHECK(err.l2 < 5e-3);
    }
    {
        VectorLaplaceOptions o;
        o.variant = OperatorVariant::Hodge;
        const auto r = solve_vector_laplace(
            s, m, [](const Vec3& x) { return (2.0 * rotation_field(x)).eval(); }, o);
        const auto err = vector_error(*r.space, r.u, rotation_field, {});
        CHECK(err.l2 < 5e-3);
    }
    // zero data -> zero field (injectivity of the covariant gradient)
    {
        const auto r = solve_vector_laplace(s, m, [](const Vec3&) { return Vec3::Zero().eval(); });
        CHECK(r.u.cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("vector Laplace converges at second order (P2)") {
    auto s = sphere_surf();
    double prev = -1, prev_h = -1;
    for (int level : {1, 2, 3}) {
        auto m = sphere_mesh(s, level);
        const auto r = solve_vector_laplace(s, m, rotation_field, {});
        const auto err = vector_error(*r.space, r.u, rotation_field, {});
        const double h = m->size().h_max;
        if (prev > 0) CHECK(std::log(prev / err.l2) / std::log(prev_h / h) > 1.85);
        prev = err.l2;
        prev_h = h;
    }
}

TEST_CASE("biharmonic problems on the sphere") {
    auto s = sphere_surf();
    auto m = sphere_mesh(s, 2);
    {  // scalar: LapLap x3 = 4 x3
        LaplaceBeltramiOptions o;
        o.degree = 2;
        const auto r = solve_biharmonic_scalar(s, m, [](const Vec3& x) { return 4.0 * x[2]; }, o);
        REQUIRE(r.report.converged);
        const auto err = scalar_error(*r.space, r.u, [](const Vec3& x) { return x[2]; }, {});
        CHECK(err.l2 / std::sqrt(4.0 * M_PI / 3.0) < 0.01);
    }
    {  // zero data
        const auto r = solve_biharmonic_scalar(s, m, [](const Vec3&) { return 0.0; });
        CHECK(r.u.cwiseAbs().maxCoeff() < 1e-10);
    }
    {  // vector: (-Lap_B)^2 = 1 on the rotation field
        const auto r = solve_biharmonic_vector(s, m, rotation_field);
        REQUIRE(r.report.converged);
        const auto err = vector_error(*r.space, r.u, rotation_field, {});
        CHECK(err.l2 / std::sqrt(8.0 * M_PI / 3.0) < 0.01);
    }
}

TEST_CASE("Stokes: zero data and the rotating-field MMS") {
    auto s = sphere_surf();
    auto m = sphere_mesh(s, 2);
    StokesProblem sp(s, m);
    {
        const auto r = sp.solve_stokes([](const Vec3&) { return Vec3::Zero().eval(); });
        CHECK(r.u.cwiseAbs().maxCoeff() < 1e-10);
        CHECK(r.p.cwiseAbs().maxCoeff() < 1e-8);
    }
    // u = rot, pi = x3, f = u + grad x3 = u + P e3, g = 0
    const VecFunc f = [s](const Vec3& x) {
        const SurfacePoint pt = s->at(x);
        return (rotation_field(x) + pt.tgrad(pt.jet(ambient_coordinate(2)))).eval();
    };
    const auto r = sp.solve_stokes(f);
    REQUIRE(r.report.converged);
    const auto verr = vector_error(*sp.velocity_space(), sp.reduction().expand(r.u), rotation_field, {});
    CHECK(verr.l2 < 5e-3);
    const auto perr = scalar_error(*sp.pressure_space(), r.p, [](const Vec3& x) { return x[2]; }, {});
    CHECK(perr.l2 < 5e-2);
    // discrete divergence residual
    CHECK(sp.divergence_residual(r.u).norm() < 1e-9);
}

TEST_CASE("Stokes: compressible datum recovers a gradient velocity with zero pressure") {
    auto s = sphere_surf();
    auto m = sphere_mesh(s, 2);
    StokesProblem sp(s, m);
    // u = grad_G x3 (eigenvalue 1 of -Lap_B on l=1 gradient fields), g = div u = -2 x3
    const auto r = sp.solve_stokes(grad_x3(s), [](const Vec3& x) { return -2.0 * x[2]; });
    REQUIRE(r.report.converged);
    const auto verr = vector_error(*sp.velocity_space(), sp.reduction().expand(r.u), grad_x3(s), {});
    CHECK(verr.l2 < 5e-3);
    CHECK(sp.pressure_l2(r.p) < 5e-2);
}

TEST_CASE("Helmholtz decomposition and Leray projection") {
    auto s = sphere_surf();
    auto m = sphere_mesh(s, 2);
    StokesProblem sp(s, m);
    const VectorX vg = sp.interpolate_velocity(grad_x3(s));
    const VectorX vr = sp.interpolate_velocity(rotation_field);

    // pure gradient: div-free part at discretization-error level
    auto dg = sp.helmholtz_decompose(vg);
    CHECK(sp.l2_norm(dg.divfree) < 5e-3 * sp.l2_norm(vg));
    // rotation field: gradient part tiny
    auto dr = sp.helmholtz_decompose(vr);
    CHECK(sp.l2_norm(dr.gradient) < 5e-3 * sp.l2_norm(vr));
    // sum splits into the two parts
    auto ds = sp.helmholtz_decompose(vg + vr);
    CHECK(sp.l2_norm(ds.divfree - vr) < 1e-2 * sp.l2_norm(vr));
    CHECK(sp.l2_norm(ds.gradient - vg) < 1e-2 * sp.l2_norm(vg));

    // contracts: exact reconstruction, orthogonality, idempotence on random fields
    std::mt19937 rng(17);
    std::normal_distribution<double> g;
    for (int trial = 0; trial < 3; ++trial) {
        VectorX v(sp.nu());
        for (auto& x : v) x = g(rng);
        const auto d = sp.helmholtz_decompose(v);
        const double vn = sp.l2_norm(v);
        CHECK(sp.l2_norm(v - d.divfree - d.gradient) < 1e-10 * vn);
        CHECK(std::abs(d.orthogonality) < 1e-10 * vn * vn);
        const VectorX h2 = sp.leray_project(d.divfree);
        CHECK(sp.l2_norm(h2 - d.divfree) < 1e-8 * vn);
    }
}

TEST_CASE("Oseen: zero transport equals Stokes; energy identity") {
    auto s = sphere_surf();
    auto m = sphere_mesh(s, 2);
    StokesProblem sp(s, m);
    const VecFunc f = [s](const Vec3& x) {
        const SurfacePoint pt = s->at(x);
        return (rotation_field(x) + pt.tgrad(pt.jet(ambient_coordinate(2)))).eval();
    };
    const auto stokes = sp.solve_stokes(f, {}, 1e-12);
    const auto oseen0 = sp.solve_oseen(VectorX::Zero(sp.nu()), f, {}, 1e-12);
    CHECK(sp.l2_norm(oseen0.u - stokes.u) < 1e-10);
    CHECK(sp.pressure_l2(oseen0.p - stokes.p) < 1e-9);

    // small transport: O(|w|) perturbation of the Stokes solution
    const VectorX w = 0.05 * sp.interpolate_velocity(rotation_field);
    const auto oseen = sp.solve_oseen(w, f);
    const double diff = sp.h1_norm(oseen.u - stokes.u);
    CHECK(diff < 0.5 * sp.h1_norm(stokes.u));

    // energy check: u'(K + N(w))u = f'u up to the pressure term (g = 0)
    const Field wf{sp.velocity_space(), sp.reduction().expand(w)};
    const SparseMatrix N = sp.reduction().reduce_matrix(assemble_convection(*sp.velocity_space(), wf));
    const VectorX f_t = sp.reduction().reduce(assemble_load_vector(*sp.velocity_space(), f));
    const double lhs = oseen.u.dot(sp.K().apply(oseen.u)) + oseen.u.dot(N.apply(oseen.u));
    const double rhs = f_t.dot(oseen.u);
    CHECK(std::abs(lhs - rhs) < 1e-7 * std::abs(rhs));
}

TEST_CASE("Navier-Stokes: trivial data and small-data Picard contraction") {
    auto s = sphere_surf();
    auto m = sphere_mesh(s, 2);
    StokesProblem sp(s, m);
    {
        const auto r = sp.solve_navier_stokes([](const Vec3&) { return Vec3::Zero().eval(); });
        CHECK(r.report.converged);
        CHECK(r.report.nonlinear_iterations <= 1);
        CHECK(sp.l2_norm(r.u) < 1e-12);
    }
    const double eps = 0.01;
    const VecFunc f = [s, eps](const Vec3& x) {
        const SurfacePoint pt = s->at(x);
        return (eps * (rotation_field(x) + pt.tgrad(pt.jet(ambient_coordinate(2))))).eval();
    };
    const auto r = sp.solve_navier_stokes(f);
    REQUIRE(r.report.converged);
    CHECK(r.report.nonlinear_iterations <= 6);
    for (double ratio : r.report.contraction_ratios) CHECK(ratio < 0.2);
    // exact MMS: u = eps rot, pi = eps x3 - eps^2/2 (x3^2 - 1/3)
    const auto verr = vector_error(
        *sp.velocity_space(), sp.reduction().expand(r.u),
        [eps](const Vec3& x) { return (eps * rotation_field(x)).eval(); }, {});
    CHECK(verr.l2 < 1e-4);
    const auto perr = scalar_error(
        *sp.pressure_space(), r.p,
        [eps](const Vec3& x) { return eps * x[2] - 0.5 * eps * eps * (x[2] * x[2] - 1.0 / 3.0); },
        {});
    CHECK(perr.l2 < 2e-3);
}

TEST_CASE("Navier-Stokes: Newton agrees with Picard") {
    auto s = sphere_surf();
    auto m = sphere_mesh(s, 1);
    StokesProblem sp(s, m);
    const VecFunc f = [s](const Vec3& x) {
        const SurfacePoint pt = s->at(x);
        return (0.1 * (rotation_field(x) + pt.tgrad(pt.jet(ambient_coordinate(2))))).eval();
    };
    const auto rp = sp.solve_navier_stokes(f);
    NSOptions no;
    no.method = NSMethod::Newton;
    const auto rn = sp.solve_navier_stokes(f, {}, no);
    REQUIRE(rp.report.converged);
    REQUIRE(rn.report.converged);
    CHECK(sp.h1_norm(rp.u - rn.u) < 1e-7 * sp.h1_norm(rp.u));
}

TEST_CASE("Stokes operator spectrum on the sphere") {
    auto s = sphere_surf();
    auto m = sphere_mesh(s, 2);
    StokesProblem sp(s, m);
    const EigenPairs& ep = sp.stokes_eigs(3);
    REQUIRE(ep.values.size() >= 3);
    for (int i = 0; i < 3; ++i) {
        CHECK(ep.values[i] == doctest::Approx(1.0).epsilon(0.03));
        CHECK(sp.divergence_residual(ep.vectors[i]).norm() < 1e-8);
    }
    for (int i = 1; i < 3; ++i) CHECK(ep.values[i] >= ep.values[i - 1]);
}

TEST_CASE("fractional Stokes operator") {
    auto s = sphere_surf();
    auto m = sphere_mesh(s, 1);
    StokesProblem sp(s, m);
    const EigenPairs& ep = sp.stokes_eigs(4);
    const VectorX& v1 = ep.vectors[0];
    // alpha = 1 reproduces the eigenvalue action
    double rem = 0.0;
    const VectorX av = sp.fractional_stokes_apply(1.0, v1, 4, &rem);
    CHECK(sp.l2_norm(av - ep.values[0] * v1) < 1e-7);
    CHECK(rem < 1e-7);
    // semigroup on the truncated span
    VectorX v = v1 + 0.5 * ep.vectors[2];
    const VectorX half = sp.fractional_stokes_apply(0.5, v, 4);
    const VectorX half2 = sp.fractional_stokes_apply(0.5, half, 4);
    const VectorX full = sp.fractional_stokes_apply(1.0, v, 4);
    CHECK(sp.l2_norm(half2 - full) < 1e-8 * sp.l2_norm(full));
    // alpha = 1/2 on the unit-eigenvalue eigenvector is close to identity
    const VectorX sq = sp.fractional_stokes_apply(0.5, v1, 4);
    CHECK(sp.l2_norm(sq - std::sqrt(ep.values[0]) * v1) < 1e-7);
    CHECK_THROWS_AS(sp.fractional_stokes_apply(-1.0, v1, 4), ConfigError);
}

TEST_CASE("Galerkin NS: zero data and agreement with Picard") {
    auto s = sphere_surf();
    auto m = sphere_mesh(s, 1);
    StokesProblem sp(s, m);
    {
        const auto r = sp.ns_galerkin([](const Vec3&) { return Vec3::Zero().eval(); }, 3);
        CHECK(r.coefficients.cwiseAbs().maxCoeff() < 1e-12);
    }
    const double eps = 0.01;
    const VecFunc f = [s, eps](const Vec3& x) {
        const SurfacePoint pt = s->at(x);
        return (eps * (rotation_field(x) + pt.tgrad(pt.jet(ambient_coordinate(2))))).eval();
    };
    const auto rg = sp.ns_galerkin(f, 8);
    const auto rp = sp.solve_navier_stokes(f);
    REQUIRE(rg.report.converged);
    REQUIRE(rp.report.converged);
    CHECK(sp.h1_norm(rg.u - rp.u) < 0.05 * sp.h1_norm(rp.u));
}

TEST_CASE("decoupled pressure recovery agrees with the saddle pressure") {
    auto s = sphere_surf();
    const VecFunc f = [s](const Vec3& x) {
        const SurfacePoint pt = s->at(x);
        return (rotation_field(x) + pt.tgrad(pt.jet(ambient_coordinate(2)))).eval();
    };
    double prev = -1;
    for (int level : {1, 2}) {
        auto m = sphere_mesh(s, level);
        StokesProblem sp(s, m);
        const auto r = sp.solve_stokes(f);
        const VectorX pi_lb = sp.pressure_from_lb(r.u, f);
        const double diff = sp.pressure_l2(pi_lb - r.p);
        if (prev > 0) CHECK(diff < 0.7 * prev);
        prev = diff;
    }
}
