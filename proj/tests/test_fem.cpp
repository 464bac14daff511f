#include <doctest.h>

#include <random>

#include "surfpde/fem.hpp"
#include "surfpde/parallel.hpp"

using namespace surfpde;

namespace {

std::shared_ptr<const Surface> sphere_ptr(double r = 1.0) {
    return std::make_shared<Surface>(Surface::sphere(r));
}

std::shared_ptr<const TriMesh> sphere_mesh(int level, const char* base = "icosahedron") {
    auto s = sphere_ptr();
    return std::make_shared<TriMesh>(base_mesh(s, level, base));
}

Vec3 rotation_field(const Vec3& x) { return Vec3(0, 0, 1).cross(x); }

VecFunc tangential_gradient_func(std::shared_ptr<const Surface> s, AmbientScalar f) {
    return [s, f = std::move(f)](const Vec3& x) {
        const SurfacePoint pt = s->at(x);
        return pt.tgrad(pt.jet(f));
    };
}

}  // namespace

TEST_CASE("space dof counts on the octahedron") {
    auto mesh = std::make_shared<TriMesh>(TriMesh::octahedron(sphere_ptr()));
    CHECK(FeSpace(mesh, SpaceKind::P1Scalar).num_dofs() == 6);
    CHECK(FeSpace(mesh, SpaceKind::P2Scalar).num_dofs() == 18);  // V + E
    CHECK(FeSpace(mesh, SpaceKind::P2Vector3).num_dofs() == 54);
    // deterministic numbering: vertices first, then edges
    FeSpace p2(mesh, SpaceKind::P2Scalar);
    for (Index v = 0; v < 6; ++v) CHECK((p2.node_position(v) - mesh->vertices()[v]).norm() == 0.0);
}

TEST_CASE("mass and stiffness basics") {
    auto mesh = sphere_mesh(2);
    for (auto kind : {SpaceKind::P1Scalar, SpaceKind::P2Scalar}) {
        FeSpace sp(mesh, kind);
        const SparseMatrix M = assemble_mass(sp);
        const SparseMatrix K = assemble_stiffness_scalar(sp);
        const VectorX ones = VectorX::Ones(sp.num_dofs());
        CHECK((K.apply(ones)).cwiseAbs().maxCoeff() < 1e-12 * K.max_abs());
        CHECK(ones.dot(M.apply(ones)) == doctest::Approx(mesh->size().area_total).epsilon(1e-13));
        CHECK(M.symmetry_defect() < 1e-13 * M.max_abs());
        CHECK(K.symmetry_defect() < 1e-13 * K.max_abs());
    }
}

TEST_CASE("planar patch test: exact flat P1 stiffness") {
    std::vector<Vec3> v = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
    std::vector<std::array<Index, 3>> f = {{0, 1, 2}};
    auto mesh = std::make_shared<TriMesh>(TriMesh::build(v, f, nullptr, false));
    FeSpace sp(mesh, SpaceKind::P1Scalar);
    const SparseMatrix K = assemble_stiffness_scalar(sp);
    MatrixX ref(3, 3);
    ref << 1.0, -0.5, -0.5, -0.5, 0.5, 0.0, -0.5, 0.0, 0.5;  // flat P1 Laplacian
    for (Index r = 0; r < 3; ++r)
        for (Index k = K.row_ptr()[r]; k < K.row_ptr()[r + 1]; ++k)
            CHECK(K.values()[k] == doctest::Approx(ref(r, K.col_ind()[k])).epsilon(1e-14));
}

TEST_CASE("scalar LB spectrum on the sphere: l=1 eigenvalue 2") {
    auto mesh = sphere_mesh(3);
    FeSpace sp(mesh, SpaceKind::P1Scalar);
    const SparseMatrix M = assemble_mass(sp);
    const SparseMatrix K = assemble_stiffness_scalar(sp);
    const EigenPairs ep = eigs_smallest(K, M, 3, 1e-8, {VectorX::Ones(sp.num_dofs())});
    for (int i = 0; i < 3; ++i) CHECK(ep.values[i] == doctest::Approx(2.0).epsilon(0.02));
}

TEST_CASE("vector Bochner spectrum on the sphere: smallest tangential eigenvalue 1") {
    auto mesh = sphere_mesh(2);
    auto sp = std::make_shared<FeSpace>(mesh, SpaceKind::P2Vector3);
    TangentialReduction red(sp);
    CHECK(red.reduced_dofs() * 3 == 2 * sp->num_dofs());  // 2/3 of ambient dofs
    const SparseMatrix K = red.reduce_matrix(assemble_stiffness_vector(*sp));
    const SparseMatrix M = red.reduce_matrix(assemble_mass(*sp));
    const EigenPairs ep = eigs_smallest(K, M, 1, 1e-8);
    CHECK(ep.values[0] == doctest::Approx(1.0).epsilon(0.03));
}

TEST_CASE("no covariantly constant tangent field on the sphere") {
    auto mesh = sphere_mesh(1);
    auto sp = std::make_shared<FeSpace>(mesh, SpaceKind::P2Vector3);
    TangentialReduction red(sp);
    const SparseMatrix K = red.reduce_matrix(assemble_stiffness_vector(*sp));
    // tangential projection of a constant ambient vector has nonzero energy
    const VectorX u = red.interpolate([](const Vec3&) { return Vec3(0.3, -0.2, 0.9); });
    CHECK(u.dot(K.apply(u)) > 0.1);
}

TEST_CASE("torus tangential stiffness is positive definite away from zero") {
    auto tor = std::make_shared<Surface>(Surface::torus(2.0, 1.0));
    double prev = -1.0;
    for (int level : {0, 1}) {
        auto mesh = std::make_shared<TriMesh>(base_mesh(tor, level));
        auto sp = std::make_shared<FeSpace>(mesh, SpaceKind::P2Vector3);
        TangentialReduction red(sp);
        const SparseMatrix K = red.reduce_matrix(assemble_stiffness_vector(*sp));
        const SparseMatrix M = red.reduce_matrix(assemble_mass(*sp));
        const EigenPairs ep = eigs_smallest(K, M, 1, 1e-8);
        CHECK(ep.values[0] > 0.01);
        if (prev > 0) CHECK(std::abs(ep.values[0] - prev) < 0.5 * prev);  // stabilizing
        prev = ep.values[0];
    }
}

TEST_CASE("divergence coupling oracle on the sphere") {
    auto surf = sphere_ptr();
    auto mesh = sphere_mesh(3);
    FeSpace vel(mesh, SpaceKind::P2Vector3);
    FeSpace pres(mesh, SpaceKind::P1Scalar);
    const SparseMatrix B = assemble_divergence(vel, pres);

    // u = interpolant of grad_G x3, q = interpolant of x3:
    // -int q div u = +int grad q . u -> 2 int x3^2 = 8 pi / 3
    const VecFunc gx3 = tangential_gradient_func(surf, ambient_coordinate(2));
    const VectorX u = interpolate_vector(vel, gx3);
    const VectorX q = interpolate_scalar(pres, [](const Vec3& x) { return x[2]; });
    CHECK(q.dot(B.apply(u)) == doctest::Approx(8.0 * M_PI / 3.0).epsilon(0.02));

    // constant pressure row annihilates any velocity (exactly, by construction)
    const VectorX ones = VectorX::Ones(pres.num_dofs());
    VectorX r = B.apply_transpose(ones);
    CHECK(r.cwiseAbs().maxCoeff() < 1e-12 * B.max_abs());

    // zero velocity -> zero
    CHECK(B.apply(VectorX::Zero(vel.num_dofs())).norm() == 0.0);

    // B is the exact transpose of the gradient coupling
    const SparseMatrix C = assemble_gradient_coupling(vel, pres);
    const SparseMatrix D = SparseMatrix::sum(B, 1.0, C.transpose(), -1.0);
    CHECK(D.max_abs() < 1e-14 * std::max(1.0, B.max_abs()));
}

TEST_CASE("convection: zero transport, linearity, skew decay") {
    auto mesh = sphere_mesh(1);
    auto sp = std::make_shared<FeSpace>(mesh, SpaceKind::P2Vector3);
    Field zero{sp, VectorX::Zero(sp->num_dofs())};
    CHECK(assemble_convection(*sp, zero).max_abs() == 0.0);

    Field w{sp, interpolate_vector(*sp, rotation_field)};
    const SparseMatrix N1 = assemble_convection(*sp, w);
    Field w2{sp, 2.0 * w.coeffs};
    const SparseMatrix N2 = assemble_convection(*sp, w2);
    const SparseMatrix D = SparseMatrix::sum(N2, 1.0, N1, -2.0);
    CHECK(D.max_abs() < 1e-13 * std::max(1.0, N1.max_abs()));  // linear in w

    // non-tangential transport is rejected
    Field bad{sp, interpolate_vector(*sp, [](const Vec3& x) { return x; })};
    CHECK_THROWS_AS(assemble_convection(*sp, bad), ConfigError);

    // the rotation field's interpolant is exact (linear ambient extension) and
    // the projected form is pointwise skew on it: machine zero
    {
        auto m = sphere_mesh(2);
        auto s = std::make_shared<FeSpace>(m, SpaceKind::P2Vector3);
        Field wf{s, interpolate_vector(*s, rotation_field)};
        const SparseMatrix N = assemble_convection(*s, wf);
        const SparseMatrix M = assemble_mass(*s);
        const double u2 = wf.coeffs.dot(M.apply(wf.coeffs));
        CHECK(std::abs(wf.coeffs.dot(N.apply(wf.coeffs))) / u2 < 1e-13);
    }

    // skew test with a curved div-free field (l=3 curl harmonic, not exactly
    // representable in P2): the identity int (grad u) w . u = 0 is broken only
    // by interpolation/quadrature error, O(h^2)
    auto surf = sphere_ptr();
    const VecFunc curl3 = [surf](const Vec3& x) {
        const SurfacePoint pt = surf->at(x);
        return pt.nu().cross(pt.tgrad(pt.jet(ambient_monomial(1, 1, 1)))).eval();
    };
    double prev = -1.0;
    for (int level : {2, 3, 4}) {
        auto m = sphere_mesh(level);
        auto s = std::make_shared<FeSpace>(m, SpaceKind::P2Vector3);
        Field wf{s, interpolate_vector(*s, curl3)};
        const SparseMatrix N = assemble_convection(*s, wf);
        const SparseMatrix M = assemble_mass(*s);
        const double u2 = wf.coeffs.dot(M.apply(wf.coeffs));
        const double skew = std::abs(wf.coeffs.dot(N.apply(wf.coeffs))) / u2;
        if (prev > 0) CHECK(skew < 0.5 * prev);
        prev = skew;
    }
    CHECK(prev < 1e-4);
}

TEST_CASE("curvature terms") {
    // sphere: the M-shift mass equals the tangentially-restricted vector mass
    auto mesh = sphere_mesh(1);
    FeSpace sp(mesh, SpaceKind::P2Vector3);
    const SparseMatrix MM = assemble_curvature_term(sp, CurvatureTerm::MShift);
    const SparseMatrix Mv = assemble_mass(sp);
    const SparseMatrix Pen = assemble_normal_penalty(sp);
    const SparseMatrix Pmass = SparseMatrix::sum(Mv, 1.0, Pen, -1.0);  // int (P u).v
    const SparseMatrix D = SparseMatrix::sum(MM, 1.0, Pmass, -1.0);
    CHECK(D.max_abs() < 1e-12 * Mv.max_abs());
    CHECK(MM.symmetry_defect() < 1e-13 * MM.max_abs());

    // flat patch: M term vanishes
    std::vector<Vec3> v = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
    std::vector<std::array<Index, 3>> f = {{0, 1, 2}};
    auto flat = std::make_shared<TriMesh>(TriMesh::build(v, f, nullptr, false));
    FeSpace fsp(flat, SpaceKind::P2Vector3);
    CHECK(assemble_curvature_term(fsp, CurvatureTerm::MShift).max_abs() == 0.0);

    // grad-div nearly annihilates the div-free rotation field, improving with h
    double prev = -1.0;
    for (int level : {1, 2}) {
        auto m = sphere_mesh(level);
        auto s = std::make_shared<FeSpace>(m, SpaceKind::P2Vector3);
        const SparseMatrix GD = assemble_curvature_term(*s, CurvatureTerm::GradDiv);
        const VectorX u = interpolate_vector(*s, rotation_field);
        const double e = u.dot(GD.apply(u));
        CHECK(e >= 0.0);
        if (prev > 0) CHECK(e < prev);
        prev = e;
    }
    CHECK(prev < 1e-3);
}

TEST_CASE("weak commutator identity holds discretely at O(h)") {
    // int P div grad v . grad phi = int grad div v . grad phi + int M v . grad phi
    auto surf = sphere_ptr();
    const AmbientScalar phi = ambient_monomial(1, 0, 1);  // x1 x3
    AmbientVector qv;
    qv.comp = {ambient_monomial(0, 1, 0), ambient_monomial(0, 0, 2), ambient_monomial(1, 0, 0)};
    double prev = -1.0;
    for (int level : {1, 2, 3}) {
        auto mesh = sphere_mesh(level);
        auto sp = std::make_shared<FeSpace>(mesh, SpaceKind::P2Vector3);
        const SparseMatrix KB = assemble_stiffness_vector(*sp);
        const SparseMatrix GD = assemble_curvature_term(*sp, CurvatureTerm::GradDiv);
        const SparseMatrix MM = assemble_curvature_term(*sp, CurvatureTerm::MShift);
        const VectorX v = interpolate_vector(*sp, [&](const Vec3& x) {
            const SurfacePoint pt = surf->at(x);
            return pt.value(pt.tangential_jet(qv));
        });
        const VectorX w = interpolate_vector(*sp, tangential_gradient_func(surf, phi));
        const double lhs = -v.dot(KB.apply(w));
        const double rhs = -v.dot(GD.apply(w)) + v.dot(MM.apply(w));
        const double scale = std::abs(lhs) + std::abs(v.dot(GD.apply(w))) + std::abs(v.dot(MM.apply(w)));
        const double resid = std::abs(lhs - rhs) / std::max(scale, 1e-14);
        if (prev > 0) CHECK(resid < 0.75 * prev);
        prev = resid;
    }
    CHECK(prev < 0.02);
}

TEST_CASE("Bochner vs componentwise Laplace-Beltrami weak relation at O(h)") {
    // int grad_G u : grad_G (P v) = sum_i int grad u_i . grad v_i
    //   - int (B u).(B v) - int (2 B : grad_M u + div_G B . u)(v . nu)
    auto surf = sphere_ptr();
    AmbientVector qu, qv;
    qu.comp = {ambient_monomial(0, 0, 1), ambient_monomial(1, 1, 0), ambient_monomial(0, 1, 0)};
    qv.comp = {ambient_monomial(1, 0, 0), ambient_monomial(0, 0, 1), ambient_monomial(2, 0, 0)};
    double prev = -1.0;
    for (int level : {1, 2, 3}) {
        auto mesh = sphere_mesh(level);
        auto sp = std::make_shared<FeSpace>(mesh, SpaceKind::P2Vector3);
        const SparseMatrix KB = assemble_stiffness_vector(*sp);
        const SparseMatrix KC = assemble_componentwise_stiffness(*sp);
        const SparseMatrix BB = assemble_curvature_term(*sp, CurvatureTerm::BSquared);
        const VectorX u = interpolate_vector(*sp, [&](const Vec3& x) {
            const SurfacePoint pt = surf->at(x);
            return pt.value(pt.tangential_jet(qu));
        });
        const VectorX v = interpolate_vector(*sp, [&](const Vec3& x) {
            return Vec3(qv.comp[0].value(x), qv.comp[1].value(x), qv.comp[2].value(x));
        });
        const VectorX pv = interpolate_vector(*sp, [&](const Vec3& x) {
            const SurfacePoint pt = surf->at(x);
            return (pt.P() * pt.value(pt.jet(qv))).eval();
        });
        // normal-part pairing by direct quadrature
        double npair = 0.0;
        {
            const auto& quad = mesh->quadrature(sp->quad_order());
            for (Index t = 0; t < mesh->num_triangles(); ++t) {
                const auto& tr = mesh->triangles()[t];
                const Vec3& x0 = mesh->vertices()[tr[0]];
                Eigen::Matrix<double, 3, 2> G;
                G.col(0) = mesh->vertices()[tr[1]] - x0;
                G.col(1) = mesh->vertices()[tr[2]] - x0;
                const Eigen::Matrix<double, 3, 2> T = G * (G.transpose() * G).inverse();
                for (size_t q = 0; q < quad[t].size(); ++q) {
                    const auto& qp = quad[t][q];
                    Mat3 gradMu = Mat3::Zero();
                    Vec3 uq = Vec3::Zero(), vq = Vec3::Zero();
                    for (int a = 0; a < sp->nodes_per_element(); ++a) {
                        const Index n = sp->node(t, a);
                        const Vec3 cu(u[3 * n], u[3 * n + 1], u[3 * n + 2]);
                        const Vec3 cv(v[3 * n], v[3 * n + 1], v[3 * n + 2]);
                        const Vec3 g = T * sp->basis_ref_gradients()[q][a];
                        gradMu += cu * g.transpose();
                        uq += sp->basis_values()[q][a] * cu;
                        vq += sp->basis_values()[q][a] * cv;
                    }
                    const SurfacePoint pt = surf->at(qp.x_lift);
                    const double scalar = 2.0 * (pt.B().array() * gradMu.array()).sum() +
                                          pt.div_B().dot(uq);
                    npair += qp.w * scalar * (vq.dot(qp.nu));
                }
            }
        }
        const double lhs = u.dot(KB.apply(pv));
        const double rhs = u.dot(KC.apply(v)) - u.dot(BB.apply(v)) - npair;
        const double scale =
            std::abs(u.dot(KC.apply(v))) + std::abs(u.dot(BB.apply(v))) + std::abs(npair) + 1e-14;
        const double resid = std::abs(lhs - rhs) / scale;
        if (prev > 0) CHECK(resid < 0.75 * prev);
        prev = resid;
    }
    CHECK(prev < 0.05);
}

TEST_CASE("interpolation error of smooth fields") {
    auto surf = sphere_ptr();
    auto mesh = sphere_mesh(3);
    FeSpace sp(mesh, SpaceKind::P2Scalar);
    const VectorX c = interpolate_scalar(sp, [](const Vec3& x) { return x[2]; });
    const auto err = scalar_error(sp, c, [](const Vec3& x) { return x[2]; },
                                  tangential_gradient_func(surf, ambient_coordinate(2)));
    CHECK(err.l2 < 2e-4);
    CHECK(err.h1 < 2e-2);
}

TEST_CASE("mean-zero machinery") {
    auto mesh = sphere_mesh(2);
    FeSpace sp(mesh, SpaceKind::P1Scalar);
    const VectorX m = integral_vector(sp);
    CHECK(m.sum() == doctest::Approx(mesh->size().area_total).epsilon(1e-13));
    const SparseMatrix K = assemble_stiffness_scalar(sp);
    const SparseMatrix Kb = bordered_with_mean_constraint(K, m);
    CHECK(Kb.rows() == K.rows() + 1);
    CHECK(Kb.symmetry_defect() < 1e-13 * Kb.max_abs());
    // the bordered system pins the constant: solve with f mean-zero
    const VectorX f = assemble_load_scalar(sp, [](const Vec3& x) { return 2.0 * x[2]; });
    VectorX rhs(Kb.rows());
    rhs.head(K.rows()) = f;
    rhs[K.rows()] = 0.0;
    VectorX x;
    minres_solve(Kb, rhs, x, {.tol = 1e-12, .maxit = 4000});
    CHECK(std::abs(m.dot(x.head(K.rows()))) < 1e-9);
}

TEST_CASE("assembly is deterministic across thread counts") {
    auto mesh = sphere_mesh(2);
    FeSpace sp(mesh, SpaceKind::P2Vector3);
    set_num_threads(1);
    const SparseMatrix A1 = assemble_stiffness_vector(sp);
    set_num_threads(4);
    const SparseMatrix A4 = assemble_stiffness_vector(sp);
    set_num_threads(1);
    REQUIRE(A1.nnz() == A4.nnz());
    for (Index k = 0; k < A1.nnz(); ++k) CHECK(A1.values()[k] == A4.values()[k]);
}
