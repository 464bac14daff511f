#include "surfpde/fem.hpp"

#include <cmath>

#include "surfpde/parallel.hpp"

namespace surfpde {

bool is_vector_kind(SpaceKind k) { return k == SpaceKind::P1Vector3 || k == SpaceKind::P2Vector3; }
int degree_of(SpaceKind k) {
    return (k == SpaceKind::P1Scalar || k == SpaceKind::P1Vector3) ? 1 : 2;
}

// ---------------------------------------------------------------------------
// reference bases

namespace {

void p1_basis(double l0, double l1, double l2, std::vector<double>& val, std::vector<Vec2>& grad) {
    val = {l0, l1, l2};
    grad = {Vec2(-1, -1), Vec2(1, 0), Vec2(0, 1)};
}

void p2_basis(double l0, double l1, double l2, std::vector<double>& val, std::vector<Vec2>& grad) {
    const Vec2 dl[3] = {Vec2(-1, -1), Vec2(1, 0), Vec2(0, 1)};
    const double l[3] = {l0, l1, l2};
    val.resize(6);
    grad.resize(6);
    for (int i = 0; i < 3; ++i) {
        val[i] = l[i] * (2 * l[i] - 1);
        grad[i] = (4 * l[i] - 1) * dl[i];
    }
    for (int k = 0; k < 3; ++k) {  // edge node k sits opposite vertex k
        const int a = (k + 1) % 3, b = (k + 2) % 3;
        val[3 + k] = 4 * l[a] * l[b];
        grad[3 + k] = 4 * (l[a] * dl[b] + l[b] * dl[a]);
    }
}

}  // namespace

FeSpace::FeSpace(std::shared_ptr<const TriMesh> mesh, SpaceKind kind, int quad_order)
    : mesh_(std::move(mesh)), kind_(kind), quad_order_(quad_order) {
    const TriMesh& m = *mesh_;
    if (degree() == 1) {
        num_nodes_ = m.num_vertices();
        node_pos_ = m.vertices();
    } else {
        num_nodes_ = m.num_vertices() + m.num_edges();
        node_pos_ = m.vertices();
        node_pos_.reserve(num_nodes_);
        for (const auto& e : m.edges())
            node_pos_.push_back(0.5 * (m.vertices()[e[0]] + m.vertices()[e[1]]));
    }
    node_lift_ = node_pos_;
    if (m.surface() && m.surface()->analytic())
        for (auto& x : node_lift_) x = m.surface()->closest_point(x);

    const TriangleRule& rule = triangle_rule(quad_order_);
    bas_val_.resize(rule.bary.size());
    bas_grad_.resize(rule.bary.size());
    for (size_t q = 0; q < rule.bary.size(); ++q) {
        const auto& b = rule.bary[q];
        if (degree() == 1)
            p1_basis(b[0], b[1], b[2], bas_val_[q], bas_grad_[q]);
        else
            p2_basis(b[0], b[1], b[2], bas_val_[q], bas_grad_[q]);
    }
}

Index FeSpace::node(Index element, int local) const {
    if (local < 3) return mesh_->triangles()[element][local];
    return mesh_->num_vertices() + mesh_->triangle_edges()[element][local - 3];
}

const std::vector<NodeFrame>& FeSpace::frames() const {
    if (!frames_.empty()) return frames_;
    if (!is_vector()) throw ConfigError("frames are defined for vector spaces only");
    const auto& surf = mesh_->surface();
    if (!surf || !surf->analytic())
        throw ConfigError("tangent frames need an analytic surface; use the penalty constraint");
    frames_.resize(num_nodes_);
    for (Index n = 0; n < num_nodes_; ++n) {
        const Vec3 nu = surf->normal(node_lift_[n]);
        int k = 0;
        for (int i = 1; i < 3; ++i)
            if (std::abs(nu[i]) < std::abs(nu[k])) k = i;
        Vec3 t1 = Vec3::Unit(k) - nu[k] * nu;
        t1.normalize();
        const Vec3 t2 = nu.cross(t1);
        frames_[n] = {t1, t2, nu};
    }
    return frames_;
}

// ---------------------------------------------------------------------------
// element loop core

namespace {

struct ElementData {
    std::vector<Index> nodes;                 // nb scalar node ids
    std::vector<std::vector<Vec3>> grads;     // [qp][local]: P-projected surface gradients
};

// Projected basis gradients on one triangle: G_h phi = P(x_q) * in-plane grad.
void element_gradients(const FeSpace& space, Index t, const std::vector<QuadPoint>& qps,
                       ElementData& ed) {
    const TriMesh& m = space.mesh();
    const auto& tr = m.triangles()[t];
    const Vec3& v0 = m.vertices()[tr[0]];
    Eigen::Matrix<double, 3, 2> G;
    G.col(0) = m.vertices()[tr[1]] - v0;
    G.col(1) = m.vertices()[tr[2]] - v0;
    const Eigen::Matrix<double, 3, 2> T = G * (G.transpose() * G).inverse();

    const int nb = space.nodes_per_element();
    ed.nodes.resize(nb);
    for (int a = 0; a < nb; ++a) ed.nodes[a] = space.node(t, a);
    ed.grads.assign(qps.size(), std::vector<Vec3>(nb));
    for (size_t q = 0; q < qps.size(); ++q) {
        const Mat3 P = qps[q].P();
        for (int a = 0; a < nb; ++a) ed.grads[q][a] = P * (T * space.basis_ref_gradients()[q][a]);
    }
}

// Fills `block` (row-major, size^2) per element; then merged in element order
// so results are bitwise independent of the worker count.
template <typename Filler>
SparseMatrix assemble_blocks(const FeSpace& row_space, const FeSpace& col_space, Index block_rows,
                             Index block_cols, bool symmetric, Filler&& fill) {
    const TriMesh& m = row_space.mesh();
    const auto& quad = m.quadrature(row_space.quad_order());
    const Index ne = m.num_triangles();
    std::vector<double> blocks(static_cast<size_t>(ne) * block_rows * block_cols, 0.0);
    std::vector<std::vector<Index>> rdofs(ne), cdofs(ne);

    parallel_for(ne, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t t = lo; t < hi; ++t)
            fill(static_cast<Index>(t), quad[t], &blocks[static_cast<size_t>(t) * block_rows * block_cols],
                 rdofs[t], cdofs[t]);
    });

    std::vector<Triplet> trip;
    trip.reserve(blocks.size());
    for (Index t = 0; t < ne; ++t) {
        const double* b = &blocks[static_cast<size_t>(t) * block_rows * block_cols];
        for (Index i = 0; i < static_cast<Index>(rdofs[t].size()); ++i)
            for (Index j = 0; j < static_cast<Index>(cdofs[t].size()); ++j) {
                const double v = b[i * block_cols + j];
                if (v != 0.0) trip.push_back({rdofs[t][i], cdofs[t][j], v});
            }
    }
    return SparseMatrix::from_triplets(row_space.num_dofs(), col_space.num_dofs(), std::move(trip),
                                       symmetric);
}

std::vector<Index> scalar_dofs(const ElementData& ed) { return ed.nodes; }

std::vector<Index> vector_dofs(const ElementData& ed) {
    std::vector<Index> d(3 * ed.nodes.size());
    for (size_t a = 0; a < ed.nodes.size(); ++a)
        for (int i = 0; i < 3; ++i) d[3 * a + i] = 3 * ed.nodes[a] + i;
    return d;
}

}  // namespace

// ---------------------------------------------------------------------------
// concrete assemblers

SparseMatrix assemble_mass(const FeSpace& space) {
    const int nb = space.nodes_per_element();
    if (!space.is_vector()) {
        return assemble_blocks(space, space, nb, nb, true,
                               [&](Index t, const std::vector<QuadPoint>& qps, double* blk,
                                   std::vector<Index>& rd, std::vector<Index>& cd) {
                                   ElementData ed;
                                   ed.nodes.resize(nb);
                                   for (int a = 0; a < nb; ++a) ed.nodes[a] = space.node(t, a);
                                   const auto& bv = space.basis_values();
                                   for (size_t q = 0; q < qps.size(); ++q)
                                       for (int a = 0; a < nb; ++a)
                                           for (int b = 0; b < nb; ++b)
                                               blk[a * nb + b] += qps[q].w * bv[q][a] * bv[q][b];
                                   rd = cd = ed.nodes;
                               });
    }
    const int n = 3 * nb;
    return assemble_blocks(space, space, n, n, true,
                           [&](Index t, const std::vector<QuadPoint>& qps, double* blk,
                               std::vector<Index>& rd, std::vector<Index>& cd) {
                               ElementData ed;
                               ed.nodes.resize(nb);
                               for (int a = 0; a < nb; ++a) ed.nodes[a] = space.node(t, a);
                               const auto& bv = space.basis_values();
                               for (size_t q = 0; q < qps.size(); ++q)
                                   for (int a = 0; a < nb; ++a)
                                       for (int b = 0; b < nb; ++b) {
                                           const double v = qps[q].w * bv[q][a] * bv[q][b];
                                           for (int i = 0; i < 3; ++i)
                                               blk[(3 * a + i) * n + (3 * b + i)] += v;
                                       }
                               rd = cd = vector_dofs(ed);
                           });
}

SparseMatrix assemble_stiffness_scalar(const FeSpace& space) {
    const int nb = space.nodes_per_element();
    return assemble_blocks(space, space, nb, nb, true,
                           [&](Index t, const std::vector<QuadPoint>& qps, double* blk,
                               std::vector<Index>& rd, std::vector<Index>& cd) {
                               ElementData ed;
                               element_gradients(space, t, qps, ed);
                               for (size_t q = 0; q < qps.size(); ++q)
                                   for (int a = 0; a < nb; ++a)
                                       for (int b = 0; b < nb; ++b)
                                           blk[a * nb + b] +=
                                               qps[q].w * ed.grads[q][a].dot(ed.grads[q][b]);
                               rd = cd = scalar_dofs(ed);
                           });
}

namespace {

// Vector forms that reduce to  w * coeff(i,j(q)) * s_ab(q)  where s_ab couples
// the scalar factors; covers the Bochner stiffness, componentwise stiffness,
// curvature terms and the normal penalty.
template <typename Coupler>
SparseMatrix assemble_vector_form(const FeSpace& space, bool symmetric, Coupler&& couple) {
    const int nb = space.nodes_per_element();
    const int n = 3 * nb;
    return assemble_blocks(
        space, space, n, n, symmetric,
        [&](Index t, const std::vector<QuadPoint>& qps, double* blk, std::vector<Index>& rd,
            std::vector<Index>& cd) {
            ElementData ed;
            element_gradients(space, t, qps, ed);
            const auto& bv = space.basis_values();
            Mat3 C;
            for (size_t q = 0; q < qps.size(); ++q)
                for (int a = 0; a < nb; ++a)
                    for (int b = 0; b < nb; ++b) {
                        // C(i,j) couples component i of the test function (node a)
                        // with component j of the trial function (node b)
                        couple(qps[q], bv[q][a], bv[q][b], ed.grads[q][a], ed.grads[q][b], C);
                        for (int i = 0; i < 3; ++i)
                            for (int j = 0; j < 3; ++j)
                                blk[(3 * a + i) * n + (3 * b + j)] += qps[q].w * C(i, j);
                    }
            rd = cd = vector_dofs(ed);
        });
}

}  // namespace

SparseMatrix assemble_stiffness_vector(const FeSpace& space) {
    return assemble_vector_form(space, true,
                                [](const QuadPoint& qp, double, double, const Vec3& ga,
                                   const Vec3& gb, Mat3& C) { C = qp.P() * (ga.dot(gb)); });
}

SparseMatrix assemble_componentwise_stiffness(const FeSpace& space) {
    return assemble_vector_form(space, true,
                                [](const QuadPoint&, double, double, const Vec3& ga, const Vec3& gb,
                                   Mat3& C) { C = Mat3::Identity() * ga.dot(gb); });
}

SparseMatrix assemble_curvature_term(const FeSpace& space, CurvatureTerm which) {
    switch (which) {
        case CurvatureTerm::MShift:
            return assemble_vector_form(space, true,
                                        [](const QuadPoint& qp, double va, double vb, const Vec3&,
                                           const Vec3&, Mat3& C) { C = qp.M() * (va * vb); });
        case CurvatureTerm::BSquared:
            return assemble_vector_form(space, true,
                                        [](const QuadPoint& qp, double va, double vb, const Vec3&,
                                           const Vec3&, Mat3& C) { C = qp.B * qp.B * (va * vb); });
        case CurvatureTerm::GradDiv:
            return assemble_vector_form(space, true,
                                        [](const QuadPoint&, double, double, const Vec3& ga,
                                           const Vec3& gb, Mat3& C) { C = ga * gb.transpose(); });
    }
    throw ConfigError("unknown curvature term");
}

SparseMatrix assemble_normal_penalty(const FeSpace& space) {
    return assemble_vector_form(space, true,
                                [](const QuadPoint& qp, double va, double vb, const Vec3&,
                                   const Vec3&, Mat3& C) {
                                    C = (qp.nu * qp.nu.transpose()) * (va * vb);
                                });
}

SparseMatrix assemble_divergence(const FeSpace& velocity, const FeSpace& pressure) {
    if (!velocity.is_vector() || pressure.is_vector())
        throw ConfigError("divergence expects (vector velocity, scalar pressure)");
    if (velocity.mesh_ptr() != pressure.mesh_ptr())
        throw ConfigError("divergence: spaces live on different meshes");
    if (velocity.quad_order() != pressure.quad_order())
        throw ConfigError("divergence: spaces use different quadrature orders");
    const int nbu = velocity.nodes_per_element(), nbp = pressure.nodes_per_element();
    const Index n = 3 * nbu;
    return assemble_blocks(pressure, velocity, nbp, n, false,
                           [&](Index t, const std::vector<QuadPoint>& qps, double* blk,
                               std::vector<Index>& rd, std::vector<Index>& cd) {
                               ElementData edp;
                               element_gradients(pressure, t, qps, edp);
                               ElementData edu;
                               edu.nodes.resize(nbu);
                               for (int a = 0; a < nbu; ++a) edu.nodes[a] = velocity.node(t, a);
                               const auto& uv = velocity.basis_values();
                               for (size_t q = 0; q < qps.size(); ++q)
                                   for (int p = 0; p < nbp; ++p)
                                       for (int a = 0; a < nbu; ++a)
                                           for (int i = 0; i < 3; ++i)
                                               blk[p * n + 3 * a + i] +=
                                                   qps[q].w * uv[q][a] * edp.grads[q][p][i];
                               rd = edp.nodes;
                               cd = vector_dofs(edu);
                           });
}

SparseMatrix assemble_gradient_coupling(const FeSpace& velocity, const FeSpace& pressure) {
    if (velocity.mesh_ptr() != pressure.mesh_ptr() ||
        velocity.quad_order() != pressure.quad_order())
        throw ConfigError("gradient coupling: spaces must share mesh and quadrature order");
    const int nbu = velocity.nodes_per_element(), nbp = pressure.nodes_per_element();
    const Index n = 3 * nbu;
    return assemble_blocks(velocity, pressure, n, nbp, false,
                           [&](Index t, const std::vector<QuadPoint>& qps, double* blk,
                               std::vector<Index>& rd, std::vector<Index>& cd) {
                               ElementData edp;
                               element_gradients(pressure, t, qps, edp);
                               ElementData edu;
                               edu.nodes.resize(nbu);
                               for (int a = 0; a < nbu; ++a) edu.nodes[a] = velocity.node(t, a);
                               const auto& uv = velocity.basis_values();
                               for (size_t q = 0; q < qps.size(); ++q)
                                   for (int a = 0; a < nbu; ++a)
                                       for (int p = 0; p < nbp; ++p)
                                           for (int i = 0; i < 3; ++i)
                                               blk[(3 * a + i) * nbp + p] +=
                                                   qps[q].w * uv[q][a] * edp.grads[q][p][i];
                               rd = vector_dofs(edu);
                               cd = edp.nodes;
                           });
}

namespace {

Vec3 eval_vector_field(const Field& w, Index t, const std::vector<double>& bval) {
    const FeSpace& s = *w.space;
    Vec3 v = Vec3::Zero();
    for (int a = 0; a < s.nodes_per_element(); ++a) {
        const Index n = s.node(t, a);
        v += bval[a] * Vec3(w.coeffs[3 * n], w.coeffs[3 * n + 1], w.coeffs[3 * n + 2]);
    }
    return v;
}

}  // namespace

SparseMatrix assemble_convection(const FeSpace& velocity, const Field& w) {
    if (!w.space || w.space->mesh_ptr() != velocity.mesh_ptr() ||
        w.space->quad_order() != velocity.quad_order())
        throw ConfigError("convection: transport field lives on a different mesh or rule");
    // interpolants of tangential fields are tangential at nodes only; the
    // quadrature-point defect scales with h^2
    const double h = velocity.mesh().size().h_max;
    const double tang = max_normal_component(*w.space, w.coeffs);
    const double scale = w.coeffs.size() ? w.coeffs.cwiseAbs().maxCoeff() : 0.0;
    if (tang > std::max(1e-10, 2.0 * h * h) * std::max(1.0, scale))
        throw ConfigError("convection: transport field is not tangential (max |w.nu| = " +
                          std::to_string(tang) + ")");
    const int nb = velocity.nodes_per_element();
    const int n = 3 * nb;
    return assemble_blocks(
        velocity, velocity, n, n, false,
        [&](Index t, const std::vector<QuadPoint>& qps, double* blk, std::vector<Index>& rd,
            std::vector<Index>& cd) {
            ElementData ed;
            element_gradients(velocity, t, qps, ed);
            const auto& bv = velocity.basis_values();
            const auto& bw = w.space->basis_values();
            for (size_t q = 0; q < qps.size(); ++q) {
                const Vec3 wq = eval_vector_field(w, t, bw[q]);
                const Mat3 P = qps[q].P();
                for (int a = 0; a < nb; ++a) {
                    const double gw = ed.grads[q][a].dot(wq);
                    for (int b = 0; b < nb; ++b) {
                        const double v = qps[q].w * gw * bv[q][b];
                        for (int i = 0; i < 3; ++i)
                            for (int j = 0; j < 3; ++j)
                                blk[(3 * b + i) * n + (3 * a + j)] += v * P(i, j);
                    }
                }
            }
            rd = cd = vector_dofs(ed);
        });
}

SparseMatrix assemble_convection_linearized(const FeSpace& velocity, const Field& u0) {
    if (!u0.space || u0.space->kind() != velocity.kind() ||
        u0.space->mesh_ptr() != velocity.mesh_ptr())
        throw ConfigError("convection linearization: state must live in the velocity space");
    const int nb = velocity.nodes_per_element();
    const int n = 3 * nb;
    return assemble_blocks(
        velocity, velocity, n, n, false,
        [&](Index t, const std::vector<QuadPoint>& qps, double* blk, std::vector<Index>& rd,
            std::vector<Index>& cd) {
            ElementData ed;
            element_gradients(velocity, t, qps, ed);
            const auto& bv = velocity.basis_values();
            for (size_t q = 0; q < qps.size(); ++q) {
                Mat3 X = Mat3::Zero();
                for (int a = 0; a < nb; ++a) {
                    const Index nn = ed.nodes[a];
                    const Vec3 ca(u0.coeffs[3 * nn], u0.coeffs[3 * nn + 1], u0.coeffs[3 * nn + 2]);
                    X += ca * ed.grads[q][a].transpose();
                }
                const Mat3 Gu = qps[q].P() * X;
                for (int b = 0; b < nb; ++b)
                    for (int c = 0; c < nb; ++c) {
                        const double v = qps[q].w * bv[q][b] * bv[q][c];
                        for (int j = 0; j < 3; ++j)
                            for (int k = 0; k < 3; ++k)
                                blk[(3 * b + j) * n + (3 * c + k)] += v * Gu(j, k);
                    }
            }
            rd = cd = vector_dofs(ed);
        });
}

// ---------------------------------------------------------------------------
// loads and functionals

VectorX assemble_load_scalar(const FeSpace& space, const ScalarFunc& f) {
    const TriMesh& m = space.mesh();
    const auto& quad = m.quadrature(space.quad_order());
    VectorX b = VectorX::Zero(space.num_dofs());
    const int nb = space.nodes_per_element();
    for (Index t = 0; t < m.num_triangles(); ++t)
        for (size_t q = 0; q < quad[t].size(); ++q) {
            const double fv = f(quad[t][q].x_lift);
            for (int a = 0; a < nb; ++a)
                b[space.node(t, a)] += quad[t][q].w * fv * space.basis_values()[q][a];
        }
    return b;
}

VectorX assemble_load_vector(const FeSpace& space, const VecFunc& f) {
    const TriMesh& m = space.mesh();
    const auto& quad = m.quadrature(space.quad_order());
    VectorX b = VectorX::Zero(space.num_dofs());
    const int nb = space.nodes_per_element();
    for (Index t = 0; t < m.num_triangles(); ++t)
        for (size_t q = 0; q < quad[t].size(); ++q) {
            const Vec3 fv = f(quad[t][q].x_lift);
            for (int a = 0; a < nb; ++a) {
                const double s = quad[t][q].w * space.basis_values()[q][a];
                const Index n = space.node(t, a);
                for (int i = 0; i < 3; ++i) b[3 * n + i] += s * fv[i];
            }
        }
    return b;
}

VectorX assemble_gradient_load(const FeSpace& scalar_space, const VecFunc& h) {
    const TriMesh& m = scalar_space.mesh();
    const auto& quad = m.quadrature(scalar_space.quad_order());
    VectorX b = VectorX::Zero(scalar_space.num_dofs());
    const int nb = scalar_space.nodes_per_element();
    for (Index t = 0; t < m.num_triangles(); ++t) {
        ElementData ed;
        element_gradients(scalar_space, t, quad[t], ed);
        for (size_t q = 0; q < quad[t].size(); ++q) {
            const Vec3 hv = h(quad[t][q].x_lift);
            for (int a = 0; a < nb; ++a) b[ed.nodes[a]] += quad[t][q].w * hv.dot(ed.grads[q][a]);
        }
    }
    return b;
}

VectorX integral_vector(const FeSpace& scalar_space) {
    return assemble_load_scalar(scalar_space, [](const Vec3&) { return 1.0; });
}

SparseMatrix bordered_with_mean_constraint(const SparseMatrix& A, const VectorX& m) {
    const Index n = A.rows();
    std::vector<Triplet> t;
    t.reserve(A.nnz() + 2 * n);
    for (Index r = 0; r < n; ++r)
        for (Index k = A.row_ptr()[r]; k < A.row_ptr()[r + 1]; ++k)
            t.push_back({r, A.col_ind()[k], A.values()[k]});
    for (Index r = 0; r < n; ++r) {
        if (m[r] == 0.0) continue;
        t.push_back({r, n, m[r]});
        t.push_back({n, r, m[r]});
    }
    return SparseMatrix::from_triplets(n + 1, n + 1, std::move(t), A.symmetric());
}

// ---------------------------------------------------------------------------
// tangential reduction

TangentialReduction::TangentialReduction(std::shared_ptr<const FeSpace> space)
    : space_(std::move(space)) {
    space_->frames();  // force construction (throws early when unavailable)
}

VectorX TangentialReduction::expand(const VectorX& reduced) const {
    const auto& fr = space_->frames();
    VectorX a = VectorX::Zero(space_->num_dofs());
    for (Index n = 0; n < space_->num_nodes(); ++n) {
        const Vec3 v = reduced[2 * n] * fr[n].t1 + reduced[2 * n + 1] * fr[n].t2;
        for (int i = 0; i < 3; ++i) a[3 * n + i] = v[i];
    }
    return a;
}

VectorX TangentialReduction::reduce(const VectorX& ambient) const {
    const auto& fr = space_->frames();
    VectorX r = VectorX::Zero(reduced_dofs());
    for (Index n = 0; n < space_->num_nodes(); ++n) {
        const Vec3 v(ambient[3 * n], ambient[3 * n + 1], ambient[3 * n + 2]);
        r[2 * n] = fr[n].t1.dot(v);
        r[2 * n + 1] = fr[n].t2.dot(v);
    }
    return r;
}

SparseMatrix TangentialReduction::reduce_matrix(const SparseMatrix& A) const {
    const auto& fr = space_->frames();
    std::vector<Triplet> t;
    t.reserve(static_cast<size_t>(A.nnz()) * 4 / 9 + 16);
    auto frame = [&](Index node, int comp, int which) {
        return which == 0 ? fr[node].t1[comp] : fr[node].t2[comp];
    };
    for (Index r = 0; r < A.rows(); ++r) {
        const Index nr = r / 3;
        const int ir = static_cast<int>(r % 3);
        for (Index k = A.row_ptr()[r]; k < A.row_ptr()[r + 1]; ++k) {
            const Index c = A.col_ind()[k];
            const Index nc = c / 3;
            const int ic = static_cast<int>(c % 3);
            const double v = A.values()[k];
            for (int a = 0; a < 2; ++a)
                for (int b = 0; b < 2; ++b)
                    t.push_back({2 * nr + a, 2 * nc + b, frame(nr, ir, a) * v * frame(nc, ic, b)});
        }
    }
    return SparseMatrix::from_triplets(reduced_dofs(), reduced_dofs(), std::move(t), A.symmetric());
}

SparseMatrix TangentialReduction::reduce_columns(const SparseMatrix& B) const {
    const auto& fr = space_->frames();
    std::vector<Triplet> t;
    t.reserve(static_cast<size_t>(B.nnz()) * 2 / 3 + 16);
    for (Index r = 0; r < B.rows(); ++r)
        for (Index k = B.row_ptr()[r]; k < B.row_ptr()[r + 1]; ++k) {
            const Index c = B.col_ind()[k];
            const Index nc = c / 3;
            const int ic = static_cast<int>(c % 3);
            const double v = B.values()[k];
            t.push_back({r, 2 * nc, v * fr[nc].t1[ic]});
            t.push_back({r, 2 * nc + 1, v * fr[nc].t2[ic]});
        }
    return SparseMatrix::from_triplets(B.rows(), reduced_dofs(), std::move(t), false);
}

VectorX TangentialReduction::interpolate(const VecFunc& u) const {
    const auto& fr = space_->frames();
    VectorX r = VectorX::Zero(reduced_dofs());
    for (Index n = 0; n < space_->num_nodes(); ++n) {
        const Vec3 v = u(space_->node_surface_position(n));
        r[2 * n] = fr[n].t1.dot(v);
        r[2 * n + 1] = fr[n].t2.dot(v);
    }
    return r;
}

// ---------------------------------------------------------------------------
// interpolation and norms

VectorX interpolate_scalar(const FeSpace& space, const ScalarFunc& f) {
    VectorX c(space.num_nodes());
    for (Index n = 0; n < space.num_nodes(); ++n) c[n] = f(space.node_surface_position(n));
    return c;
}

VectorX interpolate_vector(const FeSpace& space, const VecFunc& f) {
    VectorX c(3 * space.num_nodes());
    for (Index n = 0; n < space.num_nodes(); ++n) {
        const Vec3 v = f(space.node_surface_position(n));
        for (int i = 0; i < 3; ++i) c[3 * n + i] = v[i];
    }
    return c;
}

double integrate_field(const FeSpace& space, const VectorX& coeffs) {
    const TriMesh& m = space.mesh();
    const auto& quad = m.quadrature(space.quad_order());
    double s = 0.0;
    const int nb = space.nodes_per_element();
    for (Index t = 0; t < m.num_triangles(); ++t)
        for (size_t q = 0; q < quad[t].size(); ++q) {
            double u = 0.0;
            for (int a = 0; a < nb; ++a) u += coeffs[space.node(t, a)] * space.basis_values()[q][a];
            s += quad[t][q].w * u;
        }
    return s;
}

double max_normal_component(const FeSpace& space, const VectorX& ambient) {
    const TriMesh& m = space.mesh();
    const auto& quad = m.quadrature(space.quad_order());
    double worst = 0.0;
    for (Index t = 0; t < m.num_triangles(); ++t)
        for (size_t q = 0; q < quad[t].size(); ++q) {
            Vec3 u = Vec3::Zero();
            for (int a = 0; a < space.nodes_per_element(); ++a) {
                const Index n = space.node(t, a);
                u += space.basis_values()[q][a] *
                     Vec3(ambient[3 * n], ambient[3 * n + 1], ambient[3 * n + 2]);
            }
            worst = std::max(worst, std::abs(u.dot(quad[t][q].nu)));
        }
    return worst;
}

ErrorNorms scalar_error(const FeSpace& space, const VectorX& coeffs, const ScalarFunc& exact,
                        const VecFunc& exact_grad) {
    const TriMesh& m = space.mesh();
    const auto& quad = m.quadrature(space.quad_order());
    ErrorNorms e;
    const int nb = space.nodes_per_element();
    for (Index t = 0; t < m.num_triangles(); ++t) {
        ElementData ed;
        element_gradients(space, t, quad[t], ed);
        for (size_t q = 0; q < quad[t].size(); ++q) {
            double u = 0.0;
            Vec3 g = Vec3::Zero();
            for (int a = 0; a < nb; ++a) {
                u += coeffs[ed.nodes[a]] * space.basis_values()[q][a];
                g += coeffs[ed.nodes[a]] * ed.grads[q][a];
            }
            const double du = u - exact(quad[t][q].x_lift);
            e.l2 += quad[t][q].w * du * du;
            if (exact_grad) {
                const Vec3 dg = g - exact_grad(quad[t][q].x_lift);
                e.h1 += quad[t][q].w * dg.squaredNorm();
            }
        }
    }
    e.l2 = std::sqrt(e.l2);
    e.h1 = std::sqrt(e.h1);
    return e;
}

ErrorNorms vector_error(const FeSpace& space, const VectorX& ambient, const VecFunc& exact,
                        const MatFunc& exact_grad) {
    const TriMesh& m = space.mesh();
    const auto& quad = m.quadrature(space.quad_order());
    ErrorNorms e;
    const int nb = space.nodes_per_element();
    for (Index t = 0; t < m.num_triangles(); ++t) {
        ElementData ed;
        element_gradients(space, t, quad[t], ed);
        for (size_t q = 0; q < quad[t].size(); ++q) {
            Vec3 u = Vec3::Zero();
            Mat3 X = Mat3::Zero();
            for (int a = 0; a < nb; ++a) {
                const Index n = ed.nodes[a];
                const Vec3 ca(ambient[3 * n], ambient[3 * n + 1], ambient[3 * n + 2]);
                u += space.basis_values()[q][a] * ca;
                X += ca * ed.grads[q][a].transpose();
            }
            const Vec3 du = u - exact(quad[t][q].x_lift);
            e.l2 += quad[t][q].w * du.squaredNorm();
            if (exact_grad) {
                const Mat3 dg = quad[t][q].P() * X - exact_grad(quad[t][q].x_lift);
                e.h1 += quad[t][q].w * dg.squaredNorm();
            }
        }
    }
    e.l2 = std::sqrt(e.l2);
    e.h1 = std::sqrt(e.h1);
    return e;
}

double divergence_error(const FeSpace& space, const VectorX& ambient, const ScalarFunc& g) {
    const TriMesh& m = space.mesh();
    const auto& quad = m.quadrature(space.quad_order());
    double e = 0.0;
    const int nb = space.nodes_per_element();
    for (Index t = 0; t < m.num_triangles(); ++t) {
        ElementData ed;
        element_gradients(space, t, quad[t], ed);
        for (size_t q = 0; q < quad[t].size(); ++q) {
            double div = 0.0;
            for (int a = 0; a < nb; ++a) {
                const Index n = ed.nodes[a];
                for (int i = 0; i < 3; ++i) div += ambient[3 * n + i] * ed.grads[q][a][i];
            }
            const double d = div - (g ? g(quad[t][q].x_lift) : 0.0);
            e += quad[t][q].w * d * d;
        }
    }
    return std::sqrt(e);
}

}  // namespace surfpde
