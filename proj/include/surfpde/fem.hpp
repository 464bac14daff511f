#pragma once

#include <functional>
#include <memory>

#include "surfpde/linalg.hpp"
#include "surfpde/mesh.hpp"

namespace surfpde {

using ScalarFunc = std::function<double(const Vec3&)>;
using VecFunc = std::function<Vec3(const Vec3&)>;
using MatFunc = std::function<Mat3(const Vec3&)>;

enum class SpaceKind { P1Scalar, P2Scalar, P1Vector3, P2Vector3 };

bool is_vector_kind(SpaceKind k);
int degree_of(SpaceKind k);

/// Orthonormal tangent frame at a node; normals come from the exact surface.
struct NodeFrame {
    Vec3 t1, t2, nu;
};

/// Finite-element space descriptor on a TriMesh: node layout (vertices, then
/// edge midpoints for P2), element connectivity and quadrature order.
/// Vector spaces carry 3 interleaved ambient components per node.
class FeSpace {
public:
    FeSpace(std::shared_ptr<const TriMesh> mesh, SpaceKind kind, int quad_order = 4);

    SpaceKind kind() const { return kind_; }
    bool is_vector() const { return is_vector_kind(kind_); }
    int degree() const { return degree_of(kind_); }
    int quad_order() const { return quad_order_; }
    const TriMesh& mesh() const { return *mesh_; }
    const std::shared_ptr<const TriMesh>& mesh_ptr() const { return mesh_; }

    Index num_nodes() const { return num_nodes_; }
    Index num_dofs() const { return is_vector() ? 3 * num_nodes_ : num_nodes_; }
    int nodes_per_element() const { return degree() == 1 ? 3 : 6; }
    Index node(Index element, int local) const;
    const Vec3& node_position(Index n) const { return node_pos_[n]; }
    /// Node position lifted to the exact surface (equals node_position otherwise).
    const Vec3& node_surface_position(Index n) const { return node_lift_[n]; }

    /// Tangent frames at all nodes (vector spaces on analytic surfaces).
    const std::vector<NodeFrame>& frames() const;

    /// Basis values/reference gradients at the quadrature points of the rule.
    const std::vector<std::vector<double>>& basis_values() const { return bas_val_; }
    const std::vector<std::vector<Vec2>>& basis_ref_gradients() const { return bas_grad_; }

private:
    std::shared_ptr<const TriMesh> mesh_;
    SpaceKind kind_;
    int quad_order_;
    Index num_nodes_;
    std::vector<Vec3> node_pos_, node_lift_;
    mutable std::vector<NodeFrame> frames_;
    std::vector<std::vector<double>> bas_val_;   // [qp][local]
    std::vector<std::vector<Vec2>> bas_grad_;    // [qp][local]
};

/// Coefficients over a space; vector fields store interleaved ambient
/// components (3*node + component).
struct Field {
    std::shared_ptr<const FeSpace> space;
    VectorX coeffs;
};

// -- assemblers (ambient dofs; tangential reduction is applied afterwards) --

SparseMatrix assemble_mass(const FeSpace& space);
SparseMatrix assemble_stiffness_scalar(const FeSpace& space);
/// Bochner energy int grad_G u : grad_G v with the exact projector at the
/// quadrature points (both indices projected).
SparseMatrix assemble_stiffness_vector(const FeSpace& space);
/// Componentwise scalar stiffness of a vector space, sum_i int grad u_i . grad v_i.
SparseMatrix assemble_componentwise_stiffness(const FeSpace& space);

enum class CurvatureTerm { MShift, GradDiv, BSquared };
/// MShift: int (M u).v; GradDiv: int div_G u div_G v; BSquared: int (B u).(B v).
SparseMatrix assemble_curvature_term(const FeSpace& space, CurvatureTerm which);

/// Weak divergence coupling in the closed-surface integration-by-parts form,
/// entries int (grad_G q) . u = -(int q div_G u) for tangential u; rows =
/// pressure. Constant-pressure rows vanish identically and the matrix is the
/// exact transpose of assemble_gradient_coupling.
SparseMatrix assemble_divergence(const FeSpace& velocity, const FeSpace& pressure);
/// Gradient coupling, entries int (grad_G q) . u; rows = velocity dofs.
SparseMatrix assemble_gradient_coupling(const FeSpace& velocity, const FeSpace& pressure);

/// Oseen convection: entries int (grad_G u) w . v for a given ambient transport
/// field w (tangential up to tolerance; checked).
SparseMatrix assemble_convection(const FeSpace& velocity, const Field& w);
/// Linearization of the convection in its transport slot: int (grad_G u0) d . v.
SparseMatrix assemble_convection_linearized(const FeSpace& velocity, const Field& u0);

/// Penalty matrix int (u.nu)(v.nu); the mesh-only fallback for tangentiality.
SparseMatrix assemble_normal_penalty(const FeSpace& space);

VectorX assemble_load_scalar(const FeSpace& space, const ScalarFunc& f);
VectorX assemble_load_vector(const FeSpace& space, const VecFunc& f);
/// b_q = int h . grad_G q over a scalar space (pressure-recovery pairing).
VectorX assemble_gradient_load(const FeSpace& scalar_space, const VecFunc& h);

/// m_a = int phi_a (the mean-value functional).
VectorX integral_vector(const FeSpace& scalar_space);
/// Bordered system [[A, m],[m^T, 0]] enforcing the zero-mean constraint.
SparseMatrix bordered_with_mean_constraint(const SparseMatrix& A, const VectorX& m);

// -- tangential constraint by local-frame reduction --

class TangentialReduction {
public:
    explicit TangentialReduction(std::shared_ptr<const FeSpace> space);
    Index reduced_dofs() const { return 2 * space_->num_nodes(); }
    const FeSpace& space() const { return *space_; }

    VectorX expand(const VectorX& reduced) const;
    VectorX reduce(const VectorX& ambient) const;
    SparseMatrix reduce_matrix(const SparseMatrix& ambient) const;   // Z^T A Z
    SparseMatrix reduce_columns(const SparseMatrix& ambient) const;  // B Z
    /// Frame coefficients of the nodal interpolant of a (tangential) field.
    VectorX interpolate(const VecFunc& u) const;

private:
    std::shared_ptr<const FeSpace> space_;
};

// -- interpolation, evaluation, norms --

VectorX interpolate_scalar(const FeSpace& space, const ScalarFunc& f);
VectorX interpolate_vector(const FeSpace& space, const VecFunc& f);

double integrate_field(const FeSpace& space, const VectorX& coeffs);  // int u_h
double max_normal_component(const FeSpace& space, const VectorX& ambient);

struct ErrorNorms {
    double l2 = 0.0;
    double h1 = 0.0;  // seminorm
};
ErrorNorms scalar_error(const FeSpace& space, const VectorX& coeffs, const ScalarFunc& exact,
                        const VecFunc& exact_grad);
ErrorNorms vector_error(const FeSpace& space, const VectorX& ambient, const VecFunc& exact,
                        const MatFunc& exact_grad);
/// ||q div_G u_h - g||_{L2} style divergence residual against a scalar target.
double divergence_error(const FeSpace& space, const VectorX& ambient, const ScalarFunc& g);

}  // namespace surfpde
