#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>

#include "surfpde/fem.hpp"

namespace surfpde {

/// The three vector Laplacians; Hodge and surface diffusion differ from the
/// Bochner operator by the curvature shift M = tr(B)B - B^2 and a grad-div
/// term (-Delta_H = -Delta_B + M; -Delta_S = -Delta_B - M - grad div).
enum class OperatorVariant { Bochner, Hodge, SurfaceDiffusion };

struct SolveReport {
    bool converged = false;
    int linear_iterations = 0;
    int nonlinear_iterations = 0;
    double residual = 0.0;
    std::vector<double> contraction_ratios;
    double wall_time_seconds = 0.0;
    std::string method;
    std::string warning;
    std::map<std::string, double> metrics;
};

struct ScalarSolve {
    std::shared_ptr<const FeSpace> space;
    VectorX u;
    SolveReport report;
};

struct VectorSolve {
    std::shared_ptr<const FeSpace> space;
    VectorX u_tangential;  // reduced (frame) coefficients
    VectorX u;             // ambient coefficients
    SolveReport report;
};

struct BiharmonicSolve {
    std::shared_ptr<const FeSpace> space;
    VectorX u, w;  // w is the auxiliary Laplacian variable (ambient for vector)
    SolveReport report;
};

struct LaplaceBeltramiOptions {
    int degree = 1;
    int quad_order = 4;
    double tol = 1e-10;
    int maxit = 20000;
};

/// Scalar Laplace-Beltrami Poisson problem with zero-mean data and solution.
ScalarSolve solve_laplace_beltrami(std::shared_ptr<const Surface> surface,
                                   std::shared_ptr<const TriMesh> mesh, const ScalarFunc& f,
                                   const LaplaceBeltramiOptions& opts = {});

struct VectorLaplaceOptions {
    OperatorVariant variant = OperatorVariant::Bochner;
    int degree = 2;
    int quad_order = 4;
    double tol = 1e-10;
    int maxit = 20000;
    /// Reduced-coordinate near-kernel modes to deflate (e.g. Killing fields
    /// for the surface-diffusion operator on the sphere).
    std::vector<VectorX> deflation;
};

VectorSolve solve_vector_laplace(std::shared_ptr<const Surface> surface,
                                 std::shared_ptr<const TriMesh> mesh, const VecFunc& f,
                                 const VectorLaplaceOptions& opts = {});

BiharmonicSolve solve_biharmonic_scalar(std::shared_ptr<const Surface> surface,
                                        std::shared_ptr<const TriMesh> mesh, const ScalarFunc& f,
                                        const LaplaceBeltramiOptions& opts = {});
BiharmonicSolve solve_biharmonic_vector(std::shared_ptr<const Surface> surface,
                                        std::shared_ptr<const TriMesh> mesh, const VecFunc& f,
                                        double tol = 1e-10);

enum class NSMethod { Picard, Newton };
struct NSOptions {
    NSMethod method = NSMethod::Picard;
    double damping = 1.0;
    double tol_nl = 1e-10;
    int max_nl = 50;
    double tol_linear = 1e-11;
};

/// Assembled Taylor-Hood (P2 tangential velocity / P1 mean-zero pressure)
/// discretization of the tangent Stokes family on one mesh. All velocity
/// vectors below are reduced (frame) coefficients unless named "ambient".
class StokesProblem {
public:
    StokesProblem(std::shared_ptr<const Surface> surface, std::shared_ptr<const TriMesh> mesh,
                  int quad_order = 4, SpaceKind velocity_kind = SpaceKind::P2Vector3);

    const std::shared_ptr<const Surface>& surface() const { return surface_; }
    const std::shared_ptr<const TriMesh>& mesh() const { return mesh_; }
    const std::shared_ptr<const FeSpace>& velocity_space() const { return vel_; }
    const std::shared_ptr<const FeSpace>& pressure_space() const { return pres_; }
    const TangentialReduction& reduction() const { return *red_; }

    const SparseMatrix& K() const { return K_; }    // Bochner stiffness, reduced
    const SparseMatrix& M() const { return Mt_; }   // velocity mass, reduced
    const SparseMatrix& B() const { return B_; }    // weak divergence, np x nut
    const SparseMatrix& Mp() const { return Mp_; }  // pressure mass

    Index nu() const { return K_.rows(); }
    Index np() const { return B_.rows(); }

    double h1_norm(const VectorX& u_t) const;
    double l2_norm(const VectorX& u_t) const;
    double pressure_l2(const VectorX& p) const;
    VectorX to_mean_zero_pressure(VectorX p) const;
    VectorX interpolate_velocity(const VecFunc& u) const { return red_->interpolate(u); }

    struct Result {
        VectorX u;  // reduced velocity
        VectorX p;  // mean-zero pressure
        SolveReport report;
    };

    /// Stationary Stokes: saddle MINRES with an IC(0)/pressure-mass block
    /// preconditioner. g enters the constraint as -(g, q).
    Result solve_stokes(const VecFunc& f, const ScalarFunc& g = {}, double tol = 1e-11) const;
    Result solve_stokes_rhs(const VectorX& f_t, const VectorX& g_rhs, double tol = 1e-11) const;

    /// Oseen step: transport field w (reduced); GMRES with the Stokes block
    /// preconditioner. Non-div-free w is Leray-projected with a warning.
    Result solve_oseen(const VectorX& w, const VecFunc& f, const ScalarFunc& g = {},
                       double tol = 1e-11) const;
    Result solve_oseen_rhs(const VectorX& w, const VectorX& f_t, const VectorX& g_rhs,
                           double tol = 1e-11, bool project_w = true) const;

    /// Stationary Navier-Stokes by Picard (Oseen fixed-point) or Newton.
    /// Reports per-step contraction ratios |u_{k+1}-u_k|_1 / |u_k-u_{k-1}|_1.
    Result solve_navier_stokes(const VecFunc& f, const ScalarFunc& g = {},
                               const NSOptions& opts = {}) const;

    struct Decomposition {
        VectorX divfree;    // h
        VectorX gradient;   // grad_G phi, as a velocity-space field
        VectorX potential;  // phi, mean-zero
        double orthogonality;  // <h, grad phi>_M
    };
    /// Discrete Helmholtz-Weyl splitting: phi solves the mass-weighted Schur
    /// problem (B M^-1 B^T) phi = B v, the discrete form of
    /// Delta_G phi = div_G v; reconstruction and L2-orthogonality hold to
    /// solver tolerance.
    Decomposition helmholtz_decompose(const VectorX& v, double tol = 1e-12) const;
    VectorX leray_project(const VectorX& v, double tol = 1e-12) const;

    /// Stokes-operator eigenpairs through shift-invert Lanczos with inner
    /// saddle solves; eigenvectors are discretely divergence-free.
    const EigenPairs& stokes_eigs(int k, double tol = 1e-8) const;
    /// Spectral fractional power on the truncated eigenspan; the dropped
    /// L2-mass fraction of v is reported through *remainder.
    VectorX fractional_stokes_apply(double alpha, const VectorX& v, int k_trunc,
                                    double* remainder = nullptr) const;

    struct GalerkinResult {
        VectorX coefficients;
        VectorX u;
        VectorX p;
        SolveReport report;
    };
    /// Galerkin solution of incompressible NS in the span of the first
    /// n_modes Stokes eigenfields; Newton with line search on the quadratic
    /// system, pressure recovered by the Laplace-Beltrami solve.
    GalerkinResult ns_galerkin(const VecFunc& f, int n_modes, double tol = 1e-12) const;

    /// Pressure recovered from the decoupled Laplace-Beltrami problem with
    /// right-hand side f + grad g + M u (minus (grad u)u when with_convection).
    VectorX pressure_from_lb(const VectorX& u, const VecFunc& f, const VecFunc& grad_g = {},
                             bool with_convection = false, double tol = 1e-12) const;

    VectorX divergence_residual(const VectorX& u) const { return B_.apply(u); }

private:
    VectorX mass_solve(const VectorX& b, double tol) const;
    LinOp block_preconditioner() const;
    Result solve_saddle(const SparseMatrix* convection, const VectorX& f_t, const VectorX& g_rhs,
                        double tol, bool symmetric) const;

    std::shared_ptr<const Surface> surface_;
    std::shared_ptr<const TriMesh> mesh_;
    std::shared_ptr<const FeSpace> vel_, pres_;
    std::shared_ptr<TangentialReduction> red_;
    SparseMatrix K_, Mt_, B_, Mp_;
    VectorX pressure_mean_;  // int psi_q
    std::unique_ptr<IncompleteCholesky> icK_, icMp_, icMt_;
    mutable std::optional<EigenPairs> eig_cache_;
    mutable int eig_cache_k_ = 0;
};

}  // namespace surfpde
