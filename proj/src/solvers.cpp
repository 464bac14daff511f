#include "surfpde/solvers.hpp"

#include <chrono>
#include <cmath>

namespace surfpde {

namespace {

class Stopwatch {
public:
    Stopwatch() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

double quadrature_l2(const FeSpace& space, const ScalarFunc& f) {
    const auto& quad = space.mesh().quadrature(space.quad_order());
    double s = 0.0;
    for (const auto& tri : quad)
        for (const auto& qp : tri) {
            const double v = f(qp.x_lift);
            s += qp.w * v * v;
        }
    return std::sqrt(s);
}

void shift_to_mean_zero(VectorX& u, const VectorX& mean_vec, double area) {
    u -= (mean_vec.dot(u) / area) * VectorX::Ones(u.size());
}

}  // namespace

// ---------------------------------------------------------------------------
// Laplace-Beltrami

ScalarSolve solve_laplace_beltrami(std::shared_ptr<const Surface> surface,
                                   std::shared_ptr<const TriMesh> mesh, const ScalarFunc& f,
                                   const LaplaceBeltramiOptions& opts) {
    Stopwatch clock;
    const SpaceKind kind = opts.degree == 1 ? SpaceKind::P1Scalar : SpaceKind::P2Scalar;
    auto space = std::make_shared<FeSpace>(mesh, kind, opts.quad_order);
    (void)surface;
    const SparseMatrix K = assemble_stiffness_scalar(*space);
    IncompleteCholesky ic(K);
    const VectorX b = assemble_load_scalar(*space, f);
    const VectorX m = integral_vector(*space);
    const double area = mesh->size().area_total;

    ScalarSolve out;
    out.space = space;
    const double mean_defect = std::abs(b.sum());
    const double fnorm = quadrature_l2(*space, f);
    if (mean_defect > 1e-8 * std::max(fnorm, 1e-30))
        out.report.warning = "source has nonzero mean (" + std::to_string(mean_defect) +
                             "); projected onto the zero-mean subspace";

    CgOptions o;
    o.tol = opts.tol;
    o.maxit = opts.maxit;
    o.preconditioner = ic.op();
    o.deflation = {VectorX::Ones(space->num_dofs())};
    VectorX u;
    const auto stats = cg_solve(K, b, u, o);
    shift_to_mean_zero(u, m, area);
    out.u = u;
    out.report.converged = stats.converged;
    out.report.linear_iterations = stats.iterations;
    out.report.residual = stats.relative_residual;
    out.report.method = "cg+ic0, constants deflated";
    out.report.wall_time_seconds = clock.seconds();
    return out;
}

// ---------------------------------------------------------------------------
// vector Laplace (three operator variants)

VectorSolve solve_vector_laplace(std::shared_ptr<const Surface> surface,
                                 std::shared_ptr<const TriMesh> mesh, const VecFunc& f,
                                 const VectorLaplaceOptions& opts) {
    Stopwatch clock;
    (void)surface;
    const SpaceKind kind = opts.degree == 1 ? SpaceKind::P1Vector3 : SpaceKind::P2Vector3;
    auto space = std::make_shared<FeSpace>(mesh, kind, opts.quad_order);
    TangentialReduction red(space);

    SparseMatrix A = assemble_stiffness_vector(*space);
    switch (opts.variant) {
        case OperatorVariant::Bochner: break;
        case OperatorVariant::Hodge:
            A = SparseMatrix::sum(A, 1.0, assemble_curvature_term(*space, CurvatureTerm::MShift), 1.0);
            break;
        case OperatorVariant::SurfaceDiffusion:
            A = SparseMatrix::sum(A, 1.0, assemble_curvature_term(*space, CurvatureTerm::GradDiv), 1.0);
            A = SparseMatrix::sum(A, 1.0, assemble_curvature_term(*space, CurvatureTerm::MShift), -1.0);
            break;
    }
    const SparseMatrix At = red.reduce_matrix(A);
    IncompleteCholesky ic(At);
    const VectorX b = red.reduce(assemble_load_vector(*space, f));

    VectorSolve out;
    out.space = space;
    CgOptions o;
    o.tol = opts.tol;
    o.maxit = opts.maxit;
    o.preconditioner = ic.op();
    o.deflation = opts.deflation;
    VectorX u;
    try {
        const auto stats = cg_solve(At, b, u, o);
        out.report.converged = stats.converged;
        out.report.linear_iterations = stats.iterations;
        out.report.residual = stats.relative_residual;
    } catch (const SolverError& e) {
        if (opts.variant == OperatorVariant::SurfaceDiffusion)
            throw SolverError(std::string(e.what()) +
                              " (surface-diffusion operator: possible Killing/kernel modes; "
                              "pass them as deflation)");
        throw;
    }
    out.u_tangential = u;
    out.u = red.expand(u);
    out.report.method = "cg+ic0 on the tangential frame reduction";
    out.report.wall_time_seconds = clock.seconds();
    return out;
}

// ---------------------------------------------------------------------------
// biharmonic problems (mixed form, w = Laplacian of u)

BiharmonicSolve solve_biharmonic_scalar(std::shared_ptr<const Surface> surface,
                                        std::shared_ptr<const TriMesh> mesh, const ScalarFunc& f,
                                        const LaplaceBeltramiOptions& opts) {
    Stopwatch clock;
    (void)surface;
    const SpaceKind kind = opts.degree == 1 ? SpaceKind::P1Scalar : SpaceKind::P2Scalar;
    auto space = std::make_shared<FeSpace>(mesh, kind, opts.quad_order);
    const SparseMatrix M = assemble_mass(*space);
    const SparseMatrix K = assemble_stiffness_scalar(*space);
    const VectorX bf = assemble_load_scalar(*space, f);
    const Index n = space->num_dofs();

    // [[M, K], [K, 0]] (w, u) = (0, -b_f): M w + K u = 0 encodes w = Lap u,
    // K w = -b_f encodes Lap w = f.
    std::vector<Triplet> t;
    for (Index r = 0; r < n; ++r) {
        for (Index k = M.row_ptr()[r]; k < M.row_ptr()[r + 1]; ++k)
            t.push_back({r, M.col_ind()[k], M.values()[k]});
        for (Index k = K.row_ptr()[r]; k < K.row_ptr()[r + 1]; ++k) {
            t.push_back({r, n + K.col_ind()[k], K.values()[k]});
            t.push_back({n + r, K.col_ind()[k], K.values()[k]});
        }
    }
    const SparseMatrix S = SparseMatrix::from_triplets(2 * n, 2 * n, std::move(t), true);
    VectorX rhs = VectorX::Zero(2 * n);
    rhs.tail(n) = -bf;

    IncompleteCholesky icM(M), icK(K);
    MinresOptions mo;
    mo.tol = opts.tol;
    mo.maxit = opts.maxit;
    mo.preconditioner = [&](const VectorX& v) {
        VectorX r(2 * n);
        r.head(n) = icM.solve(v.head(n));
        r.tail(n) = icK.solve(v.tail(n));
        return r;
    };
    VectorX x;
    const auto stats = minres_solve(S, rhs, x, mo);

    BiharmonicSolve out;
    out.space = space;
    out.w = x.head(n);
    out.u = x.tail(n);
    const VectorX m = integral_vector(*space);
    shift_to_mean_zero(out.u, m, mesh->size().area_total);
    out.report.converged = stats.converged;
    out.report.linear_iterations = stats.iterations;
    out.report.residual = stats.relative_residual;
    out.report.method = "mixed (u, lap u) saddle via minres";
    out.report.wall_time_seconds = clock.seconds();
    return out;
}

BiharmonicSolve solve_biharmonic_vector(std::shared_ptr<const Surface> surface,
                                        std::shared_ptr<const TriMesh> mesh, const VecFunc& f,
                                        double tol) {
    Stopwatch clock;
    (void)surface;
    auto space = std::make_shared<FeSpace>(mesh, SpaceKind::P2Vector3, 4);
    TangentialReduction red(space);
    const SparseMatrix M = red.reduce_matrix(assemble_mass(*space));
    const SparseMatrix K = red.reduce_matrix(assemble_stiffness_vector(*space));
    const VectorX bf = red.reduce(assemble_load_vector(*space, f));
    const Index n = M.rows();

    std::vector<Triplet> t;
    for (Index r = 0; r < n; ++r) {
        for (Index k = M.row_ptr()[r]; k < M.row_ptr()[r + 1]; ++k)
            t.push_back({r, M.col_ind()[k], M.values()[k]});
        for (Index k = K.row_ptr()[r]; k < K.row_ptr()[r + 1]; ++k) {
            t.push_back({r, n + K.col_ind()[k], K.values()[k]});
            t.push_back({n + r, K.col_ind()[k], K.values()[k]});
        }
    }
    const SparseMatrix S = SparseMatrix::from_triplets(2 * n, 2 * n, std::move(t), true);
    VectorX rhs = VectorX::Zero(2 * n);
    rhs.tail(n) = -bf;
    IncompleteCholesky icM(M), icK(K);
    MinresOptions mo;
    mo.tol = tol;
    mo.preconditioner = [&](const VectorX& v) {
        VectorX r(2 * n);
        r.head(n) = icM.solve(v.head(n));
        r.tail(n) = icK.solve(v.tail(n));
        return r;
    };
    VectorX x;
    const auto stats = minres_solve(S, rhs, x, mo);

    BiharmonicSolve out;
    out.space = space;
    out.w = red.expand(x.head(n));
    out.u = red.expand(x.tail(n));
    out.report.converged = stats.converged;
    out.report.linear_iterations = stats.iterations;
    out.report.residual = stats.relative_residual;
    out.report.method = "mixed tangential saddle via minres";
    out.report.wall_time_seconds = clock.seconds();
    return out;
}

// ---------------------------------------------------------------------------
// StokesProblem

StokesProblem::StokesProblem(std::shared_ptr<const Surface> surface,
                             std::shared_ptr<const TriMesh> mesh, int quad_order,
                             SpaceKind velocity_kind)
    : surface_(std::move(surface)), mesh_(std::move(mesh)) {
    vel_ = std::make_shared<FeSpace>(mesh_, velocity_kind, quad_order);
    pres_ = std::make_shared<FeSpace>(mesh_, SpaceKind::P1Scalar, quad_order);
    red_ = std::make_shared<TangentialReduction>(vel_);
    K_ = red_->reduce_matrix(assemble_stiffness_vector(*vel_));
    Mt_ = red_->reduce_matrix(assemble_mass(*vel_));
    B_ = red_->reduce_columns(assemble_divergence(*vel_, *pres_));
    Mp_ = assemble_mass(*pres_);
    pressure_mean_ = integral_vector(*pres_);
    icK_ = std::make_unique<IncompleteCholesky>(K_);
    icMp_ = std::make_unique<IncompleteCholesky>(Mp_);
    icMt_ = std::make_unique<IncompleteCholesky>(Mt_);
}

double StokesProblem::h1_norm(const VectorX& u) const {
    return std::sqrt(u.dot(Mt_.apply(u)) + u.dot(K_.apply(u)));
}
double StokesProblem::l2_norm(const VectorX& u) const { return std::sqrt(u.dot(Mt_.apply(u))); }
double StokesProblem::pressure_l2(const VectorX& p) const { return std::sqrt(p.dot(Mp_.apply(p))); }

VectorX StokesProblem::to_mean_zero_pressure(VectorX p) const {
    const double area = mesh_->size().area_total;
    p -= (pressure_mean_.dot(p) / area) * VectorX::Ones(p.size());
    return p;
}

VectorX StokesProblem::mass_solve(const VectorX& b, double tol) const {
    VectorX x;
    CgOptions o;
    o.tol = tol;
    o.maxit = 2000;
    o.preconditioner = icMt_->op();
    cg_solve(Mt_, b, x, o);
    return x;
}

LinOp StokesProblem::block_preconditioner() const {
    const Index n = nu(), m = np();
    return [this, n, m](const VectorX& v) {
        VectorX r(n + m);
        r.head(n) = icK_->solve(v.head(n));
        r.tail(m) = icMp_->solve(v.tail(m));
        return r;
    };
}

StokesProblem::Result StokesProblem::solve_saddle(const SparseMatrix* convection,
                                                  const VectorX& f_t, const VectorX& g_rhs,
                                                  double tol, bool symmetric) const {
    Stopwatch clock;
    const Index n = nu(), m = np();
    const SparseMatrix Bt = B_.transpose();
    const auto apply = [&](const VectorX& x) {
        VectorX r(n + m);
        VectorX Au = K_.apply(x.head(n));
        if (convection) Au += convection->apply(x.head(n));
        r.head(n) = Au + Bt.apply(x.tail(m));
        r.tail(m) = B_.apply(x.head(n));
        return r;
    };
    VectorX rhs(n + m);
    rhs.head(n) = f_t;
    rhs.tail(m) = g_rhs;

    VectorX x;
    SolveStats stats;
    if (symmetric) {
        MinresOptions mo;
        mo.tol = tol;
        mo.maxit = 40000;
        mo.preconditioner = block_preconditioner();
        stats = minres_solve(apply, n + m, rhs, x, mo);
    } else {
        GmresOptions go;
        go.tol = tol;
        go.maxit = 4000;
        go.restart = 250;
        go.right_preconditioner = block_preconditioner();
        stats = gmres_solve(apply, n + m, rhs, x, go);
    }

    Result res;
    res.u = x.head(n);
    res.p = to_mean_zero_pressure(x.tail(m));
    res.report.converged = stats.converged;
    res.report.linear_iterations = stats.iterations;
    res.report.residual = stats.relative_residual;
    res.report.method = symmetric ? "minres + block ic0/pressure-mass preconditioner"
                                  : "gmres + stokes block preconditioner";
    res.report.wall_time_seconds = clock.seconds();
    return res;
}

StokesProblem::Result StokesProblem::solve_stokes_rhs(const VectorX& f_t, const VectorX& g_rhs,
                                                      double tol) const {
    return solve_saddle(nullptr, f_t, g_rhs, tol, true);
}

StokesProblem::Result StokesProblem::solve_stokes(const VecFunc& f, const ScalarFunc& g,
                                                  double tol) const {
    const VectorX f_t = red_->reduce(assemble_load_vector(*vel_, f));
    VectorX g_rhs = VectorX::Zero(np());
    if (g) g_rhs = -assemble_load_scalar(*pres_, g);
    return solve_stokes_rhs(f_t, g_rhs, tol);
}

StokesProblem::Result StokesProblem::solve_oseen_rhs(const VectorX& w, const VectorX& f_t,
                                                     const VectorX& g_rhs, double tol,
                                                     bool project_w) const {
    VectorX wv = w;
    std::string warning;
    const VectorX div_w = B_.apply(wv);
    const double div_norm = div_w.norm();
    if (project_w && div_norm > 1e-8 * std::max(1.0, l2_norm(wv))) {
        wv = leray_project(wv);
        warning = "transport field was not discretely divergence-free (|Bw| = " +
                  std::to_string(div_norm) + "); Leray-projected";
    }
    const Field w_field{vel_, red_->expand(wv)};
    const SparseMatrix N = red_->reduce_matrix(assemble_convection(*vel_, w_field));
    Result res = solve_saddle(&N, f_t, g_rhs, tol, false);
    res.report.warning = warning;
    res.report.metrics["u_h1"] = h1_norm(res.u);
    return res;
}

StokesProblem::Result StokesProblem::solve_oseen(const VectorX& w, const VecFunc& f,
                                                 const ScalarFunc& g, double tol) const {
    const VectorX f_t = red_->reduce(assemble_load_vector(*vel_, f));
    VectorX g_rhs = VectorX::Zero(np());
    if (g) g_rhs = -assemble_load_scalar(*pres_, g);
    return solve_oseen_rhs(w, f_t, g_rhs, tol);
}

StokesProblem::Result StokesProblem::solve_navier_stokes(const VecFunc& f, const ScalarFunc& g,
                                                         const NSOptions& opts) const {
    Stopwatch clock;
    const VectorX f_t = red_->reduce(assemble_load_vector(*vel_, f));
    VectorX g_rhs = VectorX::Zero(np());
    if (g) g_rhs = -assemble_load_scalar(*pres_, g);
    const double data_norm = std::max(std::sqrt(f_t.squaredNorm() + g_rhs.squaredNorm()), 1e-30);
    const SparseMatrix Bt = B_.transpose();

    auto nonlinear_residual = [&](const VectorX& u, const VectorX& p) {
        const Field uf{vel_, red_->expand(u)};
        const SparseMatrix N = red_->reduce_matrix(assemble_convection(*vel_, uf));
        const VectorX rm = K_.apply(u) + N.apply(u) + Bt.apply(p) - f_t;
        const VectorX rd = B_.apply(u) - g_rhs;
        return std::sqrt(rm.squaredNorm() + rd.squaredNorm()) / data_norm;
    };

    Result state = solve_stokes_rhs(f_t, g_rhs, opts.tol_linear);
    Result out;
    out.report.method = opts.method == NSMethod::Picard ? "picard" : "newton";
    out.report.metrics["linear_iterations_total"] = state.report.linear_iterations;

    double prev_increment = -1.0;
    int diverging_streak = 0;
    for (int it = 1; it <= opts.max_nl; ++it) {
        VectorX u_new, p_new;
        int lin_it = 0;
        if (opts.method == NSMethod::Picard) {
            Result step = solve_oseen_rhs(state.u, f_t, g_rhs, opts.tol_linear, false);
            u_new = (1.0 - opts.damping) * state.u + opts.damping * step.u;
            p_new = (1.0 - opts.damping) * state.p + opts.damping * step.p;
            lin_it = step.report.linear_iterations;
        } else {
            // Newton: full linearization of the convection in both slots
            const Field uf{vel_, red_->expand(state.u)};
            const SparseMatrix N = red_->reduce_matrix(assemble_convection(*vel_, uf));
            const SparseMatrix R = red_->reduce_matrix(assemble_convection_linearized(*vel_, uf));
            const SparseMatrix J = SparseMatrix::sum(N, 1.0, R, 1.0);
            const VectorX rm = f_t - (K_.apply(state.u) + N.apply(state.u) + Bt.apply(state.p));
            const VectorX rd = g_rhs - B_.apply(state.u);
            Result step = solve_saddle(&J, rm, rd, opts.tol_linear, false);
            u_new = state.u + opts.damping * step.u;
            p_new = state.p + opts.damping * step.p;
            lin_it = step.report.linear_iterations;
        }
        out.report.metrics["linear_iterations_total"] += lin_it;
        out.report.nonlinear_iterations = it;

        const double increment = h1_norm(u_new - state.u);
        if (prev_increment > 0.0) {
            const double ratio = increment / prev_increment;
            out.report.contraction_ratios.push_back(ratio);
            diverging_streak = ratio > 1.0 ? diverging_streak + 1 : 0;
            if (diverging_streak >= 3)
                throw SolverError(
                    "fixed-point iteration is not contracting (3 consecutive expanding steps); "
                    "reduce the data size or the damping factor");
        }
        prev_increment = increment;
        state.u = u_new;
        state.p = p_new;

        const double rel_inc = increment / std::max(h1_norm(state.u), 1e-30);
        if (rel_inc <= opts.tol_nl) {
            const double res = nonlinear_residual(state.u, state.p);
            out.report.residual = res;
            if (res <= 10.0 * opts.tol_nl) {
                out.report.converged = true;
                break;
            }
        }
    }
    if (!out.report.converged) {
        out.report.residual = nonlinear_residual(state.u, state.p);
        out.report.converged = out.report.residual <= 10.0 * opts.tol_nl;
        if (!out.report.converged)
            out.report.warning = "nonlinear iteration limit reached (residual " +
                                 std::to_string(out.report.residual) + ")";
    }
    out.u = state.u;
    out.p = to_mean_zero_pressure(state.p);
    out.report.wall_time_seconds = clock.seconds();
    return out;
}

// ---------------------------------------------------------------------------
// Helmholtz-Weyl decomposition and Leray projection

StokesProblem::Decomposition StokesProblem::helmholtz_decompose(const VectorX& v,
                                                                double tol) const {
    const SparseMatrix Bt = B_.transpose();
    const LinOp S = [&](const VectorX& phi) { return B_.apply(mass_solve(Bt.apply(phi), 1e-13)); };
    const VectorX rhs = B_.apply(v);
    VectorX phi;
    CgOptions o;
    o.tol = tol;
    o.maxit = 4000;
    o.deflation = {VectorX::Ones(np())};
    cg_solve(S, rhs, phi, o);

    Decomposition d;
    d.gradient = mass_solve(Bt.apply(phi), 1e-13);
    d.divfree = v - d.gradient;
    d.potential = to_mean_zero_pressure(phi);
    d.orthogonality = d.divfree.dot(Mt_.apply(d.gradient));
    return d;
}

VectorX StokesProblem::leray_project(const VectorX& v, double tol) const {
    return helmholtz_decompose(v, tol).divfree;
}

// ---------------------------------------------------------------------------
// Stokes operator: eigenpairs and fractional powers

const EigenPairs& StokesProblem::stokes_eigs(int k, double tol) const {
    if (eig_cache_ && eig_cache_k_ >= k) return *eig_cache_;
    const LinOp solve_A = [this](const VectorX& b) {
        Result r = solve_stokes_rhs(b, VectorX::Zero(np()), 1e-11);
        return r.u;
    };
    LanczosOptions lo;
    lo.k = k;
    lo.tol = tol;
    lo.max_steps = 200;
    EigenPairs ep = lanczos_smallest(solve_A, as_op(Mt_), nullptr, nu(), lo);
    if (!ep.converged) throw SolverError("Stokes eigensolver did not converge");

    // true saddle residuals: min_p ||K v - w M v + B' p|| / ||v||_M
    const SparseMatrix Bt = B_.transpose();
    const LinOp BBt = [&](const VectorX& p) { return B_.apply(Bt.apply(p)); };
    for (Index i = 0; i < ep.values.size(); ++i) {
        const VectorX r = K_.apply(ep.vectors[i]) - ep.values[i] * Mt_.apply(ep.vectors[i]);
        VectorX p;
        CgOptions o;
        o.tol = 1e-10;
        o.maxit = 2000;
        o.deflation = {VectorX::Ones(np())};
        cg_solve(BBt, -B_.apply(r), p, o);
        ep.residuals[i] = (r + Bt.apply(p)).norm();
    }
    eig_cache_ = std::move(ep);
    eig_cache_k_ = k;
    return *eig_cache_;
}

VectorX StokesProblem::fractional_stokes_apply(double alpha, const VectorX& v, int k_trunc,
                                               double* remainder) const {
    if (!(alpha > 0)) throw ConfigError("fractional power requires alpha > 0");
    const EigenPairs& ep = stokes_eigs(k_trunc);
    VectorX out = VectorX::Zero(nu());
    VectorX recon = VectorX::Zero(nu());
    const VectorX Mv = Mt_.apply(v);
    for (int n = 0; n < k_trunc && n < ep.values.size(); ++n) {
        const double beta = ep.vectors[n].dot(Mv);
        out += std::pow(ep.values[n], alpha) * beta * ep.vectors[n];
        recon += beta * ep.vectors[n];
    }
    if (remainder) {
        const double vn = l2_norm(v);
        *remainder = vn > 0 ? l2_norm(v - recon) / vn : 0.0;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Galerkin Navier-Stokes in the Stokes eigenbasis

StokesProblem::GalerkinResult StokesProblem::ns_galerkin(const VecFunc& f, int n_modes,
                                                         double tol) const {
    Stopwatch clock;
    const EigenPairs& ep = stokes_eigs(n_modes);
    if (ep.values.size() < n_modes) throw SolverError("not enough Stokes eigenpairs");
    const VectorX f_t = red_->reduce(assemble_load_vector(*vel_, f));

    // convection tensor T[i](j,k) = int (grad v_j) v_k . v_i
    std::vector<MatrixX> T(n_modes, MatrixX::Zero(n_modes, n_modes));
    for (int k = 0; k < n_modes; ++k) {
        const Field wk{vel_, red_->expand(ep.vectors[k])};
        const SparseMatrix N = red_->reduce_matrix(assemble_convection(*vel_, wk));
        for (int j = 0; j < n_modes; ++j) {
            const VectorX Nvj = N.apply(ep.vectors[j]);
            for (int i = 0; i < n_modes; ++i) T[i](j, k) = ep.vectors[i].dot(Nvj);
        }
    }
    VectorX fproj(n_modes);
    for (int i = 0; i < n_modes; ++i) fproj[i] = ep.vectors[i].dot(f_t);

    auto F = [&](const VectorX& c) {
        VectorX r(n_modes);
        for (int i = 0; i < n_modes; ++i) r[i] = ep.values[i] * c[i] + c.dot(T[i] * c) - fproj[i];
        return r;
    };
    auto J = [&](const VectorX& c) {
        MatrixX Jm = MatrixX::Zero(n_modes, n_modes);
        for (int i = 0; i < n_modes; ++i) {
            Jm(i, i) += ep.values[i];
            Jm.row(i) += (T[i] * c).transpose();            // d/dc_j of c_j-slot
            Jm.row(i) += (T[i].transpose() * c).transpose();  // d/dc_k of c_k-slot
        }
        return Jm;
    };

    VectorX c(n_modes);
    for (int i = 0; i < n_modes; ++i) c[i] = fproj[i] / ep.values[i];  // Stokes start
    GalerkinResult out;
    out.report.method = "newton with line search on the Galerkin system";
    double fn = F(c).norm();
    for (int it = 0; it < 60 && fn > tol; ++it) {
        const VectorX dir = J(c).fullPivLu().solve(-F(c));
        double step = 1.0;
        for (int ls = 0; ls < 30; ++ls) {
            const double fn_new = F(c + step * dir).norm();
            if (fn_new < (1.0 - 1e-4 * step) * fn) {
                c += step * dir;
                fn = fn_new;
                break;
            }
            step *= 0.5;
            if (ls == 29) throw SolverError("Galerkin Newton line search failed");
        }
        out.report.nonlinear_iterations = it + 1;
    }
    if (fn > tol) throw SolverError("Galerkin Newton did not converge");
    out.report.converged = true;
    out.report.residual = fn;
    out.coefficients = c;
    out.u = VectorX::Zero(nu());
    for (int n = 0; n < n_modes; ++n) out.u += c[n] * ep.vectors[n];
    out.p = pressure_from_lb(out.u, f, {}, true);
    out.report.wall_time_seconds = clock.seconds();
    return out;
}

// ---------------------------------------------------------------------------
// decoupled pressure (Laplace-Beltrami solve)

VectorX StokesProblem::pressure_from_lb(const VectorX& u, const VecFunc& f, const VecFunc& grad_g,
                                        bool with_convection, double tol) const {
    const VectorX ua = red_->expand(u);
    const TriMesh& m = *mesh_;
    const auto& quad = m.quadrature(vel_->quad_order());
    VectorX b = VectorX::Zero(np());
    const int nbu = vel_->nodes_per_element();
    const int nbp = pres_->nodes_per_element();

    for (Index t = 0; t < m.num_triangles(); ++t) {
        const auto& tr = m.triangles()[t];
        const Vec3& x0 = m.vertices()[tr[0]];
        Eigen::Matrix<double, 3, 2> G;
        G.col(0) = m.vertices()[tr[1]] - x0;
        G.col(1) = m.vertices()[tr[2]] - x0;
        const Eigen::Matrix<double, 3, 2> Tg = G * (G.transpose() * G).inverse();
        for (size_t q = 0; q < quad[t].size(); ++q) {
            const QuadPoint& qp = quad[t][q];
            const Mat3 P = qp.P();
            Vec3 uq = Vec3::Zero();
            Mat3 X = Mat3::Zero();
            for (int a = 0; a < nbu; ++a) {
                const Index n = vel_->node(t, a);
                const Vec3 ca(ua[3 * n], ua[3 * n + 1], ua[3 * n + 2]);
                const Vec3 g = P * (Tg * vel_->basis_ref_gradients()[q][a]);
                uq += vel_->basis_values()[q][a] * ca;
                X += ca * g.transpose();
            }
            Vec3 h = f(qp.x_lift) + qp.M() * uq;
            if (grad_g) h += grad_g(qp.x_lift);
            if (with_convection) h -= P * (X * uq);
            for (int p = 0; p < nbp; ++p) {
                const Vec3 gp = P * (Tg * pres_->basis_ref_gradients()[q][p]);
                b[pres_->node(t, p)] += qp.w * h.dot(gp);
            }
        }
    }

    const SparseMatrix Ks = assemble_stiffness_scalar(*pres_);
    IncompleteCholesky ic(Ks);
    VectorX pi;
    CgOptions o;
    o.tol = tol;
    o.maxit = 20000;
    o.preconditioner = ic.op();
    o.deflation = {VectorX::Ones(np())};
    cg_solve(Ks, b, pi, o);
    return to_mean_zero_pressure(pi);
}

}  // namespace surfpde
