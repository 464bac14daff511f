#pragma once

#include <functional>
#include <string>
#include <vector>

#include "surfpde/types.hpp"

namespace surfpde {

struct Triplet {
    Index r, c;
    double v;
};

/// Compressed sparse row matrix with sorted unique column indices per row.
class SparseMatrix {
public:
    SparseMatrix() = default;
    static SparseMatrix from_triplets(Index rows, Index cols, std::vector<Triplet> triplets,
                                      bool symmetric = false);

    Index rows() const { return rows_; }
    Index cols() const { return cols_; }
    Index nnz() const { return static_cast<Index>(values_.size()); }
    const std::vector<Index>& row_ptr() const { return row_ptr_; }
    const std::vector<Index>& col_ind() const { return col_ind_; }
    const std::vector<double>& values() const { return values_; }
    std::vector<double>& values() { return values_; }
    bool symmetric() const { return symmetric_; }

    VectorX apply(const VectorX& x) const;
    VectorX apply_transpose(const VectorX& x) const;
    SparseMatrix transpose() const;
    VectorX diagonal() const;
    double max_abs() const;
    /// max-norm of A - A^T; also refreshes the symmetry flag on demand.
    double symmetry_defect() const;
    void check_symmetry(double rel_tol = 1e-13) const;

    SparseMatrix scaled(double s) const;
    static SparseMatrix sum(const SparseMatrix& a, double alpha, const SparseMatrix& b, double beta);

private:
    Index rows_ = 0, cols_ = 0;
    std::vector<Index> row_ptr_{0};
    std::vector<Index> col_ind_;
    std::vector<double> values_;
    bool symmetric_ = false;
};

void write_matrix_market(const std::string& path, const SparseMatrix& A);
SparseMatrix read_matrix_market(const std::string& path);

using LinOp = std::function<VectorX(const VectorX&)>;

inline LinOp as_op(const SparseMatrix& A) {
    return [&A](const VectorX& x) { return A.apply(x); };
}

struct SolveStats {
    int iterations = 0;
    double relative_residual = 0.0;
    bool converged = false;
    std::vector<double> history;  // residual norms per iteration
};

struct CgOptions {
    double tol = 1e-10;
    int maxit = 5000;
    LinOp preconditioner;             // SPD; identity if empty
    std::vector<VectorX> deflation;   // l2-orthonormalized internally
    bool throw_on_maxit = true;
    std::function<void(const VectorX&)> on_iterate;
};

/// Conjugate gradients for SPD systems, optionally restricted to the
/// orthogonal complement of a deflation space (projected CG). Throws
/// SolverError "breakdown" when a nonpositive curvature p'Ap is met.
SolveStats cg_solve(const LinOp& A, const VectorX& b, VectorX& x, const CgOptions& opts = {});
SolveStats cg_solve(const SparseMatrix& A, const VectorX& b, VectorX& x, const CgOptions& opts = {});

struct MinresOptions {
    double tol = 1e-10;
    int maxit = 20000;
    LinOp preconditioner;  // SPD
    bool throw_on_maxit = true;
};

/// MINRES for symmetric indefinite systems with an SPD preconditioner. The
/// reported residual is the preconditioned one, as is standard.
SolveStats minres_solve(const LinOp& A, Index n, const VectorX& b, VectorX& x,
                        const MinresOptions& opts = {});
SolveStats minres_solve(const SparseMatrix& A, const VectorX& b, VectorX& x,
                        const MinresOptions& opts = {});

struct GmresOptions {
    double tol = 1e-10;
    int maxit = 2000;
    int restart = 200;
    LinOp right_preconditioner;
    bool throw_on_maxit = true;
};

/// Restarted GMRES with right preconditioning (residual is the true residual).
SolveStats gmres_solve(const LinOp& A, Index n, const VectorX& b, VectorX& x,
                       const GmresOptions& opts = {});

/// Zero-fill incomplete Cholesky of an SPD(-ish) matrix; on pivot breakdown the
/// factorization restarts with an increased diagonal shift. Used as a CG /
/// MINRES block preconditioner.
class IncompleteCholesky {
public:
    explicit IncompleteCholesky(const SparseMatrix& A);
    VectorX solve(const VectorX& b) const;
    LinOp op() const {
        return [this](const VectorX& x) { return solve(x); };
    }
    double shift() const { return shift_; }

private:
    SparseMatrix L_;   // lower triangular, CSR
    SparseMatrix Lt_;  // upper triangular
    double shift_ = 0.0;
};

struct EigenPairs {
    VectorX values;                 // ascending
    std::vector<VectorX> vectors;   // M-orthonormal
    VectorX residuals;              // ||A x - lambda M x|| / ||x||_M
    bool converged = true;

    /// Groups eigenvalues whose relative gap is below rel_tol.
    /// Returns (representative value, multiplicity) pairs.
    std::vector<std::pair<double, int>> clusters(double rel_tol = 1e-4) const;
};

struct LanczosOptions {
    int k = 4;
    double tol = 1e-8;
    int max_steps = 300;
    std::vector<VectorX> deflation;  // treated as known kernel / excluded space
    unsigned seed = 42;
};

/// Shift-invert Lanczos (shift 0) for the generalized symmetric problem
/// A x = lambda M x. `solve_A` applies the (deflated) inverse of A, `apply_M`
/// the SPD mass matrix. Full reorthogonalization in the M-inner product.
/// `apply_A` is optional and only used to report true residuals.
EigenPairs lanczos_smallest(const LinOp& solve_A, const LinOp& apply_M, const LinOp& apply_A,
                            Index n, const LanczosOptions& opts);

/// Convenience driver: inner deflated CG on A (IC(0)-preconditioned).
EigenPairs eigs_smallest(const SparseMatrix& A, const SparseMatrix& M, int k, double tol = 1e-8,
                         const std::vector<VectorX>& deflation = {});

}  // namespace surfpde
