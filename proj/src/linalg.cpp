#include "surfpde/linalg.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include "surfpde/parallel.hpp"

namespace surfpde {

// ---------------------------------------------------------------------------
// worker pool (chunked, deterministic merges)

namespace {
std::atomic<int> g_threads{1};
}

void set_num_threads(int n) { g_threads.store(std::max(1, n)); }
int num_threads() { return g_threads.load(); }

void parallel_for(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& body) {
    const int nt = std::min<std::int64_t>(num_threads(), std::max<std::int64_t>(1, n / 1024));
    if (nt <= 1 || n < 2048) {
        body(0, n);
        return;
    }
    std::vector<std::thread> workers;
    const std::int64_t chunk = (n + nt - 1) / nt;
    for (int t = 0; t < nt; ++t) {
        const std::int64_t lo = t * chunk, hi = std::min<std::int64_t>(n, lo + chunk);
        if (lo >= hi) break;
        workers.emplace_back([&, lo, hi] { body(lo, hi); });
    }
    for (auto& w : workers) w.join();
}

// ---------------------------------------------------------------------------
// SparseMatrix

SparseMatrix SparseMatrix::from_triplets(Index rows, Index cols, std::vector<Triplet> t,
                                         bool symmetric) {
    std::sort(t.begin(), t.end(), [](const Triplet& a, const Triplet& b) {
        return a.r != b.r ? a.r < b.r : a.c < b.c;
    });
    SparseMatrix A;
    A.rows_ = rows;
    A.cols_ = cols;
    A.symmetric_ = symmetric;
    A.row_ptr_.assign(rows + 1, 0);
    A.col_ind_.reserve(t.size());
    A.values_.reserve(t.size());
    for (size_t i = 0; i < t.size();) {
        size_t j = i;
        double v = 0.0;
        while (j < t.size() && t[j].r == t[i].r && t[j].c == t[i].c) v += t[j++].v;
        A.col_ind_.push_back(t[i].c);
        A.values_.push_back(v);
        A.row_ptr_[t[i].r + 1] += 1;
        i = j;
    }
    for (Index r = 0; r < rows; ++r) A.row_ptr_[r + 1] += A.row_ptr_[r];
    return A;
}

VectorX SparseMatrix::apply(const VectorX& x) const {
    VectorX y(rows_);
    parallel_for(rows_, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t r = lo; r < hi; ++r) {
            double s = 0.0;
            for (Index k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) s += values_[k] * x[col_ind_[k]];
            y[r] = s;
        }
    });
    return y;
}

VectorX SparseMatrix::apply_transpose(const VectorX& x) const {
    VectorX y = VectorX::Zero(cols_);
    for (Index r = 0; r < rows_; ++r)
        for (Index k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) y[col_ind_[k]] += values_[k] * x[r];
    return y;
}

SparseMatrix SparseMatrix::transpose() const {
    std::vector<Triplet> t;
    t.reserve(values_.size());
    for (Index r = 0; r < rows_; ++r)
        for (Index k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) t.push_back({col_ind_[k], r, values_[k]});
    return from_triplets(cols_, rows_, std::move(t), symmetric_);
}

VectorX SparseMatrix::diagonal() const {
    VectorX d = VectorX::Zero(std::min(rows_, cols_));
    for (Index r = 0; r < std::min(rows_, cols_); ++r)
        for (Index k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k)
            if (col_ind_[k] == r) d[r] = values_[k];
    return d;
}

double SparseMatrix::max_abs() const {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
}

double SparseMatrix::symmetry_defect() const {
    const SparseMatrix At = transpose();
    double defect = 0.0;
    for (Index r = 0; r < rows_; ++r) {
        Index ka = row_ptr_[r], kb = At.row_ptr_[r];
        const Index ea = row_ptr_[r + 1], eb = At.row_ptr_[r + 1];
        while (ka < ea || kb < eb) {
            const Index ca = ka < ea ? col_ind_[ka] : cols_;
            const Index cb = kb < eb ? At.col_ind_[kb] : cols_;
            if (ca == cb) {
                defect = std::max(defect, std::abs(values_[ka] - At.values_[kb]));
                ++ka, ++kb;
            } else if (ca < cb) {
                defect = std::max(defect, std::abs(values_[ka++]));
            } else {
                defect = std::max(defect, std::abs(At.values_[kb++]));
            }
        }
    }
    return defect;
}

void SparseMatrix::check_symmetry(double rel_tol) const {
    if (rows_ != cols_) throw SolverError("symmetry check on a rectangular matrix");
    if (symmetry_defect() > rel_tol * std::max(max_abs(), 1e-300))
        throw SolverError("matrix flagged symmetric fails the symmetry check");
}

SparseMatrix SparseMatrix::scaled(double s) const {
    SparseMatrix A = *this;
    for (double& v : A.values_) v *= s;
    return A;
}

SparseMatrix SparseMatrix::sum(const SparseMatrix& a, double alpha, const SparseMatrix& b,
                               double beta) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw SolverError("sum: shape mismatch");
    std::vector<Triplet> t;
    t.reserve(a.nnz() + b.nnz());
    for (Index r = 0; r < a.rows(); ++r)
        for (Index k = a.row_ptr_[r]; k < a.row_ptr_[r + 1]; ++k)
            t.push_back({r, a.col_ind_[k], alpha * a.values_[k]});
    for (Index r = 0; r < b.rows(); ++r)
        for (Index k = b.row_ptr_[r]; k < b.row_ptr_[r + 1]; ++k)
            t.push_back({r, b.col_ind_[k], beta * b.values_[k]});
    return from_triplets(a.rows(), a.cols(), std::move(t), a.symmetric_ && b.symmetric_);
}

// ---------------------------------------------------------------------------
// MatrixMarket coordinate format

void write_matrix_market(const std::string& path, const SparseMatrix& A) {
    std::ofstream out(path);
    if (!out) throw SolverError("cannot write '" + path + "'");
    out << "%%MatrixMarket matrix coordinate real general\n";
    out << A.rows() << " " << A.cols() << " " << A.nnz() << "\n";
    out.precision(17);
    for (Index r = 0; r < A.rows(); ++r)
        for (Index k = A.row_ptr()[r]; k < A.row_ptr()[r + 1]; ++k)
            out << r + 1 << " " << A.col_ind()[k] + 1 << " " << A.values()[k] << "\n";
}

SparseMatrix read_matrix_market(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SolverError("cannot read '" + path + "'");
    std::string line;
    bool symmetric = false;
    if (!std::getline(in, line) || line.rfind("%%MatrixMarket", 0) != 0)
        throw SolverError("missing MatrixMarket banner in '" + path + "'");
    if (line.find("symmetric") != std::string::npos) symmetric = true;
    while (std::getline(in, line))
        if (!line.empty() && line[0] != '%') break;
    std::istringstream hs(line);
    long rows, cols, nnz;
    if (!(hs >> rows >> cols >> nnz)) throw SolverError("malformed MatrixMarket size line");
    std::vector<Triplet> t;
    t.reserve(nnz);
    for (long i = 0; i < nnz; ++i) {
        long r, c;
        double v;
        if (!(in >> r >> c >> v)) throw SolverError("malformed MatrixMarket entry");
        t.push_back({static_cast<Index>(r - 1), static_cast<Index>(c - 1), v});
        if (symmetric && r != c) t.push_back({static_cast<Index>(c - 1), static_cast<Index>(r - 1), v});
    }
    return SparseMatrix::from_triplets(static_cast<Index>(rows), static_cast<Index>(cols),
                                       std::move(t), symmetric);
}

// ---------------------------------------------------------------------------
// deflation helpers

namespace {

std::vector<VectorX> orthonormalize(const std::vector<VectorX>& basis) {
    std::vector<VectorX> q;
    for (VectorX v : basis) {
        for (int pass = 0; pass < 2; ++pass)
            for (const auto& u : q) v -= u.dot(v) * u;
        const double n = v.norm();
        if (n > 1e-12) q.push_back(v / n);
    }
    return q;
}

void project_out(VectorX& v, const std::vector<VectorX>& q) {
    for (const auto& u : q) v -= u.dot(v) * u;
}

}  // namespace

// ---------------------------------------------------------------------------
// conjugate gradients (projected, preconditioned)

SolveStats cg_solve(const LinOp& A, const VectorX& b, VectorX& x, const CgOptions& opts) {
    const auto Z = orthonormalize(opts.deflation);
    const auto prec = [&](const VectorX& r) {
        VectorX z = opts.preconditioner ? opts.preconditioner(r) : r;
        project_out(z, Z);
        return z;
    };
    if (x.size() != b.size()) x = VectorX::Zero(b.size());
    project_out(x, Z);
    VectorX bp = b;
    project_out(bp, Z);
    const double bnorm = std::max(bp.norm(), 1e-300);

    VectorX r = bp - A(x);
    project_out(r, Z);
    VectorX z = prec(r);
    VectorX p = z;
    double rz = r.dot(z);
    SolveStats stats;
    stats.history.push_back(r.norm() / bnorm);
    for (int it = 0; it < opts.maxit; ++it) {
        if (stats.history.back() <= opts.tol) {
            stats.converged = true;
            break;
        }
        VectorX Ap = A(p);
        project_out(Ap, Z);
        const double pAp = p.dot(Ap);
        if (pAp <= 0.0)
            throw SolverError("breakdown: nonpositive p'Ap, operator is not SPD on the search space");
        const double alpha = rz / pAp;
        x += alpha * p;
        r -= alpha * Ap;
        if (opts.on_iterate) opts.on_iterate(x);
        z = prec(r);
        const double rz_new = r.dot(z);
        p = z + (rz_new / rz) * p;
        rz = rz_new;
        stats.iterations = it + 1;
        stats.history.push_back(r.norm() / bnorm);
    }
    stats.relative_residual = stats.history.back();
    stats.converged = stats.relative_residual <= opts.tol;
    if (!stats.converged && opts.throw_on_maxit)
        throw SolverError("cg reached the iteration limit (relres " +
                          std::to_string(stats.relative_residual) + ")");
    return stats;
}

SolveStats cg_solve(const SparseMatrix& A, const VectorX& b, VectorX& x, const CgOptions& opts) {
    return cg_solve(as_op(A), b, x, opts);
}

// ---------------------------------------------------------------------------
// MINRES (Paige-Saunders with SPD preconditioning)

SolveStats minres_solve(const LinOp& A, Index n, const VectorX& b, VectorX& x,
                        const MinresOptions& opts) {
    if (x.size() != n) x = VectorX::Zero(n);
    const auto prec = [&](const VectorX& v) { return opts.preconditioner ? opts.preconditioner(v) : v; };

    VectorX r1 = b - A(x);
    VectorX y = prec(r1);
    double beta1 = r1.dot(y);
    if (beta1 < 0) throw SolverError("minres preconditioner is not positive definite");
    SolveStats stats;
    if (beta1 == 0) {
        stats.converged = true;
        return stats;
    }
    beta1 = std::sqrt(beta1);
    double oldb = 0, beta = beta1, dbar = 0, epsln = 0, phibar = beta1, cs = -1, sn = 0;
    VectorX r2 = r1, w = VectorX::Zero(n), w2 = VectorX::Zero(n);
    stats.history.push_back(1.0);
    for (int itn = 1; itn <= opts.maxit; ++itn) {
        const VectorX v = y / beta;
        y = A(v);
        if (itn >= 2) y -= (beta / oldb) * r1;
        const double alfa = v.dot(y);
        y -= (alfa / beta) * r2;
        r1 = r2;
        r2 = y;
        y = prec(r2);
        oldb = beta;
        beta = r2.dot(y);
        if (beta < 0) throw SolverError("minres preconditioner is not positive definite");
        beta = std::sqrt(beta);

        const double oldeps = epsln;
        const double delta = cs * dbar + sn * alfa;
        const double gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        double gamma = std::hypot(gbar, beta);
        gamma = std::max(gamma, 1e-300);
        cs = gbar / gamma;
        sn = beta / gamma;
        const double phi = cs * phibar;
        phibar = sn * phibar;

        const VectorX w1 = w2;
        w2 = w;
        w = (v - oldeps * w1 - delta * w2) / gamma;
        x += phi * w;

        stats.iterations = itn;
        stats.history.push_back(phibar / beta1);
        if (phibar / beta1 <= opts.tol) {
            stats.converged = true;
            break;
        }
    }
    stats.relative_residual = stats.history.back();
    if (!stats.converged && opts.throw_on_maxit)
        throw SolverError("minres stagnated at relative residual " +
                          std::to_string(stats.relative_residual) + " after " +
                          std::to_string(stats.iterations) + " iterations");
    return stats;
}

SolveStats minres_solve(const SparseMatrix& A, const VectorX& b, VectorX& x,
                        const MinresOptions& opts) {
    return minres_solve(as_op(A), A.rows(), b, x, opts);
}

// ---------------------------------------------------------------------------
// GMRES (restarted, right-preconditioned)

SolveStats gmres_solve(const LinOp& A, Index n, const VectorX& b, VectorX& x,
                       const GmresOptions& opts) {
    if (x.size() != n) x = VectorX::Zero(n);
    const auto prec = [&](const VectorX& v) {
        return opts.right_preconditioner ? opts.right_preconditioner(v) : v;
    };
    const double bnorm = std::max(b.norm(), 1e-300);
    SolveStats stats;
    int total_it = 0;
    while (total_it < opts.maxit) {
        VectorX r = b - A(x);
        const double rnorm = r.norm();
        stats.history.push_back(rnorm / bnorm);
        if (rnorm / bnorm <= opts.tol) {
            stats.converged = true;
            break;
        }
        const int m = std::min(opts.restart, opts.maxit - total_it);
        std::vector<VectorX> V;
        V.push_back(r / rnorm);
        MatrixX H = MatrixX::Zero(m + 1, m);
        std::vector<double> cs(m), sn(m);
        VectorX g = VectorX::Zero(m + 1);
        g[0] = rnorm;
        int j = 0;
        for (; j < m; ++j) {
            VectorX w = A(prec(V[j]));
            for (int i = 0; i <= j; ++i) {
                H(i, j) = V[i].dot(w);
                w -= H(i, j) * V[i];
            }
            // one re-orthogonalization pass for robustness at tight tolerances
            for (int i = 0; i <= j; ++i) {
                const double c = V[i].dot(w);
                H(i, j) += c;
                w -= c * V[i];
            }
            H(j + 1, j) = w.norm();
            if (H(j + 1, j) > 1e-300) V.push_back(w / H(j + 1, j));
            for (int i = 0; i < j; ++i) {
                const double t = cs[i] * H(i, j) + sn[i] * H(i + 1, j);
                H(i + 1, j) = -sn[i] * H(i, j) + cs[i] * H(i + 1, j);
                H(i, j) = t;
            }
            const double denom = std::hypot(H(j, j), H(j + 1, j));
            cs[j] = H(j, j) / denom;
            sn[j] = H(j + 1, j) / denom;
            H(j, j) = denom;
            H(j + 1, j) = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] = cs[j] * g[j];
            ++total_it;
            stats.history.push_back(std::abs(g[j + 1]) / bnorm);
            if (std::abs(g[j + 1]) / bnorm <= opts.tol) {
                ++j;
                break;
            }
            if (V.size() == static_cast<size_t>(j) + 1) {
                ++j;
                break;  // lucky breakdown
            }
        }
        VectorX yk = VectorX::Zero(j);
        for (int i = j - 1; i >= 0; --i) {
            double s = g[i];
            for (int l = i + 1; l < j; ++l) s -= H(i, l) * yk[l];
            yk[i] = s / H(i, i);
        }
        VectorX u = VectorX::Zero(n);
        for (int i = 0; i < j; ++i) u += yk[i] * V[i];
        x += prec(u);
        stats.iterations = total_it;
    }
    VectorX r = b - A(x);
    stats.relative_residual = r.norm() / bnorm;
    stats.converged = stats.relative_residual <= opts.tol * 1.01;
    if (!stats.converged && opts.throw_on_maxit)
        throw SolverError("gmres reached the iteration limit (relres " +
                          std::to_string(stats.relative_residual) + ")");
    return stats;
}

// ---------------------------------------------------------------------------
// incomplete Cholesky, zero fill

IncompleteCholesky::IncompleteCholesky(const SparseMatrix& A) {
    const Index n = A.rows();
    // lower-triangular pattern of A in CSR
    std::vector<Index> rp(n + 1, 0), ci;
    std::vector<double> av;
    for (Index r = 0; r < n; ++r) {
        for (Index k = A.row_ptr()[r]; k < A.row_ptr()[r + 1]; ++k)
            if (A.col_ind()[k] <= r) {
                ci.push_back(A.col_ind()[k]);
                av.push_back(A.values()[k]);
            }
        rp[r + 1] = static_cast<Index>(ci.size());
    }
    const VectorX diag = A.diagonal();
    const double dmax = diag.cwiseAbs().maxCoeff();

    std::vector<double> lv;
    double shift = 0.0;
    for (int attempt = 0; attempt < 24; ++attempt) {
        lv = av;
        bool ok = true;
        std::vector<double> dinv(n, 0.0);
        for (Index r = 0; r < n && ok; ++r) {
            for (Index k = rp[r]; k < rp[r + 1]; ++k) {
                const Index c = ci[k];
                double s = lv[k] + (c == r ? shift * std::max(diag[r], 1e-300) : 0.0);
                // s -= sum_{j<c} L(r,j) L(c,j)
                Index kr = rp[r], kc = rp[c];
                while (kr < k && kc < rp[c + 1] && ci[kc] < c) {
                    if (ci[kr] == ci[kc])
                        s -= lv[kr++] * lv[kc++];
                    else if (ci[kr] < ci[kc])
                        ++kr;
                    else
                        ++kc;
                }
                if (c == r) {
                    if (s <= 1e-13 * dmax) {
                        ok = false;
                        break;
                    }
                    lv[k] = std::sqrt(s);
                    dinv[r] = 1.0 / lv[k];
                } else {
                    lv[k] = s * dinv[c];
                }
            }
        }
        if (ok) break;
        shift = shift == 0.0 ? 1e-3 : shift * 4.0;
        if (attempt == 23) throw SolverError("incomplete Cholesky breakdown persists under shifting");
    }
    shift_ = shift;

    std::vector<Triplet> t;
    t.reserve(lv.size());
    for (Index r = 0; r < n; ++r)
        for (Index k = rp[r]; k < rp[r + 1]; ++k) t.push_back({r, ci[k], lv[k]});
    L_ = SparseMatrix::from_triplets(n, n, t, false);
    for (auto& tr : t) std::swap(tr.r, tr.c);
    Lt_ = SparseMatrix::from_triplets(n, n, std::move(t), false);
}

VectorX IncompleteCholesky::solve(const VectorX& b) const {
    const Index n = L_.rows();
    VectorX y(n);
    for (Index r = 0; r < n; ++r) {
        double s = b[r];
        double d = 1.0;
        for (Index k = L_.row_ptr()[r]; k < L_.row_ptr()[r + 1]; ++k) {
            const Index c = L_.col_ind()[k];
            if (c == r)
                d = L_.values()[k];
            else
                s -= L_.values()[k] * y[c];
        }
        y[r] = s / d;
    }
    VectorX x(n);
    for (Index r = n - 1; r >= 0; --r) {
        double s = y[r];
        double d = 1.0;
        for (Index k = Lt_.row_ptr()[r]; k < Lt_.row_ptr()[r + 1]; ++k) {
            const Index c = Lt_.col_ind()[k];
            if (c == r)
                d = Lt_.values()[k];
            else
                s -= Lt_.values()[k] * x[c];
        }
        x[r] = s / d;
    }
    return x;
}

// ---------------------------------------------------------------------------
// eigen clustering

std::vector<std::pair<double, int>> EigenPairs::clusters(double rel_tol) const {
    std::vector<std::pair<double, int>> out;
    for (int i = 0; i < values.size(); ++i) {
        if (!out.empty()) {
            const double rep = out.back().first;
            const double scale = std::max({std::abs(rep), std::abs(values[i]), 1e-12});
            if (std::abs(values[i] - rep) <= rel_tol * scale) {
                out.back().second += 1;
                continue;
            }
        }
        out.push_back({values[i], 1});
    }
    return out;
}

// ---------------------------------------------------------------------------
// shift-invert Lanczos with sequential deflation of found pairs. A single
// Krylov space carries one copy of each eigenvalue, so degenerate clusters
// (the sphere spectra are all clusters) are recovered by repeated runs that
// deflate everything found so far.

namespace {

struct LanczosRun {
    std::vector<double> theta;          // Ritz values of A^{-1} M, descending
    std::vector<VectorX> vectors;       // M-normalized Ritz vectors
    std::vector<double> si_residuals;   // shift-invert residual estimates
};

LanczosRun lanczos_run(const LinOp& solve_A, const LinOp& apply_M, Index n, int want,
                       double tol, int max_steps, const std::vector<VectorX>& defl_M,
                       std::mt19937& rng) {
    // defl_M is stored flat as [q0, M q0, q1, M q1, ...] with the q M-orthonormal.
    std::vector<VectorX> Q, MQ;
    auto defl_project = [&](VectorX& v) {
        for (size_t i = 0; i < defl_M.size(); i += 2) v -= defl_M[i + 1].dot(v) * defl_M[i];
    };
    auto basis_project = [&](VectorX& v) {
        for (size_t i = 0; i < Q.size(); ++i) v -= MQ[i].dot(v) * Q[i];
    };

    std::normal_distribution<double> gauss(0.0, 1.0);
    VectorX q(n);
    for (Index i = 0; i < n; ++i) q[i] = gauss(rng);
    defl_project(q);
    VectorX Mq = apply_M(q);
    double beta = std::sqrt(q.dot(Mq));
    if (beta < 1e-14) throw SolverError("lanczos start vector vanished under deflation");
    q /= beta;
    Mq /= beta;

    std::vector<double> alphas, betas;
    LanczosRun run;
    for (int j = 0; j < max_steps; ++j) {
        Q.push_back(q);
        MQ.push_back(Mq);
        VectorX w = solve_A(Mq);
        defl_project(w);
        alphas.push_back(MQ.back().dot(w));
        w -= alphas.back() * Q.back();
        if (j > 0) w -= betas.back() * Q[Q.size() - 2];
        // full reorthogonalization keeps the basis clean near convergence
        for (int pass = 0; pass < 2; ++pass) {
            defl_project(w);
            basis_project(w);
        }
        VectorX Mw = apply_M(w);
        double b2 = w.dot(Mw);
        b2 = std::max(b2, 0.0);
        const double bnew = std::sqrt(b2);

        // Ritz extraction
        const int m = static_cast<int>(alphas.size());
        MatrixX T = MatrixX::Zero(m, m);
        for (int i = 0; i < m; ++i) {
            T(i, i) = alphas[i];
            if (i + 1 < m) T(i, i + 1) = T(i + 1, i) = betas[i];
        }
        Eigen::SelfAdjointEigenSolver<MatrixX> es(T);
        const VectorX tv = es.eigenvalues();   // ascending
        const MatrixX ts = es.eigenvectors();

        const int avail = std::min(want, m);
        bool all_converged = m >= want;
        run.theta.clear();
        run.si_residuals.clear();
        std::vector<int> picks;
        for (int i = 0; i < avail; ++i) {
            const int idx = m - 1 - i;  // largest theta first
            const double th = tv[idx];
            const double res = bnew * std::abs(ts(m - 1, idx));
            run.theta.push_back(th);
            run.si_residuals.push_back(res);
            picks.push_back(idx);
            if (!(res <= tol * std::max(std::abs(th), 1e-14))) all_converged = false;
        }
        if ((all_converged && m >= want) || j + 1 == max_steps || bnew < 1e-14) {
            run.vectors.clear();
            for (int pi : picks) {
                VectorX x = VectorX::Zero(n);
                for (int i = 0; i < m; ++i) x += ts(i, pi) * Q[i];
                const VectorX Mx = apply_M(x);
                const double nrm = std::sqrt(x.dot(Mx));
                run.vectors.push_back(x / std::max(nrm, 1e-300));
            }
            return run;
        }
        betas.push_back(bnew);
        q = w / bnew;
        Mq = Mw / bnew;
    }
    return run;
}

}  // namespace

EigenPairs lanczos_smallest(const LinOp& solve_A, const LinOp& apply_M, const LinOp& apply_A,
                            Index n, const LanczosOptions& opts) {
    std::mt19937 rng(opts.seed);
    // deflation list stored flat as [q0, Mq0, q1, Mq1, ...] with q M-orthonormal
    std::vector<VectorX> defl;
    auto add_deflation = [&](VectorX v) {
        for (size_t i = 0; i < defl.size(); i += 2) v -= defl[i + 1].dot(v) * defl[i];
        for (size_t i = 0; i < defl.size(); i += 2) v -= defl[i + 1].dot(v) * defl[i];
        VectorX Mv = apply_M(v);
        const double nrm = std::sqrt(v.dot(Mv));
        if (nrm < 1e-12) return false;
        defl.push_back(v / nrm);
        defl.push_back(Mv / nrm);
        return true;
    };
    for (const auto& z : opts.deflation) add_deflation(z);

    std::vector<double> values;
    std::vector<VectorX> vectors;
    std::vector<double> si_res;
    bool converged = true;
    const int max_runs = 2 * opts.k + 4;
    for (int run_i = 0; run_i < max_runs && static_cast<int>(values.size()) < opts.k; ++run_i) {
        const int want = std::min(opts.k - static_cast<int>(values.size()), 4) + 2;
        LanczosRun run =
            lanczos_run(solve_A, apply_M, n, want, opts.tol, opts.max_steps, defl, rng);
        bool took_any = false;
        for (size_t i = 0; i < run.theta.size() && static_cast<int>(values.size()) < opts.k; ++i) {
            const double th = run.theta[i];
            const double res = run.si_residuals[i];
            if (!(res <= opts.tol * std::max(std::abs(th), 1e-14))) continue;
            if (std::abs(th) < 1e-300) continue;
            values.push_back(1.0 / th);
            vectors.push_back(run.vectors[i]);
            si_res.push_back(res / std::max(std::abs(th), 1e-300));
            add_deflation(run.vectors[i]);
            took_any = true;
        }
        if (!took_any) {
            converged = false;
            break;
        }
    }
    if (static_cast<int>(values.size()) < opts.k) converged = false;

    // sort ascending by eigenvalue
    std::vector<int> order(values.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return values[a] < values[b]; });

    EigenPairs out;
    out.converged = converged;
    out.values.resize(static_cast<Index>(values.size()));
    out.residuals.resize(static_cast<Index>(values.size()));
    for (size_t i = 0; i < order.size(); ++i) {
        out.values[static_cast<Index>(i)] = values[order[i]];
        out.vectors.push_back(vectors[order[i]]);
        double res = si_res[order[i]];
        if (apply_A) {
            const VectorX& x = vectors[order[i]];
            const VectorX r = apply_A(x) - values[order[i]] * apply_M(x);
            res = r.norm();  // x is M-normalized
        }
        out.residuals[static_cast<Index>(i)] = res;
    }
    return out;
}

EigenPairs eigs_smallest(const SparseMatrix& A, const SparseMatrix& M, int k, double tol,
                         const std::vector<VectorX>& deflation) {
    IncompleteCholesky ic(A);
    const auto kernel = deflation;
    const LinOp solve_A = [&A, &ic, &kernel](const VectorX& b) {
        VectorX x;
        CgOptions o;
        o.tol = 1e-12;
        o.maxit = 10000;
        o.preconditioner = ic.op();
        o.deflation = kernel;
        cg_solve(A, b, x, o);
        return x;
    };
    LanczosOptions lo;
    lo.k = k;
    lo.tol = tol;
    lo.deflation = deflation;
    EigenPairs ep = lanczos_smallest(solve_A, as_op(M), as_op(A), A.rows(), lo);
    if (!ep.converged) throw SolverError("eigensolver did not converge to the requested count");
    return ep;
}

}  // namespace surfpde
