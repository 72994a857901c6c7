#pragma once

// SPD solvers for the discrete Laplacian: a sparse LDL^T factorization with
// iterative refinement (default) and Jacobi-preconditioned conjugate gradients.

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>

#include "gapcond/errors.hpp"

namespace gapcond {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Vector = Eigen::VectorXd;

enum class LinearSolverKind { direct, pcg };

struct SolverOptions {
    LinearSolverKind kind = LinearSolverKind::direct;
    double tolerance = 1e-10;   // relative residual ||b - Ax|| / ||b||
    int max_iterations = 0;     // pcg only; 0 means 20 * n
};

struct SolveStats {
    double relative_residual = 0.0;
    int iterations = 0;
};

namespace detail {

inline Vector residual(const SparseMatrix& A, const Vector& x, const Vector& b)
{
    // Accumulate A x in long double so refinement can push below double rounding of the product.
    Vector r(b.size());
    std::vector<long double> acc(static_cast<std::size_t>(b.size()), 0.0L);
    for (int col = 0; col < A.outerSize(); ++col)
        for (SparseMatrix::InnerIterator it(A, col); it; ++it)
            acc[static_cast<std::size_t>(it.row())] += static_cast<long double>(it.value()) * x[col];
    for (Eigen::Index i = 0; i < b.size(); ++i) r[i] = static_cast<double>(b[i] - acc[static_cast<std::size_t>(i)]);
    return r;
}

} // namespace detail

/// Eigen's conjugate gradients with the diagonal (Jacobi) preconditioner.
inline SolveStats pcg(const SparseMatrix& A, const Vector& b, Vector& x, double tol, int max_iter)
{
    const double bnorm = b.norm();
    x.setZero(b.size());
    if (bnorm == 0.0) return {0.0, 0};
    Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper, Eigen::DiagonalPreconditioner<double>> cg;
    cg.setTolerance(tol);
    cg.setMaxIterations(max_iter);
    cg.compute(A);
    x = cg.solve(b);
    return {detail::residual(A, x, b).norm() / bnorm, static_cast<int>(cg.iterations())};
}

/// Owns the operator and, for the direct kind, its factorization so several
/// right-hand sides share one factorization.
class SpdSolver {
public:
    SpdSolver(SparseMatrix A, SolverOptions opt) : A_(std::move(A)), opt_(opt)
    {
        if (opt_.kind == LinearSolverKind::direct) {
            ldlt_ = std::make_unique<Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>>>();
            ldlt_->compute(A_);
            if (ldlt_->info() != Eigen::Success) throw SolverError("sparse LDL^T factorization failed");
        }
    }

    const SparseMatrix& matrix() const { return A_; }

    Vector solve(const Vector& b, SolveStats* stats = nullptr) const
    {
        Vector x;
        SolveStats s;
        const double bnorm = b.norm();
        if (bnorm == 0.0) {
            x.setZero(b.size());
        } else if (opt_.kind == LinearSolverKind::direct) {
            x = ldlt_->solve(b);
            Vector r = detail::residual(A_, x, b);
            double rn = r.norm();
            for (int k = 0; k < 3 && rn > 0.0; ++k) {
                Vector trial = x + ldlt_->solve(r);
                Vector rt = detail::residual(A_, trial, b);
                if (!(rt.norm() < rn)) break;
                x = std::move(trial);
                r = std::move(rt);
                rn = r.norm();
                s.iterations = k + 1;
            }
            s.relative_residual = rn / bnorm;
        } else {
            const int max_it = opt_.max_iterations > 0 ? opt_.max_iterations : static_cast<int>(20 * b.size());
            s = pcg(A_, b, x, opt_.tolerance, max_it);
        }
        if (!(s.relative_residual <= opt_.tolerance))
            throw SolverError("linear solve did not converge: relative residual " + std::to_string(s.relative_residual));
        if (stats) *stats = s;
        return x;
    }

private:
    SparseMatrix A_;
    SolverOptions opt_;
    std::unique_ptr<Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>>> ldlt_;
};

} // namespace gapcond
