#pragma once

#include "hdsweep/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

namespace hdsweep
{

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Finite-dimensional real Hilbert space: coordinates in R^dim with the inner
/// product (u, v) = u^T M v for a symmetric positive-definite metric M.
class HilbertSpace
{
public:
    explicit HilbertSpace(Matrix metric) : metric_(std::move(metric))
    {
        detail::require(metric_.rows() > 0 && metric_.rows() == metric_.cols(),
                        "HilbertSpace: metric must be a non-empty square matrix");
        const double scale = std::max(1.0, metric_.cwiseAbs().maxCoeff());
        const double asym = (metric_ - metric_.transpose()).cwiseAbs().maxCoeff();
        detail::require(asym <= 1e-12 * scale, "HilbertSpace: metric is not symmetric");
        metric_ = 0.5 * (metric_ + metric_.transpose());

        Eigen::SelfAdjointEigenSolver<Matrix> eig(metric_, Eigen::EigenvaluesOnly);
        min_eig_ = eig.eigenvalues().minCoeff();
        max_eig_ = eig.eigenvalues().maxCoeff();
        detail::require(min_eig_ > 0.0, "HilbertSpace: metric is not positive definite");
        llt_.compute(metric_);
    }

    static HilbertSpace euclidean(Index dim) { return HilbertSpace(Matrix::Identity(dim, dim)); }

    [[nodiscard]] Index dim() const noexcept { return metric_.rows(); }
    [[nodiscard]] const Matrix& metric() const noexcept { return metric_; }
    [[nodiscard]] double min_eigenvalue() const noexcept { return min_eig_; }
    [[nodiscard]] double max_eigenvalue() const noexcept { return max_eig_; }

    [[nodiscard]] double inner(const Vector& u, const Vector& v) const
    {
        check(u, "inner");
        check(v, "inner");
        return u.dot(metric_ * v);
    }

    [[nodiscard]] double norm(const Vector& u) const { return std::sqrt(std::max(0.0, inner(u, u))); }

    /// Riesz representative of a functional given by its coordinate (dual) vector b,
    /// i.e. the x with (x, v) = b^T v for all v.
    [[nodiscard]] Vector riesz(const Vector& dual) const
    {
        check(dual, "riesz");
        return llt_.solve(dual);
    }

    /// Coordinate (dual) vector of the functional v -> (x, v).
    [[nodiscard]] Vector lower(const Vector& x) const
    {
        check(x, "lower");
        return metric_ * x;
    }

    [[nodiscard]] const Eigen::LLT<Matrix>& cholesky() const noexcept { return llt_; }

    void check(const Vector& u, const char* where) const
    {
        if (u.size() != dim())
        {
            throw ContractViolation(std::string(where) + ": vector of length " + std::to_string(u.size())
                                    + " in a space of dimension " + std::to_string(dim()));
        }
    }

private:
    Matrix metric_;
    Eigen::LLT<Matrix> llt_;
    double min_eig_{0.0};
    double max_eig_{0.0};
};

using SpacePtr = std::shared_ptr<const HilbertSpace>;

inline SpacePtr make_space(Matrix metric) { return std::make_shared<const HilbertSpace>(std::move(metric)); }
inline SpacePtr euclidean_space(Index dim) { return std::make_shared<const HilbertSpace>(HilbertSpace::euclidean(dim)); }

/// (u, v)_X.
inline double inner(const HilbertSpace& space, const Vector& u, const Vector& v) { return space.inner(u, v); }

/// Product space Y x X with (theta1, theta2) = (eta1, eta2)_Y + (xi1, xi2)_X.
inline double product_norm(const HilbertSpace& y, const Vector& eta, const HilbertSpace& x, const Vector& xi)
{
    const double a = y.norm(eta);
    const double b = x.norm(xi);
    return std::sqrt(a * a + b * b);
}

/// Schur complement of the metric onto the coordinates `keep`, together with the
/// harmonic-extension operator E: minimising the quadratic d^T M d with d_keep fixed
/// gives d_rest = E d_keep and the value d_keep^T S d_keep.
struct SchurReduction
{
    std::vector<Index> keep;
    std::vector<Index> rest;
    Matrix schur;     // |keep| x |keep|
    Matrix extension; // |rest| x |keep|
};

inline SchurReduction schur_reduce(const HilbertSpace& space, std::vector<Index> keep)
{
    std::sort(keep.begin(), keep.end());
    keep.erase(std::unique(keep.begin(), keep.end()), keep.end());
    const Index n = space.dim();
    std::vector<bool> mark(static_cast<std::size_t>(n), false);
    for (Index i : keep)
    {
        detail::require(i >= 0 && i < n, "schur_reduce: coordinate out of range");
        mark[static_cast<std::size_t>(i)] = true;
    }
    SchurReduction out;
    out.keep = keep;
    for (Index i = 0; i < n; ++i)
    {
        if (!mark[static_cast<std::size_t>(i)])
        {
            out.rest.push_back(i);
        }
    }
    const auto nk = static_cast<Index>(out.keep.size());
    const auto nr = static_cast<Index>(out.rest.size());
    const Matrix& m = space.metric();
    Matrix mkk(nk, nk), mrk(nr, nk), mrr(nr, nr);
    for (Index a = 0; a < nk; ++a)
    {
        for (Index b = 0; b < nk; ++b)
        {
            mkk(a, b) = m(out.keep[a], out.keep[b]);
        }
        for (Index r = 0; r < nr; ++r)
        {
            mrk(r, a) = m(out.rest[r], out.keep[a]);
        }
    }
    for (Index r = 0; r < nr; ++r)
    {
        for (Index s = 0; s < nr; ++s)
        {
            mrr(r, s) = m(out.rest[r], out.rest[s]);
        }
    }
    if (nr > 0)
    {
        Eigen::LLT<Matrix> llt(mrr);
        out.extension = -llt.solve(mrk);
        out.schur = mkk + mrk.transpose() * out.extension;
    }
    else
    {
        out.extension = Matrix(0, nk);
        out.schur = mkk;
    }
    out.schur = 0.5 * (out.schur + out.schur.transpose());
    return out;
}

} // namespace hdsweep
