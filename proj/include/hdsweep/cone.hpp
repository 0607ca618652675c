#pragma once

#include "hdsweep/space.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <vector>

namespace hdsweep
{

/// Closed convex cone K in a HilbertSpace, described by sign or zero constraints
/// on a set of coordinates. Projection is metric-nearest, not a coordinate clamp,
/// unless the metric's Schur complement on the constrained coordinates is diagonal.
class ConstraintCone
{
public:
    enum class Kind
    {
        WholeSpace,
        NonpositiveCoords,
        NonnegativeCoords,
        ZeroCoords,
    };

    static ConstraintCone whole(SpacePtr space) { return {std::move(space), Kind::WholeSpace, {}}; }
    static ConstraintCone nonpositive(SpacePtr space, std::vector<Index> coords)
    {
        return {std::move(space), Kind::NonpositiveCoords, std::move(coords)};
    }
    static ConstraintCone nonnegative(SpacePtr space, std::vector<Index> coords)
    {
        return {std::move(space), Kind::NonnegativeCoords, std::move(coords)};
    }
    static ConstraintCone zero(SpacePtr space, std::vector<Index> coords)
    {
        return {std::move(space), Kind::ZeroCoords, std::move(coords)};
    }

    ConstraintCone(SpacePtr space, Kind kind, std::vector<Index> coords)
        : space_(std::move(space)), kind_(kind), coords_(std::move(coords))
    {
        detail::require(space_ != nullptr, "ConstraintCone: null space");
        std::sort(coords_.begin(), coords_.end());
        coords_.erase(std::unique(coords_.begin(), coords_.end()), coords_.end());
        for (Index i : coords_)
        {
            detail::require(i >= 0 && i < space_->dim(), "ConstraintCone: coordinate out of range");
        }
        if (kind_ == Kind::WholeSpace)
        {
            coords_.clear();
        }
        reduction_ = std::make_shared<const SchurReduction>(schur_reduce(*space_, coords_));
    }

    [[nodiscard]] Kind kind() const noexcept { return kind_; }
    [[nodiscard]] const std::vector<Index>& coords() const noexcept { return coords_; }
    [[nodiscard]] const HilbertSpace& space() const noexcept { return *space_; }
    [[nodiscard]] const SpacePtr& space_ptr() const noexcept { return space_; }
    [[nodiscard]] Index dim() const noexcept { return space_->dim(); }

    [[nodiscard]] static const char* kind_name(Kind k)
    {
        switch (k)
        {
        case Kind::WholeSpace: return "whole";
        case Kind::NonpositiveCoords: return "nonpositive";
        case Kind::NonnegativeCoords: return "nonnegative";
        case Kind::ZeroCoords: return "zero";
        }
        return "?";
    }

    /// Largest coordinate-wise constraint violation (0 inside K).
    [[nodiscard]] double violation(const Vector& x) const
    {
        space_->check(x, "ConstraintCone::violation");
        double v = 0.0;
        for (Index i : coords_)
        {
            switch (kind_)
            {
            case Kind::NonpositiveCoords: v = std::max(v, x(i)); break;
            case Kind::NonnegativeCoords: v = std::max(v, -x(i)); break;
            case Kind::ZeroCoords: v = std::max(v, std::abs(x(i))); break;
            case Kind::WholeSpace: break;
            }
        }
        return v;
    }

    [[nodiscard]] bool contains(const Vector& x, double tol = 0.0) const { return violation(x) <= tol; }

    /// True when the constraint can be handled coordinate by coordinate.
    [[nodiscard]] bool reduced_metric_diagonal() const { return is_diagonal(reduction_->schur); }

    [[nodiscard]] const SchurReduction& reduction() const noexcept { return *reduction_; }

    /// Metric-nearest point of K.
    [[nodiscard]] Vector project(const Vector& x) const
    {
        space_->check(x, "ConstraintCone::project");
        if (kind_ == Kind::WholeSpace || coords_.empty())
        {
            return x;
        }
        const SchurReduction& red = *reduction_;
        const auto nk = static_cast<Index>(red.keep.size());
        Vector xk(nk);
        for (Index a = 0; a < nk; ++a)
        {
            xk(a) = x(red.keep[a]);
        }
        Vector yk(nk);
        switch (kind_)
        {
        case Kind::ZeroCoords: yk.setZero(); break;
        case Kind::NonnegativeCoords: yk = project_nonneg(red.schur, xk); break;
        case Kind::NonpositiveCoords: yk = -project_nonneg(red.schur, -xk); break;
        case Kind::WholeSpace: yk = xk; break;
        }
        return extend(x, red, xk, yk);
    }

    /// Apply the keep-coordinate displacement yk - xk and its harmonic extension.
    static Vector extend(const Vector& x, const SchurReduction& red, const Vector& xk, const Vector& yk)
    {
        Vector y = x;
        const Vector dk = yk - xk;
        for (std::size_t a = 0; a < red.keep.size(); ++a)
        {
            y(red.keep[a]) = yk(static_cast<Index>(a));
        }
        if (!red.rest.empty() && dk.size() > 0)
        {
            const Vector dr = red.extension * dk;
            for (std::size_t r = 0; r < red.rest.size(); ++r)
            {
                y(red.rest[r]) += dr(static_cast<Index>(r));
            }
        }
        return y;
    }

    static bool is_diagonal(const Matrix& s)
    {
        if (s.size() == 0)
        {
            return true;
        }
        const double scale = s.diagonal().cwiseAbs().maxCoeff();
        Matrix off = s;
        off.diagonal().setZero();
        return off.cwiseAbs().maxCoeff() <= 1e-12 * scale;
    }

private:
    // argmin_{y >= 0} 1/2 (y - x)^T S (y - x)
    static Vector project_nonneg(const Matrix& s, const Vector& x)
    {
        const Index n = x.size();
        if (is_diagonal(s))
        {
            return x.cwiseMax(0.0);
        }
        if (n <= 16)
        {
            return enumerate_active_sets(s, x);
        }
        return gauss_seidel(s, x);
    }

    static Vector enumerate_active_sets(const Matrix& s, const Vector& x)
    {
        const Index n = x.size();
        const double scale = std::max(1.0, x.cwiseAbs().maxCoeff()) * s.diagonal().maxCoeff();
        const double tol = 1e-11 * scale;
        // enumerate by increasing active-set size so the common cases are found first
        for (Index active = 0; active <= n; ++active)
        {
            std::vector<bool> mask(static_cast<std::size_t>(n), false);
            std::fill(mask.begin(), mask.begin() + active, true);
            do
            {
                std::vector<Index> act, free;
                for (Index i = 0; i < n; ++i)
                {
                    (mask[static_cast<std::size_t>(i)] ? act : free).push_back(i);
                }
                Vector y = Vector::Zero(n);
                if (!free.empty())
                {
                    const auto nf = static_cast<Index>(free.size());
                    Matrix sff(nf, nf);
                    Vector rhs(nf);
                    for (Index a = 0; a < nf; ++a)
                    {
                        double r = 0.0;
                        for (Index b = 0; b < nf; ++b)
                        {
                            sff(a, b) = s(free[a], free[b]);
                        }
                        for (Index c : act)
                        {
                            r += s(free[a], c) * x(c);
                        }
                        rhs(a) = r;
                    }
                    const Vector corr = sff.llt().solve(rhs);
                    for (Index a = 0; a < nf; ++a)
                    {
                        y(free[a]) = x(free[a]) + corr(a);
                    }
                }
                const Vector lambda = s * (y - x);
                bool ok = true;
                for (Index i : free)
                {
                    ok = ok && y(i) >= -tol;
                }
                for (Index c : act)
                {
                    ok = ok && lambda(c) >= -tol;
                }
                if (ok)
                {
                    return y.cwiseMax(0.0);
                }
            } while (std::prev_permutation(mask.begin(), mask.end()));
        }
        return gauss_seidel(s, x);
    }

    static Vector gauss_seidel(const Matrix& s, const Vector& x)
    {
        Vector y = x.cwiseMax(0.0);
        for (int sweep = 0; sweep < 100000; ++sweep)
        {
            double change = 0.0;
            for (Index i = 0; i < x.size(); ++i)
            {
                const double g = s.row(i).dot(y - x);
                const double yi = std::max(0.0, y(i) - g / s(i, i));
                change = std::max(change, std::abs(yi - y(i)));
                y(i) = yi;
            }
            if (change <= 1e-15 * std::max(1.0, y.cwiseAbs().maxCoeff()))
            {
                break;
            }
        }
        return y;
    }

    SpacePtr space_;
    Kind kind_;
    std::vector<Index> coords_;
    std::shared_ptr<const SchurReduction> reduction_;
};

/// Free-function spelling of ConstraintCone::project.
inline Vector project(const ConstraintCone& cone, const Vector& x) { return cone.project(x); }

} // namespace hdsweep
