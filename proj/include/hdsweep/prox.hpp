#pragma once

#include "hdsweep/cone.hpp"
#include "hdsweep/functional.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace hdsweep
{

/// argmin over v in K of 1/2 ||v - w||_X^2 + rho j(eta, v), in closed form.
///
/// Only the coordinates touched by K or j matter after eliminating the others
/// (harmonic extension); the map is exact when the metric's Schur complement on
/// those coordinates is diagonal, and constant across each norm block.
class ProximalMap
{
public:
    ProximalMap(ConstraintCone cone, HomogeneousFunctional j) : cone_(std::move(cone)), j_(std::move(j))
    {
        has_terms_ = !j_.coordinates().empty();
        if (!has_terms_)
        {
            return;
        }
        std::vector<Index> affected = j_.coordinates();
        affected.insert(affected.end(), cone_.coords().begin(), cone_.coords().end());
        reduction_ = std::make_shared<const SchurReduction>(schur_reduce(cone_.space(), affected));
        if (!ConstraintCone::is_diagonal(reduction_->schur))
        {
            throw UnsupportedConfiguration(
                "ProximalMap: the metric couples the coordinates carrying the cone constraint or the functional; "
                "only a diagonal reduced metric admits an exact proximal map");
        }
        for (std::size_t a = 0; a < reduction_->keep.size(); ++a)
        {
            slot_[reduction_->keep[a]] = static_cast<Index>(a);
        }
        for (Index i : cone_.coords())
        {
            constrained_[i] = cone_.kind();
        }
        // validate block structure once with a unit parameter; p is never evaluated here
        const HomogeneousFunctional& shape =
            j_.kind() == HomogeneousFunctional::Kind::Separable ? j_.base() : j_;
        if (shape.kind() == HomogeneousFunctional::Kind::WeightedBlockNorm)
        {
            for (const auto& t : shape.terms(Vector::Ones(shape.parameter_dim())))
            {
                validate_term(t);
            }
        }
    }

    [[nodiscard]] const ConstraintCone& cone() const noexcept { return cone_; }
    [[nodiscard]] const HomogeneousFunctional& functional() const noexcept { return j_; }

    [[nodiscard]] Vector operator()(const Vector& eta, double rho, const Vector& w) const
    {
        detail::require(rho > 0.0, "prox: rho must be positive");
        if (!has_terms_)
        {
            return cone_.project(w);
        }
        cone_.space().check(w, "prox");
        const SchurReduction& red = *reduction_;
        const auto nk = static_cast<Index>(red.keep.size());
        Vector xk(nk);
        for (Index a = 0; a < nk; ++a)
        {
            xk(a) = w(red.keep[a]);
        }
        Vector yk = xk;
        std::vector<bool> done(static_cast<std::size_t>(nk), false);

        for (const auto& t : j_.terms(eta))
        {
            validate_term(t);
            if (t.coefficient < 0.0)
            {
                throw UnsupportedConfiguration("prox: negative coefficient in j(eta, .) makes the problem nonconvex");
            }
            if (t.shape == FunctionalTerm::Shape::PositivePart)
            {
                const Index a = slot_.at(t.coords.front());
                const double tau = rho * t.coefficient / red.schur(a, a);
                const double x = xk(a);
                double y = x > tau ? x - tau : (x >= 0.0 ? 0.0 : x);
                yk(a) = clamp(t.coords.front(), y);
                done[static_cast<std::size_t>(a)] = true;
                continue;
            }
            // block shrinkage over the coordinates not pinned to zero
            double norm2 = 0.0;
            double s = 0.0;
            for (Index i : t.coords)
            {
                const Index a = slot_.at(i);
                s = red.schur(a, a);
                if (!pinned(i))
                {
                    norm2 += xk(a) * xk(a);
                }
            }
            const double nrm = std::sqrt(norm2);
            const double tau = rho * t.coefficient / s;
            const double factor = nrm > tau ? 1.0 - tau / nrm : 0.0;
            for (Index i : t.coords)
            {
                const Index a = slot_.at(i);
                yk(a) = pinned(i) ? 0.0 : factor * xk(a);
                done[static_cast<std::size_t>(a)] = true;
            }
        }
        for (Index a = 0; a < nk; ++a)
        {
            if (!done[static_cast<std::size_t>(a)])
            {
                yk(a) = clamp(red.keep[a], xk(a));
            }
        }
        return ConstraintCone::extend(w, red, xk, yk);
    }

private:
    [[nodiscard]] bool pinned(Index i) const
    {
        auto it = constrained_.find(i);
        return it != constrained_.end() && it->second == ConstraintCone::Kind::ZeroCoords;
    }

    // projection of a scalar onto the constraint of coordinate i
    [[nodiscard]] double clamp(Index i, double y) const
    {
        auto it = constrained_.find(i);
        if (it == constrained_.end())
        {
            return y;
        }
        switch (it->second)
        {
        case ConstraintCone::Kind::NonpositiveCoords: return std::min(y, 0.0);
        case ConstraintCone::Kind::NonnegativeCoords: return std::max(y, 0.0);
        case ConstraintCone::Kind::ZeroCoords: return 0.0;
        case ConstraintCone::Kind::WholeSpace: return y;
        }
        return y;
    }

    void validate_term(const FunctionalTerm& t) const
    {
        if (t.shape != FunctionalTerm::Shape::BlockNorm || t.coords.size() < 2)
        {
            return;
        }
        const SchurReduction& red = *reduction_;
        const double s0 = red.schur(slot_.at(t.coords.front()), slot_.at(t.coords.front()));
        for (Index i : t.coords)
        {
            const double s = red.schur(slot_.at(i), slot_.at(i));
            if (std::abs(s - s0) > 1e-12 * std::abs(s0))
            {
                throw UnsupportedConfiguration("prox: reduced metric is not a multiple of the identity on a norm block");
            }
            auto it = constrained_.find(i);
            if (it != constrained_.end() && it->second != ConstraintCone::Kind::ZeroCoords)
            {
                throw UnsupportedConfiguration("prox: sign constraint inside a norm block has no closed form");
            }
        }
    }

    ConstraintCone cone_;
    HomogeneousFunctional j_;
    bool has_terms_{false};
    std::shared_ptr<const SchurReduction> reduction_;
    std::map<Index, Index> slot_;
    std::map<Index, ConstraintCone::Kind> constrained_;
};

/// One-shot proximal map; builds the reduction on every call.
inline Vector prox_j_over_K(const HomogeneousFunctional& j, const Vector& eta, const ConstraintCone& cone, double rho,
                            const Vector& w)
{
    return ProximalMap(cone, j)(eta, rho, w);
}

} // namespace hdsweep
