#pragma once

#include "hdsweep/space.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <numeric>
#include <set>
#include <string>
#include <vector>

namespace hdsweep
{

/// One nonnegative building block of j(eta, .) once eta is fixed: either
/// c * v_i^+ for a single coordinate, or c * ||v_block||_2.
struct FunctionalTerm
{
    enum class Shape
    {
        PositivePart,
        BlockNorm,
    };
    Shape shape;
    std::vector<Index> coords;
    double coefficient;
};

/// Parametric functional j(eta, v), convex and positively homogeneous in v.
///
/// Supported kinds:
///  - Zero:                 j = 0
///  - WeightedPositivePart: j(eta, v) = sum_i w_i eta_i (v_{c_i})^+
///  - WeightedBlockNorm:    j(eta, v) = sum_b w_b eta_b ||v_{B_b}||
///  - Separable:            j(eta, v) = p(eta) q(v) with q a base functional at unit parameter
class HomogeneousFunctional
{
public:
    enum class Kind
    {
        Zero,
        WeightedPositivePart,
        WeightedBlockNorm,
        Separable,
    };

    using ScalarMap = std::function<double(const Vector&)>;

    static HomogeneousFunctional zero() { return HomogeneousFunctional(Kind::Zero); }

    static HomogeneousFunctional positive_part(std::vector<Index> coords, std::vector<double> weights)
    {
        detail::require(coords.size() == weights.size(), "positive_part: one weight per coordinate");
        HomogeneousFunctional j(Kind::WeightedPositivePart);
        for (std::size_t i = 0; i < coords.size(); ++i)
        {
            j.blocks_.push_back({coords[i]});
        }
        j.weights_ = std::move(weights);
        j.check_disjoint();
        return j;
    }

    static HomogeneousFunctional block_norm(std::vector<std::vector<Index>> blocks, std::vector<double> weights)
    {
        detail::require(blocks.size() == weights.size(), "block_norm: one weight per block");
        for (const auto& b : blocks)
        {
            detail::require(!b.empty(), "block_norm: empty block");
        }
        HomogeneousFunctional j(Kind::WeightedBlockNorm);
        j.blocks_ = std::move(blocks);
        j.weights_ = std::move(weights);
        j.check_disjoint();
        return j;
    }

    /// j(eta, v) = p(eta) q(v). `lip_p` is the Lipschitz constant of p with respect to
    /// ||.||_Y; q is evaluated with a unit parameter.
    static HomogeneousFunctional separable(ScalarMap p, double lip_p, HomogeneousFunctional q)
    {
        detail::require(q.kind() != Kind::Separable, "separable: base functional must not itself be separable");
        detail::require(lip_p >= 0.0, "separable: Lipschitz constant must be nonnegative");
        HomogeneousFunctional j(Kind::Separable);
        j.p_ = std::move(p);
        j.lip_p_ = lip_p;
        j.base_ = std::make_shared<const HomogeneousFunctional>(std::move(q));
        return j;
    }

    [[nodiscard]] Kind kind() const noexcept { return kind_; }

    [[nodiscard]] static const char* kind_name(Kind k)
    {
        switch (k)
        {
        case Kind::Zero: return "zero";
        case Kind::WeightedPositivePart: return "positive_part";
        case Kind::WeightedBlockNorm: return "block_norm";
        case Kind::Separable: return "separable";
        }
        return "?";
    }

    /// Expected length of eta; 0 means eta is never read.
    [[nodiscard]] Index parameter_dim() const noexcept
    {
        if (kind_ == Kind::WeightedPositivePart || kind_ == Kind::WeightedBlockNorm)
        {
            return static_cast<Index>(blocks_.size());
        }
        return 0;
    }

    [[nodiscard]] bool depends_on_parameter() const noexcept
    {
        return parameter_dim() > 0 || (kind_ == Kind::Separable && lip_p_ > 0.0);
    }

    /// Base functional q of a separable j; j itself otherwise.
    [[nodiscard]] const HomogeneousFunctional& base() const noexcept { return kind_ == Kind::Separable ? *base_ : *this; }
    [[nodiscard]] const std::vector<double>& weights() const noexcept { return weights_; }
    [[nodiscard]] const std::vector<std::vector<Index>>& blocks() const noexcept { return blocks_; }

    /// All coordinates of v that j reads.
    [[nodiscard]] std::vector<Index> coordinates() const
    {
        if (kind_ == Kind::Separable)
        {
            return base_->coordinates();
        }
        std::vector<Index> out;
        for (const auto& b : blocks_)
        {
            out.insert(out.end(), b.begin(), b.end());
        }
        std::sort(out.begin(), out.end());
        return out;
    }

    /// The terms of j(eta, .) with coefficients for this eta.
    [[nodiscard]] std::vector<FunctionalTerm> terms(const Vector& eta) const
    {
        std::vector<FunctionalTerm> out;
        switch (kind_)
        {
        case Kind::Zero: break;
        case Kind::WeightedPositivePart:
        case Kind::WeightedBlockNorm:
        {
            check_eta(eta);
            const auto shape = kind_ == Kind::WeightedPositivePart ? FunctionalTerm::Shape::PositivePart
                                                                   : FunctionalTerm::Shape::BlockNorm;
            for (std::size_t b = 0; b < blocks_.size(); ++b)
            {
                out.push_back({shape, blocks_[b], weights_[b] * eta(static_cast<Index>(b))});
            }
            break;
        }
        case Kind::Separable:
        {
            const double scale = p_(eta);
            out = base_->terms(Vector::Ones(base_->parameter_dim()));
            for (auto& t : out)
            {
                t.coefficient *= scale;
            }
            break;
        }
        }
        return out;
    }

    [[nodiscard]] double eval(const Vector& eta, const Vector& v) const
    {
        double sum = 0.0;
        for (const auto& t : terms(eta))
        {
            sum += t.coefficient * term_value(t, v);
        }
        return sum;
    }

    static double term_value(const FunctionalTerm& t, const Vector& v)
    {
        if (t.shape == FunctionalTerm::Shape::PositivePart)
        {
            return std::max(0.0, v(t.coords.front()));
        }
        double s = 0.0;
        for (Index i : t.coords)
        {
            s += v(i) * v(i);
        }
        return std::sqrt(s);
    }

    /// Same functional with eta frozen at `eta0`; the result ignores its parameter.
    [[nodiscard]] HomogeneousFunctional with_parameter(const Vector& eta0) const
    {
        switch (kind_)
        {
        case Kind::Zero: return zero();
        case Kind::WeightedPositivePart:
        case Kind::WeightedBlockNorm:
        {
            check_eta(eta0);
            HomogeneousFunctional q = *this;
            for (std::size_t b = 0; b < weights_.size(); ++b)
            {
                q.weights_[b] *= eta0(static_cast<Index>(b));
            }
            return separable([](const Vector&) { return 1.0; }, 0.0, q);
        }
        case Kind::Separable:
        {
            const double c = p_(eta0);
            return separable([c](const Vector&) { return c; }, 0.0, *base_);
        }
        }
        return zero();
    }

    /// Constant alpha_j with
    /// j(e1,v2) - j(e1,v1) + j(e2,v1) - j(e2,v2) <= alpha_j ||e1-e2||_Y ||v1-v2||_X.
    [[nodiscard]] double coupling_constant(const HilbertSpace& x, const HilbertSpace& y) const
    {
        switch (kind_)
        {
        case Kind::Zero: return 0.0;
        case Kind::WeightedPositivePart:
        case Kind::WeightedBlockNorm:
        {
            double wmax = 0.0;
            for (double w : weights_)
            {
                wmax = std::max(wmax, std::abs(w));
            }
            return wmax * trace_constant(x, coordinates()) / std::sqrt(y.min_eigenvalue());
        }
        case Kind::Separable: return lip_p_ * base_->base_lipschitz(x);
        }
        return 0.0;
    }

    /// Lipschitz constant of v -> j(1, v) on X.
    [[nodiscard]] double base_lipschitz(const HilbertSpace& x) const
    {
        if (kind_ == Kind::Zero)
        {
            return 0.0;
        }
        if (kind_ == Kind::Separable)
        {
            return 0.0;
        }
        double w2 = 0.0;
        for (double w : weights_)
        {
            w2 += w * w;
        }
        return std::sqrt(w2) * trace_constant(x, coordinates());
    }

    /// sup_v ||v_coords||_2 / ||v||_X.
    static double trace_constant(const HilbertSpace& x, const std::vector<Index>& coords)
    {
        if (coords.empty())
        {
            return 0.0;
        }
        const Matrix inv = x.cholesky().solve(Matrix::Identity(x.dim(), x.dim()));
        const auto n = static_cast<Index>(coords.size());
        Matrix sub(n, n);
        for (Index a = 0; a < n; ++a)
        {
            for (Index b = 0; b < n; ++b)
            {
                sub(a, b) = inv(coords[a], coords[b]);
            }
        }
        Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (sub + sub.transpose()), Eigen::EigenvaluesOnly);
        return std::sqrt(std::max(0.0, eig.eigenvalues().maxCoeff()));
    }

    /// Assumption-audit messages for a parameter value (negative coefficients break
    /// convexity of j(eta, .)).
    [[nodiscard]] std::vector<std::string> parameter_warnings(const Vector& eta) const
    {
        std::vector<std::string> out;
        for (const auto& t : terms(eta))
        {
            if (t.coefficient < 0.0)
            {
                out.push_back("negative coefficient " + std::to_string(t.coefficient)
                              + " in j(eta, .): the parameter must be nonnegative");
            }
        }
        return out;
    }

private:
    explicit HomogeneousFunctional(Kind k) : kind_(k) {}

    void check_eta(const Vector& eta) const
    {
        if (eta.size() != static_cast<Index>(blocks_.size()))
        {
            throw ContractViolation("HomogeneousFunctional: parameter of length " + std::to_string(eta.size())
                                    + ", expected " + std::to_string(blocks_.size()));
        }
    }

    void check_disjoint() const
    {
        std::set<Index> seen;
        for (const auto& b : blocks_)
        {
            for (Index i : b)
            {
                detail::require(i >= 0, "HomogeneousFunctional: negative coordinate");
                detail::require(seen.insert(i).second, "HomogeneousFunctional: blocks must be disjoint");
            }
        }
    }

    Kind kind_;
    std::vector<std::vector<Index>> blocks_;
    std::vector<double> weights_;
    ScalarMap p_;
    double lip_p_{0.0};
    std::shared_ptr<const HomogeneousFunctional> base_;
};

/// Free-function spelling of HomogeneousFunctional::eval.
inline double eval_j(const HomogeneousFunctional& j, const Vector& eta, const Vector& v) { return j.eval(eta, v); }

} // namespace hdsweep
