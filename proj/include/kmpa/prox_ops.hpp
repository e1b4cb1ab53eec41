#pragma once

#include <Eigen/Core>

namespace kmpa {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using VectorRef = Eigen::Ref<const Vector>;
using MatrixRef = Eigen::Ref<const Matrix>;

/// Box {x : x >= d} given by its componentwise lower bounds.
class LowerBoundSet {
public:
    explicit LowerBoundSet(Vector bounds);

    const Vector& bounds() const noexcept { return d_; }
    Index size() const noexcept { return d_.size(); }
    bool contains(const VectorRef& x) const;

private:
    Vector d_;
};

/// Weighted l1 on the leading `active_len` components; the rest pass through.
struct ScaledL1Spec {
    double weight = 0.0;
    Index active_len = 0;
};

/// max(|x| - lambda, 0) * sign(x), with sign(0) = 0.
double soft_threshold(double x, double lambda) noexcept;

Vector prox_partial_l1(const VectorRef& v, const ScaledL1Spec& spec);

/// In-place variant used by the solver's inner loop.
void prox_partial_l1_inplace(Eigen::Ref<Vector> v, const ScaledL1Spec& spec);

/// Projection onto the box: componentwise max(y, d).
Vector prox_indicator_lb(const VectorRef& y, const LowerBoundSet& d);

/// Prox of eta * (indicator of {x >= d})^* through the Moreau decomposition:
/// y - eta * max(y / eta, d).
Vector prox_conjugate_indicator(const VectorRef& y, const LowerBoundSet& d, double eta);

struct SpectralNormOptions {
    double tolerance = 1e-10;
    int max_iterations = 10000;
};

/// Largest singular value of M by power iteration on M^T M, started from the
/// normalized all-ones vector. Returns 0 for an all-zero matrix.
double spectral_norm(const MatrixRef& M, const SpectralNormOptions& options = {});

/// Power iteration underestimates; callers that turn a norm into a step size
/// inflate it by this factor first.
inline constexpr double kSpectralSafetyFactor = 1.0 + 1e-8;

}  // namespace kmpa
