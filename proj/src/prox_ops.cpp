#include "kmpa/prox_ops.hpp"

#include <cmath>
#include <string>

#include "kmpa/errors.hpp"

namespace kmpa {

LowerBoundSet::LowerBoundSet(Vector bounds) : d_(std::move(bounds)) {
    if (d_.size() < 1) throw InvalidConfig("LowerBoundSet: bounds must be nonempty");
    if (!d_.allFinite()) throw InvalidConfig("LowerBoundSet: bounds must be finite");
}

bool LowerBoundSet::contains(const VectorRef& x) const {
    if (x.size() != d_.size()) throw DimensionMismatch("LowerBoundSet::contains: size mismatch");
    return (x.array() >= d_.array()).all();
}

double soft_threshold(double x, double lambda) noexcept {
    const double shrunk = std::abs(x) - lambda;
    if (!(shrunk > 0.0)) return 0.0;
    return x > 0.0 ? shrunk : -shrunk;
}

void prox_partial_l1_inplace(Eigen::Ref<Vector> v, const ScaledL1Spec& spec) {
    if (spec.active_len < 0 || spec.active_len > v.size())
        throw DimensionMismatch("prox_partial_l1: active_len " + std::to_string(spec.active_len) +
                                " exceeds vector length " + std::to_string(v.size()));
    if (spec.weight < 0.0) throw InvalidConfig("prox_partial_l1: weight must be nonnegative");
    if (spec.weight == 0.0) return;
    for (Index i = 0; i < spec.active_len; ++i) v[i] = soft_threshold(v[i], spec.weight);
}

Vector prox_partial_l1(const VectorRef& v, const ScaledL1Spec& spec) {
    Vector out = v;
    prox_partial_l1_inplace(out, spec);
    return out;
}

Vector prox_indicator_lb(const VectorRef& y, const LowerBoundSet& d) {
    if (y.size() != d.size()) throw DimensionMismatch("prox_indicator_lb: size mismatch");
    return y.cwiseMax(d.bounds());
}

Vector prox_conjugate_indicator(const VectorRef& y, const LowerBoundSet& d, double eta) {
    if (!(eta > 0.0)) throw InvalidConfig("prox_conjugate_indicator: eta must be positive");
    if (y.size() != d.size()) throw DimensionMismatch("prox_conjugate_indicator: size mismatch");
    Vector out(y.size());
    for (Index i = 0; i < y.size(); ++i) {
        const double scaled = y[i] / eta;
        // y - eta * (y / eta) is zero in exact arithmetic; keep it exact
        out[i] = scaled >= d.bounds()[i] ? 0.0 : y[i] - eta * d.bounds()[i];
    }
    return out;
}

double spectral_norm(const MatrixRef& M, const SpectralNormOptions& options) {
    if (M.size() == 0) throw DimensionMismatch("spectral_norm: empty matrix");
    if (M.cwiseAbs().maxCoeff() == 0.0) return 0.0;

    const Index n = M.cols();
    Vector v = Vector::Ones(n) / std::sqrt(static_cast<double>(n));
    Vector w = M.transpose() * (M * v);
    // all-ones can sit in the null space (e.g. rows summing to zero)
    for (Index j = 0; w.squaredNorm() == 0.0 && j < n; ++j) {
        v = Vector::Unit(n, j);
        w = M.transpose() * (M * v);
    }

    double lambda = v.dot(w);
    for (int it = 0; it < options.max_iterations; ++it) {
        if ((w - lambda * v).norm() <= options.tolerance * lambda) break;
        v = w / w.norm();
        w.noalias() = M.transpose() * (M * v);
        lambda = v.dot(w);
    }
    return std::sqrt(std::max(lambda, 0.0));
}

}  // namespace kmpa
