#include "alip/bezier.hpp"

#include <cmath>
#include <string>

#include "alip/errors.hpp"

namespace alip {

BezierCurve::BezierCurve(std::vector<double> coefficients)
    : coeffs_(std::move(coefficients)) {
    if (coeffs_.empty())
        throw ParameterError("Bezier curve needs at least one coefficient");
    for (double c : coeffs_)
        if (!std::isfinite(c))
            throw InvalidStateError("Bezier coefficient is not finite");
}

double BezierCurve::evaluate(double s) const {
    if (!(s >= 0.0 && s <= 1.0))
        throw DomainError("Bezier parameter s=" + std::to_string(s) + " outside [0,1]");
    // de Casteljau on a stack buffer for the common small orders.
    constexpr int kStackCap = 16;
    double stack_buf[kStackCap] = {};
    std::vector<double> heap_buf;
    double* b;
    const int n = static_cast<int>(coeffs_.size());
    if (n <= kStackCap) {
        b = stack_buf;
    } else {
        heap_buf.resize(static_cast<size_t>(n));
        b = heap_buf.data();
    }
    for (int i = 0; i < n; ++i) b[i] = coeffs_[static_cast<size_t>(i)];
    for (int r = 1; r < n; ++r)
        for (int i = 0; i < n - r; ++i)
            b[i] = (1.0 - s) * b[i] + s * b[i + 1];
    return b[0];
}

BezierCurve BezierCurve::derivative() const {
    const int M = order();
    if (M == 0) return BezierCurve({0.0});
    std::vector<double> d(static_cast<size_t>(M));
    for (int k = 0; k < M; ++k)
        d[static_cast<size_t>(k)] =
            M * (coeffs_[static_cast<size_t>(k + 1)] - coeffs_[static_cast<size_t>(k)]);
    return BezierCurve(std::move(d));
}

BezierCurve BezierCurve::retime_hold_start(int k, double lambda) const {
    const int M = order();
    if (k < 0 || k > M - 1)
        throw ParameterError("retime_hold_start: k=" + std::to_string(k) +
                             " exceeds interior point count " + std::to_string(M - 1));
    if (!(lambda >= 0.0 && lambda <= 1.0))
        throw ParameterError("retime_hold_start: lambda outside [0,1]");
    std::vector<double> a = coeffs_;
    for (int j = 1; j <= k; ++j)
        a[static_cast<size_t>(j)] += lambda * (a[0] - a[static_cast<size_t>(j)]);
    return BezierCurve(std::move(a));
}

}  // namespace alip
