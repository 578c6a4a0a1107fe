#pragma once

#include <vector>

namespace alip {

// Scalar Bezier curve in Bernstein form over s in [0, 1].
// Order M = coefficients().size() - 1.  Order 0 (a constant) is permitted so
// that derivatives of linear curves stay representable; the trajectory store
// enforces order >= 1 for stored curves.
class BezierCurve {
public:
    explicit BezierCurve(std::vector<double> coefficients);

    int order() const { return static_cast<int>(coeffs_.size()) - 1; }
    const std::vector<double>& coefficients() const { return coeffs_; }

    // de Casteljau evaluation; s must lie in [0, 1] (no extrapolation).
    double evaluate(double s) const;

    // Curve of order M-1 with coefficients M*(a_{k+1} - a_k); for an order-0
    // input returns the zero constant curve.
    BezierCurve derivative() const;

    // Pull the first k interior control points toward a_0 by fraction lambda:
    // a'_j = a_j + lambda*(a_0 - a_j), j in {1..k}.  Endpoints unchanged.
    BezierCurve retime_hold_start(int k, double lambda) const;

    bool operator==(const BezierCurve& other) const { return coeffs_ == other.coeffs_; }

private:
    std::vector<double> coeffs_;
};

}  // namespace alip
