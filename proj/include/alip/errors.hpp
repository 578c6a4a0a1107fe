#pragma once

#include <stdexcept>
#include <string>

namespace alip {

// Base class for all library errors.
struct AlipError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Non-finite or otherwise unusable state/input values.
struct InvalidStateError : AlipError {
    using AlipError::AlipError;
};

// Violated numeric-parameter precondition (m <= 0, bad weights, ...).
struct ParameterError : AlipError {
    using AlipError::AlipError;
};

// Evaluation outside a function's documented domain (e.g. Bezier s outside [0,1]).
struct DomainError : AlipError {
    using AlipError::AlipError;
};

// Pendulum geometry broke down: non-positive length, or an impact whose
// arccos argument left [-1, 1].  Carries the offending value.
struct GeometryError : AlipError {
    GeometryError(const std::string& what, double offending)
        : AlipError(what), value(offending) {}
    double value;
};

// Euler step produced a non-finite state; carries the time of the step.
struct PropagationError : AlipError {
    PropagationError(const std::string& what, double when)
        : AlipError(what), t(when) {}
    double t;
};

// Text-format parse failure with 1-based line number.
struct ParseError : AlipError {
    ParseError(const std::string& what, int line_no)
        : AlipError(what + " (line " + std::to_string(line_no) + ")"), line(line_no) {}
    int line;
};

// Shooting failed to find a periodic orbit; carries the final residual.
struct NoOrbitError : AlipError {
    NoOrbitError(const std::string& what, double final_residual)
        : AlipError(what), residual(final_residual) {}
    double residual;
};

// Secant slope too flat to interpolate a foot placement.
struct DegenerateSlopeError : AlipError {
    using AlipError::AlipError;
};

// Placement prediction hit infeasible impact geometry; carries the candidate.
struct InfeasiblePlacementError : AlipError {
    InfeasiblePlacementError(const std::string& what, double candidate)
        : AlipError(what), y_candidate(candidate) {}
    double y_candidate;
};

// File or socket level failure.
struct IoError : AlipError {
    using AlipError::AlipError;
};

}  // namespace alip
