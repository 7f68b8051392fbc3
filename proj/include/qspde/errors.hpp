#pragma once

#include <stdexcept>
#include <string>

namespace qspde {

/// Invalid configuration value or violated parameter condition.
struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Operator assembly rejected a diffusion block (non-finite entries, or an
/// indefinite block when the model demands definiteness).
struct AssemblyError : std::runtime_error {
    int edge;
    AssemblyError(const std::string& msg, int edge_)
        : std::runtime_error(msg), edge(edge_) {}
};

/// Linear-solve or propagator failure inside a time stepper.
struct SolverError : std::runtime_error {
    int step;
    SolverError(const std::string& msg, int step_)
        : std::runtime_error(msg), step(step_) {}
};

/// State norm crossed the blow-up guard (finite-lifetime surrogate).
struct BlowUpError : SolverError {
    using SolverError::SolverError;
};

} // namespace qspde
