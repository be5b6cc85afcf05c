#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>

namespace opacity {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Raised when a model document or constructor argument violates a model invariant.
class ModelError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The supplied observation sequence has zero probability under the model,
/// so no posterior over the secret exists.
class DegenerateEvidence : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Full enumeration of the observation space would exceed the configured cap.
class EnumerationCapExceeded : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A computed quantity left its mathematically admissible range.
class InvariantViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Configuration or document parse failure; `where` names the offending field or line.
class ParseError : public std::runtime_error {
public:
    ParseError(std::string where, const std::string& what)
        : std::runtime_error(where + ": " + what), where_(std::move(where)) {}
    const std::string& where() const { return where_; }

private:
    std::string where_;
};

}  // namespace opacity
