#pragma once

#include <stdexcept>
#include <string>

namespace lrd {

/// Shapes, ranks or modes that do not fit together.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// An inverse transform of data that should have been the spectrum of a real
/// tensor produced a non-negligible imaginary part.
class ImaginaryResidueTooLarge : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A per-frequency normal block could not be factorized.
class SingularBlock : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or truncated file contents.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace lrd
