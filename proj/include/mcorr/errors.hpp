#pragma once

#include <stdexcept>
#include <string>

namespace mcorr {

/// Base of every error raised by the library. The category drives CLI exit codes.
class Error : public std::runtime_error {
public:
    enum class Category { Validation, Io, Numerical };

    Error(Category category, const std::string& what)
        : std::runtime_error(what), category_(category) {}

    Category category() const noexcept { return category_; }

private:
    Category category_;
};

/// Bad parameters, malformed input files, non-conformable blocks.
class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& what) : Error(Category::Validation, what) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error(Category::Io, what) {}
};

/// Estimation could not proceed on the data it was given.
class NumericalError : public Error {
public:
    enum class Kind {
        DegenerateDirection,   // beta' Phi beta ~ 0: no microbial signal
        SingularPhi,           // Phi-hat above the condition-number threshold
        AllTruncated,          // every density estimate fell below the cutoff
        VanishingDenominator,  // kernel weights summed to zero at some point
        Inconsistent           // invariant broken beyond round-off
    };

    NumericalError(Kind kind, const std::string& what) : Error(Category::Numerical, what), kind_(kind) {}

    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

}  // namespace mcorr
