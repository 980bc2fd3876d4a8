#pragma once

#include <stdexcept>
#include <string>

namespace lowpopart {

/// Precondition or invariant violation on a caller-supplied value.
class contract_error : public std::invalid_argument {
public:
    explicit contract_error(const std::string& what) : std::invalid_argument(what) {}
};

/// Shape mismatch between matrices/vectors.
class dimension_error : public contract_error {
public:
    explicit dimension_error(const std::string& what) : contract_error(what) {}
};

/// A matrix that must be inverted is numerically singular.
class singularity_error : public std::runtime_error {
public:
    explicit singularity_error(const std::string& what) : std::runtime_error(what) {}
};

/// Arm set does not span the ambient vectorized space.
class spanning_error : public contract_error {
public:
    explicit spanning_error(const std::string& what) : contract_error(what) {}
};

}  // namespace lowpopart
