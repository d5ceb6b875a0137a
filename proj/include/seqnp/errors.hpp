#pragma once

#include <stdexcept>
#include <string>

namespace seqnp {

// Shape/dimension mismatch between tensors (messages name both shapes).
class ShapeError : public std::invalid_argument {
  public:
    explicit ShapeError(const std::string& what) : std::invalid_argument(what) {}
};

// Input outside the mathematical domain of an operation (log of <= 0, ...).
class DomainError : public std::domain_error {
  public:
    explicit DomainError(const std::string& what) : std::domain_error(what) {}
};

// A caller violated a documented precondition.
class ContractError : public std::logic_error {
  public:
    explicit ContractError(const std::string& what) : std::logic_error(what) {}
};

// Malformed input data; message carries a file/record locator.
class ParseError : public std::runtime_error {
  public:
    explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

// Filesystem / serialization failure; message names the path.
class IoError : public std::runtime_error {
  public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace seqnp
