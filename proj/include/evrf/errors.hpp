#pragma once

#include <stdexcept>
#include <string>

namespace evrf {

/// Invalid argument or violated precondition. Mapped to exit code 2 by the CLI.
class DomainError : public std::runtime_error {
public:
  explicit DomainError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Missing or corrupt file. Mapped to exit code 2 by the CLI.
class IoError : public std::runtime_error {
public:
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Non-finite value reached an optimizer or loss. Mapped to exit code 3.
class NumericalError : public std::runtime_error {
public:
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace evrf
