#ifndef BEC_ERRORS_HPP
#define BEC_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace bec {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shapes or geometries that do not match.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

class UnsupportedError : public Error {
 public:
  using Error::Error;
};

// A configured size cap would be exceeded.
class ResourceError : public Error {
 public:
  ResourceError(const std::string& what, std::size_t requested)
      : Error(what + " (requested " + std::to_string(requested) + ")"),
        requested_(requested) {}
  std::size_t requested() const { return requested_; }

 private:
  std::size_t requested_;
};

class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

// Two independent evaluation routes disagree.
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace bec

#endif  // BEC_ERRORS_HPP
