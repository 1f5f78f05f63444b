#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace toposphere {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

/// Carries every violated invariant, not just the first.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<std::string> problems)
      : Error(join(problems)), problems_(std::move(problems)) {}
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  static std::string join(const std::vector<std::string>& items) {
    std::string out = "invalid profile:";
    for (const auto& s : items) out += " [" + s + "]";
    return out;
  }
  std::vector<std::string> problems_;
};

class ConvergenceError : public Error {
 public:
  using Error::Error;
};

class PoleCrossing : public Error {
 public:
  using Error::Error;
};

class ResolutionError : public Error {
 public:
  using Error::Error;
};

class NotACutPoint : public Error {
 public:
  using Error::Error;
};

class OutsideReferenceSpace : public Error {
 public:
  using Error::Error;
};

class UndefinedOnBoundary : public Error {
 public:
  using Error::Error;
};

class ExitedReferenceSpace : public Error {
 public:
  ExitedReferenceSpace(double t, double y)
      : Error("curve left the reference space at t=" + std::to_string(t) +
              ", y=" + std::to_string(y)),
        t_exit(t),
        y_exit(y) {}
  double t_exit;
  double y_exit;
};

class ProfileInconsistent : public Error {
 public:
  using Error::Error;
};

class NotAnEncounter : public Error {
 public:
  using Error::Error;
};

class DegenerateSide : public Error {
 public:
  using Error::Error;
};

class DegenerateTriangle : public Error {
 public:
  using Error::Error;
};

class NotFound : public Error {
 public:
  using Error::Error;
};

class NotNoncompact : public Error {
 public:
  using Error::Error;
};

}  // namespace toposphere
