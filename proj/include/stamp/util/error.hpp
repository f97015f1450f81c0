#pragma once

#include <stdexcept>
#include <string>

namespace stamp {

// Exit-code categories used by the CLI: config/usage errors, I/O errors and
// numerical failures map to distinct nonzero codes.
enum class ErrorKind { Validation = 2, Io = 3, Numerical = 4 };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& msg)
      : std::runtime_error(msg), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

struct ValidationError : Error {
  explicit ValidationError(const std::string& msg)
      : Error(ErrorKind::Validation, msg) {}
};

struct IoError : Error {
  explicit IoError(const std::string& msg) : Error(ErrorKind::Io, msg) {}
};

struct NumericalError : Error {
  explicit NumericalError(const std::string& msg)
      : Error(ErrorKind::Numerical, msg) {}
};

// Factorisation hit a non-positive pivot; `column` is in original indexing.
struct NotPositiveDefinite : NumericalError {
  explicit NotPositiveDefinite(int column)
      : NumericalError("matrix not positive definite at column " +
                       std::to_string(column)),
        column(column) {}
  int column;
};

struct NotChordal : NumericalError {
  NotChordal() : NumericalError("graph is not chordal") {}
};

struct SingularSeparator : NumericalError {
  explicit SingularSeparator(int clique)
      : NumericalError("singular separator block in clique " +
                       std::to_string(clique)),
        clique(clique) {}
  int clique;
};

struct DimensionMismatch : ValidationError {
  explicit DimensionMismatch(const std::string& msg)
      : ValidationError("dimension mismatch: " + msg) {}
};

struct NonFiniteMoment : NumericalError {
  NonFiniteMoment() : NumericalError("quadrature produced non-finite moments") {}
};

struct NewtonDiverged : NumericalError {
  NewtonDiverged() : NumericalError("univariate Newton iteration diverged") {}
};

struct ImproperTilted : NumericalError {
  ImproperTilted() : NumericalError("tilted distribution is not normalisable") {}
};

struct SupportTooLarge : ValidationError {
  explicit SupportTooLarge(int size)
      : ValidationError("row support too large for exact enumeration: " +
                        std::to_string(size)) {}
};

struct NegativeRate : NumericalError {
  explicit NegativeRate(int index)
      : NumericalError("gamma rate update became non-positive at index " +
                       std::to_string(index)) {}
};

struct MissingEntry : NumericalError {
  MissingEntry(int i, int j)
      : NumericalError("required covariance entry (" + std::to_string(i) +
                       "," + std::to_string(j) + ") not in computed pattern") {}
};

struct EventOutsideMesh : ValidationError {
  EventOutsideMesh(double x, double y)
      : ValidationError("event (" + std::to_string(x) + "," +
                        std::to_string(y) + ") is outside the mesh domain") {}
};

struct NotStable : ValidationError {
  NotStable() : ValidationError("transition matrix has spectral radius >= 1") {}
};

}  // namespace stamp
