#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace screenlab {

/// Base class for every error raised by the library. The CLI maps these to
/// exit code 1; anything else escaping is a bug.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of a function (x <= 0 for
/// digamma, a zero vector for cosine similarity, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A record or value violates a data-model invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Too few observations for the requested estimate. Carries the subject
/// (phrase group, genre, film) so batch callers can report which one.
class InsufficientDataError : public Error {
 public:
  InsufficientDataError(std::string subject, std::size_t have, std::size_t need);

  const std::string& subject() const noexcept { return subject_; }
  std::size_t have() const noexcept { return have_; }
  std::size_t need() const noexcept { return need_; }

 private:
  std::string subject_;
  std::size_t have_;
  std::size_t need_;
};

class DegenerateDesignError : public Error {
 public:
  using Error::Error;
};

enum class DiagnosticKind { parse, referential, validation };

const char* to_string(DiagnosticKind kind) noexcept;

struct Diagnostic {
  DiagnosticKind kind;
  std::string file;
  std::size_t line;  // 1-based; 0 when the problem is not tied to a line
  std::string message;
};

/// Raised by corpus ingestion after the whole input has been scanned, so
/// every offending line is reported at once.
class CorpusError : public Error {
 public:
  explicit CorpusError(std::vector<Diagnostic> diagnostics);

  const std::vector<Diagnostic>& diagnostics() const noexcept { return diagnostics_; }

 private:
  std::vector<Diagnostic> diagnostics_;
};

}  // namespace screenlab
