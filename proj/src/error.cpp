#include "screenlab/error.hpp"

#include <sstream>

namespace screenlab {

namespace {

std::string describe_insufficient(const std::string& subject, std::size_t have, std::size_t need) {
  std::ostringstream os;
  os << "insufficient data for '" << subject << "': have " << have << ", need at least " << need;
  return os.str();
}

std::string describe_diagnostics(const std::vector<Diagnostic>& diagnostics) {
  std::ostringstream os;
  os << diagnostics.size() << " corpus error(s)";
  for (const auto& d : diagnostics) {
    os << "\n  " << d.file;
    if (d.line > 0) os << ":" << d.line;
    os << ": " << to_string(d.kind) << " error: " << d.message;
  }
  return os.str();
}

}  // namespace

InsufficientDataError::InsufficientDataError(std::string subject, std::size_t have, std::size_t need)
    : Error(describe_insufficient(subject, have, need)),
      subject_(std::move(subject)),
      have_(have),
      need_(need) {}

const char* to_string(DiagnosticKind kind) noexcept {
  switch (kind) {
    case DiagnosticKind::parse:
      return "parse";
    case DiagnosticKind::referential:
      return "referential";
    case DiagnosticKind::validation:
      return "validation";
  }
  return "unknown";
}

CorpusError::CorpusError(std::vector<Diagnostic> diagnostics)
    : Error(describe_diagnostics(diagnostics)), diagnostics_(std::move(diagnostics)) {}

}  // namespace screenlab
