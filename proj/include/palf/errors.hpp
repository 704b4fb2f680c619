#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace palf {

// Base of every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// File missing, unreadable or unwritable.
class IoError : public Error {
 public:
  using Error::Error;
};

// File readable but its contents violate the documented format.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Too few usable points for a box fit; callers fall back to the seed box.
class DegenerateFit : public Error {
 public:
  using Error::Error;
};

class NotFound : public Error {
 public:
  using Error::Error;
};

// Frame files exist but cannot be loaded.
class UpstreamDataError : public Error {
 public:
  using Error::Error;
};

struct FieldIssue {
  int index = -1;  // element index within a list, -1 when not applicable
  std::string field;
  std::string message;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<FieldIssue> issues)
      : Error(summarize(issues)), issues_(std::move(issues)) {}

  const std::vector<FieldIssue>& issues() const { return issues_; }

 private:
  static std::string summarize(const std::vector<FieldIssue>& issues) {
    std::string out = "validation failed";
    for (const auto& issue : issues) {
      out += "; ";
      if (issue.index >= 0) out += "[" + std::to_string(issue.index) + "] ";
      out += issue.field + ": " + issue.message;
    }
    return out;
  }

  std::vector<FieldIssue> issues_;
};

}  // namespace palf
