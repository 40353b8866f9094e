#pragma once

#include <stdexcept>
#include <string>

namespace ctxprobe {

// Base for every error raised by the library. Callers that only need to
// report failures can catch this; the subclasses exist for the cases where
// the caller reacts differently (retry, skip the fact, exit code 2, ...).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Cloze/question template is malformed or missing a placeholder.
class TemplateError : public Error {
 public:
  using Error::Error;
};

// Relation has no natural-question template.
class MissingTemplate : public Error {
 public:
  using Error::Error;
};

class MissingEvidence : public Error {
 public:
  using Error::Error;
};

// No same-relation fact with a different answer and usable evidence.
class NoDonor : public Error {
 public:
  using Error::Error;
};

class QueryTooLong : public Error {
 public:
  using Error::Error;
};

// Structurally invalid input to a pure operation (bad mask count, empty
// vocabulary, mismatched keys, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Binary index or JSON file that cannot be decoded.
class FormatError : public Error {
 public:
  using Error::Error;
};

class BuildError : public Error {
 public:
  using Error::Error;
};

// Run configuration rejected before any work started.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Network-level failure talking to a remote scorer. Retryable.
class TransportError : public Error {
 public:
  using Error::Error;
};

// Remote scorer answered with something that violates the wire protocol.
// Never retried.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

}  // namespace ctxprobe
