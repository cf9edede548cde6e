#pragma once

#include <stdexcept>
#include <string>

namespace tgt {

// Base for everything thrown by the library. The CLI maps these to exit codes.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// corpus
struct ParseError : Error {
  ParseError(const std::string& file, std::size_t line, const std::string& reason)
      : Error(file + ":" + std::to_string(line) + ": " + reason), line_number(line) {}
  std::size_t line_number;
};
struct DuplicateCaseId : Error {
  explicit DuplicateCaseId(const std::string& id) : Error("duplicate case_id: " + id) {}
};
struct MissingField : Error {
  using Error::Error;
};
struct EmptyCorpus : Error {
  EmptyCorpus() : Error("corpus is empty") {}
};

// knowledge
struct EmptyTrainSet : Error {
  EmptyTrainSet() : Error("no training reports supplied") {}
};
struct NoOrgansFound : Error {
  NoOrgansFound() : Error("no organ aliases matched any training report") {}
};
struct NoTrainCases : Error {
  NoTrainCases() : Error("corpus has no train-tagged cases") {}
};
struct UnknownOrgan : Error {
  explicit UnknownOrgan(const std::string& name) : Error("unknown organ: " + name) {}
};
struct LimitOutOfRange : Error {
  using Error::Error;
};

// backend
struct BackendError : Error {
  using Error::Error;
};
struct TransportError : BackendError {
  using BackendError::BackendError;
};
struct ProtocolError : BackendError {
  using BackendError::BackendError;
};
struct ImageLoadError : BackendError {
  using BackendError::BackendError;
};

// traversal
struct InvalidPermutation : Error {
  using Error::Error;
};

// metrics
struct LengthMismatch : Error {
  using Error::Error;
};

// analysis
struct EmptyRecords : Error {
  EmptyRecords() : Error("no permutation records") {}
};
struct NotAPermutation : Error {
  using Error::Error;
};
struct TooFewSamples : Error {
  using Error::Error;
};
struct PermutationCapExceeded : Error {
  using Error::Error;
};

// cli
struct ConfigError : Error {
  using Error::Error;
};
struct UnpairedCases : Error {
  using Error::Error;
};
struct MissingDatabase : Error {
  using Error::Error;
};

}  // namespace tgt
