#pragma once

#include <stdexcept>
#include <string>

namespace ivfg {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input shape or dimension does not match the configured model.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Operation called with arguments outside its contract.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Not enough identities/images for the requested operation.
class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

/// Manifest/blob mismatch, bad checksum or truncated file.
class CheckpointError : public Error {
 public:
  using Error::Error;
};

/// Pretraining finished without reaching its quality targets.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// An upstream artifact (dataset, checkpoint, virtual set) is missing.
class MissingArtifactError : public Error {
 public:
  using Error::Error;
};

}  // namespace ivfg
