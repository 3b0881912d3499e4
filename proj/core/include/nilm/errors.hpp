#pragma once

#include <stdexcept>
#include <string>

namespace nilm {

/// Root of every error the toolkit throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Incompatible tensor or series shapes.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// An input too small for the requested operation.
class SizeError : public Error {
 public:
  using Error::Error;
};

/// API misuse: empty inputs, backward on a non-scalar, bad arguments.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration document or field value.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Voltage scenario violations (out-of-bounds levels, duration mismatch).
class ScenarioError : public Error {
 public:
  using Error::Error;
};

/// Raw dataset could not be ingested.
class IngestionError : public Error {
 public:
  using Error::Error;
};

/// Filesystem failures unrelated to the content of a file.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Checkpoint could not be read back. `cause()` names the failing check.
class LoadError : public Error {
 public:
  enum class Cause { kIo, kMagic, kVersion, kTruncated, kChecksum, kConfig };

  LoadError(Cause cause, const std::string& what) : Error(what), cause_(cause) {}
  Cause cause() const noexcept { return cause_; }

 private:
  Cause cause_;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  DivergenceError(int epoch, int batch, const std::string& what)
      : Error(what), epoch_(epoch), batch_(batch) {}
  int epoch() const noexcept { return epoch_; }
  int batch() const noexcept { return batch_; }

 private:
  int epoch_;
  int batch_;
};

}  // namespace nilm
