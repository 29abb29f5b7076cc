#ifndef IMGHOP_ERRORS_HPP
#define IMGHOP_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace imghop {

// Base for everything thrown by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad user-supplied configuration: missing paths, invalid counts, invalid specs.
// The CLI maps these to exit code 2.
struct ConfigError : Error {
  using Error::Error;
};

// A dataset directory yielded no usable images.
struct EmptyDatasetError : ConfigError {
  using ConfigError::ConfigError;
};

// An API precondition was violated (shape mismatch, negative hop count, ...).
struct ContractError : Error {
  using Error::Error;
};

// A file on disk is damaged or not what it claims to be.
struct IntegrityError : Error {
  using Error::Error;
};

// A checkpoint was written by an unsupported format version.
struct UnsupportedVersionError : Error {
  using Error::Error;
};

// Training hit a non-finite loss and refuses to continue.
struct TrainingAbortError : Error {
  using Error::Error;
};

}  // namespace imghop

#endif  // IMGHOP_ERRORS_HPP
