#pragma once

#include <stdexcept>
#include <string>

namespace virtstain {

// Exit-code mapping used by the CLI: UsageError -> 1, DataError -> 2,
// NumericalError -> 3. Library code throws, tools translate.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad flags, bad config keys, incompatible model/config combinations.
class UsageError : public Error {
 public:
  explicit UsageError(const std::string& msg) : Error(msg) {}
};

// Missing or malformed files, shape mismatches, out-of-range rasters.
class DataError : public Error {
 public:
  explicit DataError(const std::string& msg) : Error(msg) {}
};

// Non-finite values in losses or samplers; message carries the batch/step.
class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& msg) : Error(msg) {}
};

// Segmentation / feature backend failures; message carries the patch key.
class BackendError : public Error {
 public:
  explicit BackendError(const std::string& msg) : Error(msg) {}
};

}  // namespace virtstain
