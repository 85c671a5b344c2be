#pragma once

#include <stdexcept>
#include <string>

namespace fpd {

// Error categories map one-to-one onto the CLI's machine-parsable prefixes.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& m) : std::runtime_error(m) {}
};

struct DataError : std::runtime_error {
  explicit DataError(const std::string& m) : std::runtime_error(m) {}
};

struct IoError : std::runtime_error {
  explicit IoError(const std::string& m) : std::runtime_error(m) {}
};

// A sample that fails preprocessing (e.g. empty segmentation mask); callers
// skip and log rather than abort the whole corpus build.
struct SampleRejected : std::runtime_error {
  explicit SampleRejected(const std::string& m) : std::runtime_error(m) {}
};

struct TrainingDiverged : std::runtime_error {
  explicit TrainingDiverged(const std::string& m) : std::runtime_error(m) {}
};

}  // namespace fpd
