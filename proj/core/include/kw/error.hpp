#pragma once

#include <stdexcept>
#include <string>

namespace kw {

// Base class for every error thrown by the library.
struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Tensor / matrix dimension mismatch; messages name both offending shapes.
struct ShapeError : Error {
  using Error::Error;
};

// Partition or assignment infeasibility: a cell shape that does not divide a
// layer, a budget yielding a non-integral cell count, an assignment strategy
// that cannot be satisfied, a stale warehouse during backward.
struct PlanError : Error {
  using Error::Error;
};

// Config file parsing or validation failure (also covers empty manifests).
struct ConfigError : Error {
  using Error::Error;
};

// Out-of-range cell or layer index.
struct IndexError : Error {
  using Error::Error;
};

// Checkpoint I/O failure or corrupt file contents.
struct CheckpointError : Error {
  using Error::Error;
};

// Checkpoint whose topology hash does not match the configured model.
struct TopologyError : Error {
  using Error::Error;
};

// Training aborted (non-finite loss); message carries step/layer diagnostics.
struct TrainError : Error {
  using Error::Error;
};

}  // namespace kw
