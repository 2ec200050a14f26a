#pragma once
#include <stdexcept>
#include <string>

namespace rws {

struct RwsError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ShapeError : RwsError {
  using RwsError::RwsError;
};

struct ParseError : RwsError {
  using RwsError::RwsError;
};

struct ConfigError : RwsError {
  using RwsError::RwsError;
};

// Enumeration refused above the bit budget (2^bits blow-up guard).
struct BudgetError : RwsError {
  using RwsError::RwsError;
};

struct CheckpointVersionError : RwsError {
  using RwsError::RwsError;
};

// Missing or truncated array file.
struct CheckpointDataError : RwsError {
  using RwsError::RwsError;
};

// Manifest/array shape disagreement.
struct CheckpointShapeError : RwsError {
  using RwsError::RwsError;
};

}  // namespace rws
