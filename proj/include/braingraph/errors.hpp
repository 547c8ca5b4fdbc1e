#pragma once

#include <stdexcept>
#include <string>

namespace braingraph {

// Shape or rank mismatch between operands.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Caller violated a documented precondition (wrong graph kind, non-scalar loss, ...).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Invalid user-supplied parameters or experiment settings.
class ConfigurationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Non-finite loss, gradient or intermediate during training.
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A file referenced by a manifest could not be read.
class IngestionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Files disagree on layout (column counts, headers).
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// File contents are malformed or non-finite.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MetricError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Every grid point of a hyperparameter search aborted.
class SearchError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace braingraph
