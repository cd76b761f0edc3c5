#pragma once

#include <stdexcept>
#include <string>

namespace cholec {

// Invalid or inconsistent configuration, raised before anything runs.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A caller broke an operation's precondition (shape mismatch, step after done, ...).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class InvalidActionError : public ContractError {
 public:
  using ContractError::ContractError;
};

// Physics produced a non-finite vertex. Distinct from the task outcomes.
class SimulationDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A training loss or gradient became non-finite.
class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace cholec
