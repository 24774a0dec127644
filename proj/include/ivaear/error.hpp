#pragma once

#include <stdexcept>
#include <string>

namespace ivaear {

// All library failures derive from Error so callers can catch one type and
// map the concrete subclass to an exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class DegenerateCovariance : public Error {
 public:
  using Error::Error;
};

class SimulationDiverged : public Error {
 public:
  using Error::Error;
};

class TrainingDiverged : public Error {
 public:
  using Error::Error;
};

class CheckpointFormatError : public Error {
 public:
  using Error::Error;
};

class UnsupportedVersion : public CheckpointFormatError {
 public:
  using CheckpointFormatError::CheckpointFormatError;
};

class DegenerateColumn : public Error {
 public:
  DegenerateColumn(const std::string& what, long column) : Error(what), column_(column) {}
  long column() const noexcept { return column_; }

 private:
  long column_;
};

class DegenerateDesign : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace ivaear
