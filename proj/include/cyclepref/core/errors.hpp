#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace cyclepref {

// Root of every error raised by the library. Violations that are "data"
// (validate_pair, validate_config) are returned, not thrown.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidInput : public Error {
 public:
  using Error::Error;
};

// Backend could not be reached. Carries how many attempts were made so the
// caller can decide whether to retry later.
class TransportError : public Error {
 public:
  TransportError(const std::string& what, int attempts, bool retryable)
      : Error(what), attempts_(attempts), retryable_(retryable) {}
  int attempts() const { return attempts_; }
  bool retryable() const { return retryable_; }

 private:
  int attempts_;
  bool retryable_;
};

// Backend was reached but refused or failed the request.
class GenerationError : public Error {
 public:
  GenerationError(const std::string& what, std::string backend_message)
      : Error(what), backend_message_(std::move(backend_message)) {}
  const std::string& backend_message() const { return backend_message_; }

 private:
  std::string backend_message_;
};

class CapacityError : public Error {
 public:
  using Error::Error;
};

class ScoringError : public Error {
 public:
  ScoringError(const std::string& what, std::vector<std::int64_t> failed_seeds)
      : Error(what), failed_seeds_(std::move(failed_seeds)) {}
  const std::vector<std::int64_t>& failed_seeds() const { return failed_seeds_; }

 private:
  std::vector<std::int64_t> failed_seeds_;
};

// log(0) requested; factor names which probability vanished.
class UndefinedLog : public Error {
 public:
  UndefinedLog(const std::string& what, std::string factor)
      : Error(what), factor_(std::move(factor)) {}
  const std::string& factor() const { return factor_; }

 private:
  std::string factor_;
};

class RegistrationError : public Error {
 public:
  using Error::Error;
};

class UndefinedMetric : public Error {
 public:
  using Error::Error;
};

class InferenceError : public Error {
 public:
  using Error::Error;
};

class TrainingDiverged : public Error {
 public:
  TrainingDiverged(const std::string& what, std::size_t step, std::vector<std::size_t> batch_ids)
      : Error(what), step_(step), batch_ids_(std::move(batch_ids)) {}
  std::size_t step() const { return step_; }
  const std::vector<std::size_t>& batch_ids() const { return batch_ids_; }

 private:
  std::size_t step_;
  std::vector<std::size_t> batch_ids_;
};

}  // namespace cyclepref
