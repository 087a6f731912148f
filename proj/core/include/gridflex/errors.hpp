#pragma once

#include <stdexcept>
#include <string>

namespace gridflex {

// Base class for everything thrown by the library. The three broad
// categories map onto distinct CLI exit codes: configuration problems
// (bad specs, unreadable files), infeasible planning requests, and
// runtime faults inside the engine.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// --- configuration / validation -------------------------------------------

struct ValidationError : Error {
  using Error::Error;
};

struct OverAllocatedError : ValidationError {
  using ValidationError::ValidationError;
};

struct DuplicateIdError : ValidationError {
  using ValidationError::ValidationError;
};

struct UnknownCurveClassError : ValidationError {
  using ValidationError::ValidationError;
};

struct InsufficientSamplesError : ValidationError {
  using ValidationError::ValidationError;
};

struct NonPositiveThroughputError : ValidationError {
  using ValidationError::ValidationError;
};

struct EmptyEventError : ValidationError {
  using ValidationError::ValidationError;
};

struct InvalidParamsError : ValidationError {
  using ValidationError::ValidationError;
};

// Load-series ingestion.
struct ParseError : ValidationError {
  using ValidationError::ValidationError;
};

struct NonUniformCadenceError : ValidationError {
  using ValidationError::ValidationError;
};

struct NonMonotoneTimeError : ValidationError {
  using ValidationError::ValidationError;
};

struct WindowTooLongError : ValidationError {
  using ValidationError::ValidationError;
};

struct InsufficientHistoryError : ValidationError {
  using ValidationError::ValidationError;
};

// --- planning --------------------------------------------------------------

// Thrown (or reported) when no SLA-safe assignment reaches the requested
// reduction. Carries the best the planner could have done so callers can
// surface it.
struct InfeasibleError : Error {
  InfeasibleError(const std::string& what, double requested_watts,
                  double max_achievable_watts)
      : Error(what),
        requested_watts(requested_watts),
        max_achievable_watts(max_achievable_watts) {}

  double requested_watts = 0.0;
  double max_achievable_watts = 0.0;
};

// --- simulation ------------------------------------------------------------

struct SimError : Error {
  using Error::Error;
};

struct ActionOnUnknownJobError : SimError {
  using SimError::SimError;
};

struct NegativeTimeError : SimError {
  using SimError::SimError;
};

struct EmptyTraceError : SimError {
  using SimError::SimError;
};

}  // namespace gridflex
