#pragma once

#include <stdexcept>
#include <string>

namespace dgne {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// graph
class SelfLoop : public Error {
 public:
  using Error::Error;
};
class DuplicateEdge : public Error {
 public:
  using Error::Error;
};
class NotWeaklyConnected : public Error {
 public:
  using Error::Error;
};
class EigenSolverFailure : public Error {
 public:
  using Error::Error;
};

// game
class CustomSplitSumMismatch : public Error {
 public:
  using Error::Error;
};
class InvalidGame : public Error {
 public:
  using Error::Error;
};

// splitting
class NonpositiveMargin : public Error {
 public:
  using Error::Error;
};
class LocalArgminFailure : public Error {
 public:
  using Error::Error;
};
class NegativeQuadraticForm : public Error {
 public:
  using Error::Error;
};

// cournot
class InvalidInterval : public Error {
 public:
  using Error::Error;
};
class NonPositiveEta : public Error {
 public:
  using Error::Error;
};
class SearchCeilingExceeded : public Error {
 public:
  using Error::Error;
};

// oracle
class NoConvergence : public Error {
 public:
  using Error::Error;
};
class GridTooCoarse : public Error {
 public:
  using Error::Error;
};
class InfeasiblePoint : public Error {
 public:
  using Error::Error;
};

// cli
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace dgne
