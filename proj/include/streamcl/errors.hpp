#pragma once

#include <stdexcept>
#include <string>

namespace streamcl {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration, architecture, or strategy/memory combination.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class OutOfRangeError : public Error {
 public:
  using Error::Error;
};

/// Malformed bytes on the wire: bad magic, unknown kind, inconsistent lengths.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

/// The buffer holds only a prefix of a message; more bytes may complete it.
class IncompleteMessage : public Error {
 public:
  using Error::Error;
};

class SchedulerError : public Error {
 public:
  using Error::Error;
};

class TransportError : public Error {
 public:
  using Error::Error;
};

/// Non-finite gradient, loss, or parameter.
class NumericError : public Error {
 public:
  using Error::Error;
};

class CheckpointError : public Error {
 public:
  using Error::Error;
};

}  // namespace streamcl
