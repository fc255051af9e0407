#pragma once

#include <stdexcept>
#include <string>

namespace cfattr {

// Bad arguments, malformed requests, violated preconditions. CLI exit 1.
class InputError : public std::runtime_error {
 public:
  explicit InputError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed model/pair/dataset files. CLI exit 1.
class ParseError : public std::runtime_error {
 public:
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

// Problem too large for the requested exact path. CLI exit 2.
class CapacityError : public std::runtime_error {
 public:
  explicit CapacityError(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite model output or a failing evaluation.
class EvalError : public std::runtime_error {
 public:
  explicit EvalError(const std::string& what) : std::runtime_error(what) {}
};

// External predictor broke the request/response contract.
class ProtocolError : public std::runtime_error {
 public:
  explicit ProtocolError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace cfattr
