/* Copyright 2026 The eegctc Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#ifndef EEGCTC_ERRORS_HPP_
#define EEGCTC_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace eegctc {

// Tensor extents disagree with what an operation needs.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A model, layer or generator was configured with values it cannot honor.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Bad call arguments that are not a shape problem (empty sequences, ...).
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Call sequencing error, e.g. backward without a cached forward pass.
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// NaN/Inf where a finite value was required.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A computation would exceed a hard work bound.
class ResourceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Binary container could not be decoded.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MalformedHeaderError : public ParseError {
 public:
  using ParseError::ParseError;
};

class TruncatedPayloadError : public ParseError {
 public:
  using ParseError::ParseError;
};

class InconsistentShapeError : public ParseError {
 public:
  using ParseError::ParseError;
};

// Decoded fine but violates a content rule (no classes, empty class, ...).
class ValidationError : public ParseError {
 public:
  using ParseError::ParseError;
};

// Thrown by the training loop and CLI when the filesystem refuses us.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace eegctc

#endif  // EEGCTC_ERRORS_HPP_
