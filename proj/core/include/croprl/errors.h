// Copyright 2026 The CropRL Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CROPRL_ERRORS_H_
#define CROPRL_ERRORS_H_

#include <stdexcept>
#include <string>

namespace croprl {

// Base of every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A caller broke a documented precondition.
class ContractViolation : public Error {
 public:
  using Error::Error;
};

// Bad configuration: wrong shapes, unparsable files, invalid values.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf where finite numbers are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Malformed wire line.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

// Well-formed wire line with the wrong shape (e.g. observation length).
class SchemaError : public ProtocolError {
 public:
  using ProtocolError::ProtocolError;
};

// Remote environment session failures: timeouts, peer errors, dropped links.
class SessionError : public Error {
 public:
  using Error::Error;
};

// Version negotiation failed.
class HandshakeError : public SessionError {
 public:
  using SessionError::SessionError;
};

}  // namespace croprl

#endif  // CROPRL_ERRORS_H_
