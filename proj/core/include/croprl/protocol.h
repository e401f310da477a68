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

#ifndef CROPRL_PROTOCOL_H_
#define CROPRL_PROTOCOL_H_

#include <chrono>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "croprl/crop_env.h"

namespace croprl {

// Line-delimited JSON protocol between the trainer and an environment
// process. docs/protocol.md describes every field.
inline constexpr int kProtocolVersion = 1;

enum class MessageKind { kHello, kReset, kObservation, kStep, kOutcome, kError, kBye };

std::string_view ToString(MessageKind kind);

struct EnvMessage {
  MessageKind kind = MessageKind::kHello;
  int version = kProtocolVersion;  // hello
  std::uint64_t seed = 0;          // reset
  int action = 0;                  // step
  Observation observation{};       // observation, outcome
  double reward = 0.0;             // outcome
  bool done = false;               // outcome
  StepInfo info;                   // outcome
  std::string message;             // error

  static EnvMessage Hello() { return {}; }
  static EnvMessage Reset(std::uint64_t seed);
  static EnvMessage ObservationOf(const Observation& obs);
  static EnvMessage Step(int action);
  static EnvMessage Outcome(const StepOutcome& outcome);
  static EnvMessage Error(std::string message);
  static EnvMessage Bye();

  StepOutcome ToOutcome() const;

  friend bool operator==(const EnvMessage&, const EnvMessage&) = default;
};

// One JSON object, no trailing newline.
std::string Encode(const EnvMessage& message);
// Throws ProtocolError for malformed JSON, unknown kinds or missing fields,
// and SchemaError when an observation does not have 25 entries.
EnvMessage Decode(std::string_view line);

class LineTransport {
 public:
  virtual ~LineTransport() = default;
  virtual void WriteLine(std::string_view line) = 0;
  // nullopt at end of stream; throws SessionError when `timeout` expires.
  virtual std::optional<std::string> ReadLine(std::chrono::milliseconds timeout) = 0;
};

// Answers protocol requests against an in-process environment.
class ProtocolServer {
 public:
  explicit ProtocolServer(Environment& env) : env_(env) {}

  // Responses to one request line (empty after bye).
  std::vector<std::string> Handle(std::string_view line);
  bool finished() const { return finished_; }

 private:
  Environment& env_;
  bool greeted_ = false;
  bool episode_open_ = false;
  bool finished_ = false;
};

// Serves requests from `in` until bye or end of input.
void ServeProtocol(std::istream& in, std::ostream& out, Environment& env);

// Transport to a ProtocolServer in the same process; used in tests and as a
// reference peer.
class LoopbackTransport : public LineTransport {
 public:
  explicit LoopbackTransport(std::unique_ptr<Environment> env);

  void WriteLine(std::string_view line) override;
  std::optional<std::string> ReadLine(std::chrono::milliseconds timeout) override;

 private:
  std::unique_ptr<Environment> env_;
  ProtocolServer server_;
  std::vector<std::string> pending_;
  std::size_t next_ = 0;
};

// Runs `command` under /bin/sh with its stdin and stdout connected to the
// transport.
class ChildProcessTransport : public LineTransport {
 public:
  explicit ChildProcessTransport(const std::string& command);
  ~ChildProcessTransport() override;
  ChildProcessTransport(const ChildProcessTransport&) = delete;
  ChildProcessTransport& operator=(const ChildProcessTransport&) = delete;

  void WriteLine(std::string_view line) override;
  std::optional<std::string> ReadLine(std::chrono::milliseconds timeout) override;

 private:
  int fd_ = -1;
  int pid_ = -1;
  std::string buffer_;
  bool eof_ = false;
};

// Environment backed by a protocol peer. The constructor performs the
// version handshake; the destructor sends bye.
class RemoteEnv : public Environment {
 public:
  explicit RemoteEnv(std::unique_ptr<LineTransport> transport,
                     std::chrono::milliseconds timeout = std::chrono::seconds(30));
  ~RemoteEnv() override;
  RemoteEnv(const RemoteEnv&) = delete;
  RemoteEnv& operator=(const RemoteEnv&) = delete;

  Observation Reset(std::uint64_t seed) override;
  StepOutcome Step(ActionChoice action) override;

  // False once the peer reported an error or vanished mid-episode; the
  // episode must then be discarded.
  bool episode_valid() const { return episode_valid_; }

 private:
  EnvMessage Exchange(const EnvMessage& request, MessageKind expected);

  std::unique_ptr<LineTransport> transport_;
  std::chrono::milliseconds timeout_;
  bool episode_valid_ = false;
  bool closed_ = false;
};

}  // namespace croprl

#endif  // CROPRL_PROTOCOL_H_
