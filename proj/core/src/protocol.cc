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

#include "croprl/protocol.h"

#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <istream>
#include <ostream>
#include <thread>

#include "croprl/errors.h"
#include "json.hpp"

namespace croprl {
namespace {

using Json = nlohmann::json;

constexpr std::pair<MessageKind, std::string_view> kKindNames[] = {
    {MessageKind::kHello, "hello"},     {MessageKind::kReset, "reset"},
    {MessageKind::kObservation, "observation"}, {MessageKind::kStep, "step"},
    {MessageKind::kOutcome, "outcome"}, {MessageKind::kError, "error"},
    {MessageKind::kBye, "bye"},
};

MessageKind KindFromString(const std::string& text) {
  for (const auto& [kind, name] : kKindNames) {
    if (name == text) return kind;
  }
  throw ProtocolError("unknown message type '" + text + "'");
}

const Json& Field(const Json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ProtocolError(std::string("missing field '") + key + "'");
  return *it;
}

double NumberField(const Json& obj, const char* key) {
  const Json& v = Field(obj, key);
  if (!v.is_number()) throw ProtocolError(std::string("field '") + key + "' is not a number");
  return v.get<double>();
}

double OptionalNumber(const Json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) return 0.0;
  if (!it->is_number()) throw ProtocolError(std::string("field '") + key + "' is not a number");
  return it->get<double>();
}

bool BoolField(const Json& obj, const char* key) {
  const Json& v = Field(obj, key);
  if (!v.is_boolean()) throw ProtocolError(std::string("field '") + key + "' is not a boolean");
  return v.get<bool>();
}

Observation ObservationField(const Json& obj) {
  const Json& v = Field(obj, "obs");
  if (!v.is_array()) throw ProtocolError("field 'obs' is not an array");
  if (v.size() != kObservationSize) {
    throw SchemaError("observation has " + std::to_string(v.size()) + " entries, expected " +
                      std::to_string(kObservationSize));
  }
  Observation obs{};
  for (std::size_t i = 0; i < obs.size(); ++i) {
    if (!v[i].is_number()) throw SchemaError("observation entry is not a number");
    obs[i] = v[i].get<double>();
  }
  return obs;
}

std::int64_t IntegerField(const Json& obj, const char* key) {
  const Json& v = Field(obj, key);
  if (!v.is_number_integer()) {
    throw ProtocolError(std::string("field '") + key + "' is not an integer");
  }
  return v.get<std::int64_t>();
}

}  // namespace

std::string_view ToString(MessageKind kind) {
  for (const auto& [k, name] : kKindNames) {
    if (k == kind) return name;
  }
  return "error";
}

EnvMessage EnvMessage::Reset(std::uint64_t seed) {
  EnvMessage m;
  m.kind = MessageKind::kReset;
  m.seed = seed;
  return m;
}

EnvMessage EnvMessage::ObservationOf(const Observation& obs) {
  EnvMessage m;
  m.kind = MessageKind::kObservation;
  m.observation = obs;
  return m;
}

EnvMessage EnvMessage::Step(int action) {
  EnvMessage m;
  m.kind = MessageKind::kStep;
  m.action = action;
  return m;
}

EnvMessage EnvMessage::Outcome(const StepOutcome& outcome) {
  EnvMessage m;
  m.kind = MessageKind::kOutcome;
  m.observation = outcome.observation;
  m.reward = outcome.reward;
  m.done = outcome.done;
  m.info = outcome.info;
  return m;
}

EnvMessage EnvMessage::Error(std::string message) {
  EnvMessage m;
  m.kind = MessageKind::kError;
  m.message = std::move(message);
  return m;
}

EnvMessage EnvMessage::Bye() {
  EnvMessage m;
  m.kind = MessageKind::kBye;
  return m;
}

StepOutcome EnvMessage::ToOutcome() const {
  return {observation, reward, done, info};
}

std::string Encode(const EnvMessage& m) {
  Json j;
  j["type"] = std::string(ToString(m.kind));
  switch (m.kind) {
    case MessageKind::kHello:
      j["version"] = m.version;
      break;
    case MessageKind::kReset:
      j["seed"] = m.seed;
      break;
    case MessageKind::kObservation:
      j["obs"] = m.observation;
      break;
    case MessageKind::kStep:
      j["action"] = m.action;
      break;
    case MessageKind::kOutcome:
      j["obs"] = m.observation;
      j["reward"] = m.reward;
      j["done"] = m.done;
      j["info"] = {{"yield", m.info.yield},
                   {"leached", m.info.nitrate_leached},
                   {"nitrogen", m.info.nitrogen_applied},
                   {"irrigation", m.info.irrigation_applied},
                   {"harvest", m.info.harvest},
                   {"rainfall", m.info.rainfall},
                   {"et", m.info.evapotranspiration},
                   {"drainage", m.info.drainage}};
      break;
    case MessageKind::kError:
      j["message"] = m.message;
      break;
    case MessageKind::kBye:
      break;
  }
  return j.dump();
}

EnvMessage Decode(std::string_view line) {
  Json j;
  try {
    j = Json::parse(line);
  } catch (const Json::parse_error& e) {
    throw ProtocolError(std::string("malformed json: ") + e.what());
  }
  if (!j.is_object()) throw ProtocolError("message is not a json object");
  const Json& type = Field(j, "type");
  if (!type.is_string()) throw ProtocolError("field 'type' is not a string");

  EnvMessage m;
  m.kind = KindFromString(type.get<std::string>());
  switch (m.kind) {
    case MessageKind::kHello:
      m.version = static_cast<int>(IntegerField(j, "version"));
      break;
    case MessageKind::kReset: {
      const Json& seed = Field(j, "seed");
      if (!seed.is_number_integer() || (seed.is_number_integer() && !seed.is_number_unsigned() &&
                                        seed.get<std::int64_t>() < 0)) {
        throw ProtocolError("field 'seed' is not a non-negative integer");
      }
      m.seed = seed.get<std::uint64_t>();
      break;
    }
    case MessageKind::kObservation:
      m.observation = ObservationField(j);
      break;
    case MessageKind::kStep: {
      const std::int64_t a = IntegerField(j, "action");
      if (a < 0 || a >= kNumActions) {
        throw SchemaError("action " + std::to_string(a) + " is out of range");
      }
      m.action = static_cast<int>(a);
      break;
    }
    case MessageKind::kOutcome: {
      m.observation = ObservationField(j);
      m.reward = NumberField(j, "reward");
      m.done = BoolField(j, "done");
      const Json& info = Field(j, "info");
      if (!info.is_object()) throw ProtocolError("field 'info' is not an object");
      m.info.yield = NumberField(info, "yield");
      m.info.nitrate_leached = NumberField(info, "leached");
      m.info.nitrogen_applied = NumberField(info, "nitrogen");
      m.info.irrigation_applied = NumberField(info, "irrigation");
      m.info.harvest = BoolField(info, "harvest");
      m.info.rainfall = OptionalNumber(info, "rainfall");
      m.info.evapotranspiration = OptionalNumber(info, "et");
      m.info.drainage = OptionalNumber(info, "drainage");
      break;
    }
    case MessageKind::kError: {
      const Json& msg = Field(j, "message");
      if (!msg.is_string()) throw ProtocolError("field 'message' is not a string");
      m.message = msg.get<std::string>();
      break;
    }
    case MessageKind::kBye:
      break;
  }
  return m;
}

std::vector<std::string> ProtocolServer::Handle(std::string_view line) {
  auto error = [](const std::string& text) {
    return std::vector<std::string>{Encode(EnvMessage::Error(text))};
  };
  if (finished_) return error("session already closed");
  EnvMessage request;
  try {
    request = Decode(line);
  } catch (const ProtocolError& e) {
    return error(e.what());
  }
  switch (request.kind) {
    case MessageKind::kHello:
      if (request.version != kProtocolVersion) {
        return error("unsupported protocol version " + std::to_string(request.version));
      }
      greeted_ = true;
      return {Encode(EnvMessage::Hello())};
    case MessageKind::kBye:
      finished_ = true;
      return {};
    case MessageKind::kReset:
    case MessageKind::kStep:
      break;
    default:
      return error("unexpected message type '" + std::string(ToString(request.kind)) + "'");
  }
  if (!greeted_) return error("hello required before " + std::string(ToString(request.kind)));
  try {
    if (request.kind == MessageKind::kReset) {
      const Observation obs = env_.Reset(request.seed);
      episode_open_ = true;
      return {Encode(EnvMessage::ObservationOf(obs))};
    }
    if (!episode_open_) return error("step without an open episode");
    const StepOutcome outcome = env_.Step(ActionChoice::FromIndex(request.action));
    if (outcome.done) episode_open_ = false;
    return {Encode(EnvMessage::Outcome(outcome))};
  } catch (const Error& e) {
    episode_open_ = false;
    return error(e.what());
  }
}

void ServeProtocol(std::istream& in, std::ostream& out, Environment& env) {
  ProtocolServer server(env);
  std::string line;
  while (!server.finished() && std::getline(in, line)) {
    if (line.empty()) continue;
    for (const std::string& response : server.Handle(line)) out << response << '\n';
    out.flush();
  }
}

LoopbackTransport::LoopbackTransport(std::unique_ptr<Environment> env)
    : env_(std::move(env)), server_(*env_) {}

void LoopbackTransport::WriteLine(std::string_view line) {
  for (std::string& r : server_.Handle(line)) pending_.push_back(std::move(r));
}

std::optional<std::string> LoopbackTransport::ReadLine(std::chrono::milliseconds) {
  if (next_ < pending_.size()) {
    std::string line = std::move(pending_[next_++]);
    if (next_ == pending_.size()) {
      pending_.clear();
      next_ = 0;
    }
    return line;
  }
  if (server_.finished()) return std::nullopt;
  throw SessionError("loopback peer has nothing to send");
}

ChildProcessTransport::ChildProcessTransport(const std::string& command) {
  int fds[2];
  if (socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, fds) != 0) {
    throw SessionError(std::string("socketpair failed: ") + std::strerror(errno));
  }
  const pid_t pid = fork();
  if (pid < 0) {
    close(fds[0]);
    close(fds[1]);
    throw SessionError(std::string("fork failed: ") + std::strerror(errno));
  }
  if (pid == 0) {
    dup2(fds[1], STDIN_FILENO);
    dup2(fds[1], STDOUT_FILENO);
    execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  close(fds[1]);
  fd_ = fds[0];
  pid_ = pid;
}

ChildProcessTransport::~ChildProcessTransport() {
  if (fd_ >= 0) {
    shutdown(fd_, SHUT_WR);
    close(fd_);
  }
  if (pid_ > 0) {
    int status = 0;
    for (int i = 0; i < 200; ++i) {
      if (waitpid(pid_, &status, WNOHANG) == pid_) return;
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    kill(pid_, SIGKILL);
    waitpid(pid_, &status, 0);
  }
}

void ChildProcessTransport::WriteLine(std::string_view line) {
  std::string data(line);
  data.push_back('\n');
  std::size_t sent = 0;
  while (sent < data.size()) {
    const ssize_t n = send(fd_, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw SessionError(std::string("write to environment process failed: ") +
                         std::strerror(errno));
    }
    sent += static_cast<std::size_t>(n);
  }
}

std::optional<std::string> ChildProcessTransport::ReadLine(
    std::chrono::milliseconds timeout) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  while (true) {
    const std::size_t nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      return line;
    }
    if (eof_) {
      if (buffer_.empty()) return std::nullopt;
      std::string line;
      line.swap(buffer_);
      return line;
    }
    const auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (remaining.count() <= 0) {
      throw SessionError("environment process did not answer within " +
                         std::to_string(timeout.count()) + " ms");
    }
    pollfd pfd{fd_, POLLIN, 0};
    const int ready = poll(&pfd, 1, static_cast<int>(remaining.count()));
    if (ready < 0) {
      if (errno == EINTR) continue;
      throw SessionError(std::string("poll failed: ") + std::strerror(errno));
    }
    if (ready == 0) continue;
    char chunk[4096];
    const ssize_t n = recv(fd_, chunk, sizeof(chunk), 0);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw SessionError(std::string("read from environment process failed: ") +
                         std::strerror(errno));
    }
    if (n == 0) {
      eof_ = true;
    } else {
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }
}

RemoteEnv::RemoteEnv(std::unique_ptr<LineTransport> transport,
                     std::chrono::milliseconds timeout)
    : transport_(std::move(transport)), timeout_(timeout) {
  if (!transport_) throw ContractViolation("remote environment needs a transport");
  EnvMessage reply;
  try {
    reply = Exchange(EnvMessage::Hello(), MessageKind::kHello);
  } catch (const HandshakeError&) {
    throw;
  } catch (const Error& e) {
    throw HandshakeError(std::string("handshake failed: ") + e.what());
  }
  if (reply.version != kProtocolVersion) {
    throw HandshakeError("peer speaks protocol version " + std::to_string(reply.version));
  }
}

RemoteEnv::~RemoteEnv() {
  if (closed_) return;
  try {
    transport_->WriteLine(Encode(EnvMessage::Bye()));
  } catch (...) {
  }
}

EnvMessage RemoteEnv::Exchange(const EnvMessage& request, MessageKind expected) {
  transport_->WriteLine(Encode(request));
  const std::optional<std::string> line = transport_->ReadLine(timeout_);
  if (!line) {
    closed_ = true;
    episode_valid_ = false;
    throw SessionError("environment process closed the connection");
  }
  EnvMessage reply = Decode(*line);
  if (reply.kind == MessageKind::kError) {
    episode_valid_ = false;
    throw SessionError("environment reported: " + reply.message);
  }
  if (reply.kind != expected) {
    episode_valid_ = false;
    throw ProtocolError("expected '" + std::string(ToString(expected)) + "' but got '" +
                        std::string(ToString(reply.kind)) + "'");
  }
  return reply;
}

Observation RemoteEnv::Reset(std::uint64_t seed) {
  episode_valid_ = false;
  const EnvMessage reply = Exchange(EnvMessage::Reset(seed), MessageKind::kObservation);
  episode_valid_ = true;
  return reply.observation;
}

StepOutcome RemoteEnv::Step(ActionChoice action) {
  if (!episode_valid_) throw SessionError("step on an invalid or closed episode");
  try {
    return Exchange(EnvMessage::Step(action.index()), MessageKind::kOutcome).ToOutcome();
  } catch (...) {
    episode_valid_ = false;
    throw;
  }
}

}  // namespace croprl
