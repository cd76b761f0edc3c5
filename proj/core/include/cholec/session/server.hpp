#pragma once

#include <cstdint>
#include <memory>

#include "cholec/session/session.hpp"

namespace cholec::session {

// HTTP + websocket front end of a SessionCore on one io_context thread.
//
//   GET /health    {"status":"ok", ...}
//   GET /config    the active SessionConfig
//   WS  /session   InputMessage in; hello, state, episode_summary, warning, error out
//
// Frames are broadcast once per 30 Hz tick. A client whose send queue is full misses frames.
class SessionServer {
 public:
  // Binds immediately; throws IoError when the address or port is unavailable. Port 0 picks a
  // free port.
  explicit SessionServer(SessionConfig config);
  SessionServer(SessionConfig config, std::unique_ptr<SessionCore> core);
  ~SessionServer();
  SessionServer(const SessionServer&) = delete;
  SessionServer& operator=(const SessionServer&) = delete;

  std::uint16_t port() const;
  // Blocks until stop() is called, or until `max_ticks` ticks have run when it is positive.
  void run(std::int64_t max_ticks = 0);
  // Safe to call from any thread.
  void stop();

  SessionCore& core();

  struct Impl;  // networking internals, defined in the source file

 private:
  std::shared_ptr<Impl> impl_;
};

}  // namespace cholec::session
