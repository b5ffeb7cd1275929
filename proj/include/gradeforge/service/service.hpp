#pragma once

#include <memory>
#include <string>
#include <vector>

#include "gradeforge/error.hpp"
#include "gradeforge/service/config.hpp"

namespace gradeforge::classroom {
class ClassroomManager;
}

namespace gradeforge::service {

// HTTP status for an error kind.
int http_status(ErrorKind kind);

// The job service: replays the event log, re-enqueues ungraded submissions
// and serves the HTTP API on every configured bind address.
class Service {
 public:
  explicit Service(ServiceConfig config);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Binds every address and starts serving in background threads. Throws
  // Error(config) when an address cannot be bound.
  void start();
  // Blocks until stop() is called from another thread or a signal handler.
  void wait();
  void stop();

  // Actual ports, in bind_addresses order (useful with port 0).
  std::vector<int> bound_ports() const;

  const ServiceConfig& config() const;
  classroom::ClassroomManager& manager();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace gradeforge::service
