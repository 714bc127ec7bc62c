#pragma once

#include <memory>
#include <stdexcept>

#include "magicitem/service/config.hpp"
#include "magicitem/service/session.hpp"
#include "magicitem/service/stepper.hpp"

namespace magicitem::service {

/// The default stage: chair 1 at (0,0,2), grabbable 2 at (1,0,2), player 1
/// at the origin.
std::unique_ptr<world::World> makeStage(std::uint64_t seed);

class ServiceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// HTTP front end over one Stepper, one Gateway and the current Session.
class Service {
 public:
  explicit Service(ServiceConfig config,
                   std::unique_ptr<gateway::HttpTransport> transport = nullptr);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds, starts the stepper and the listener thread; returns the bound
  /// port. Throws ServiceError when the port cannot be bound.
  int start();
  void stop();

  int port() const;
  const ServiceConfig& config() const;
  Stepper& stepper();
  std::shared_ptr<Session> session() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace magicitem::service
