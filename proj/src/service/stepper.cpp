#include "magicitem/service/stepper.hpp"

#include <cmath>

namespace magicitem::service {

namespace {
// Beyond this backlog the clock is rebased instead of replaying a burst.
constexpr std::uint64_t kMaxCatchUp = 30;
}  // namespace

Stepper::Stepper(Factory factory, bool manual, FrameHook hook)
    : factory_(std::move(factory)), manual_(manual), hook_(std::move(hook)) {
  world_ = factory_();
  publish();
}

Stepper::~Stepper() { stop(); }

void Stepper::start() {
  std::lock_guard lock(mu_);
  if (running_) return;
  running_ = true;
  epoch_ = std::chrono::steady_clock::now();
  epochFrame_ = world_->frame();
  thread_ = std::thread([this] { run(); });
}

void Stepper::stop() {
  {
    std::lock_guard lock(mu_);
    if (!running_) return;
    running_ = false;
  }
  cv_.notify_all();
  if (thread_.joinable()) thread_.join();
  // Commands still queued would otherwise leave their futures hanging.
  std::lock_guard lock(mu_);
  for (auto& cmd : queue_) cmd(*world_);
  queue_.clear();
}

void Stepper::enqueue(std::function<void(world::World&)> cmd) {
  {
    std::lock_guard lock(mu_);
    if (running_) {
      queue_.push_back(std::move(cmd));
    } else {
      // No thread yet (or anymore): run in place, still serialized by mu_.
      cmd(*world_);
      return;
    }
  }
  cv_.notify_all();
}

std::future<std::uint64_t> Stepper::stepFrames(int n) {
  return submit([this, n](world::World& w) {
    for (int i = 0; i < n; ++i) stepOnce();
    return w.frame();
  });
}

std::future<void> Stepper::reset() {
  return submit([this](world::World&) { resetRequested_ = true; });
}

nlohmann::json Stepper::snapshot() const {
  std::lock_guard lock(snapMu_);
  return snapshot_;
}

std::uint64_t Stepper::droppedFrames() const {
  std::lock_guard lock(snapMu_);
  return dropped_;
}

void Stepper::stepOnce() {
  const auto& rec = world_->step();
  if (hook_) hook_(rec);
}

void Stepper::publish() {
  auto snap = world_->snapshot();
  std::lock_guard lock(snapMu_);
  snapshot_ = std::move(snap);
}

void Stepper::afterCommand() {
  if (resetRequested_) {
    resetRequested_ = false;
    world_ = factory_();
    epoch_ = std::chrono::steady_clock::now();
    epochFrame_ = world_->frame();
  }
  publish();
}

void Stepper::run() {
  const auto dt = std::chrono::duration<double>(world_->config().dt);
  std::unique_lock lock(mu_);
  while (running_) {
    while (!queue_.empty()) {
      auto cmd = std::move(queue_.front());
      queue_.pop_front();
      lock.unlock();
      cmd(*world_);
      lock.lock();
    }
    if (!running_) break;

    if (manual_) {
      cv_.wait(lock, [&] { return !running_ || !queue_.empty(); });
      continue;
    }

    const auto now = std::chrono::steady_clock::now();
    const auto due = epochFrame_ + static_cast<std::uint64_t>(
                                       std::floor((now - epoch_) / dt));
    if (due > world_->frame()) {
      lock.unlock();
      std::uint64_t behind = due - world_->frame();
      if (behind > kMaxCatchUp) {
        std::lock_guard s(snapMu_);
        dropped_ += behind - 1;
        behind = 1;
      }
      for (std::uint64_t i = 0; i < behind; ++i) stepOnce();
      if (world_->frame() < due) {
        epoch_ = now;
        epochFrame_ = world_->frame();
      }
      publish();
      lock.lock();
    }
    const auto next = epoch_ + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                   dt * static_cast<double>(world_->frame() + 1 - epochFrame_));
    cv_.wait_until(lock, next, [&] { return !running_ || !queue_.empty(); });
  }
}

}  // namespace magicitem::service
