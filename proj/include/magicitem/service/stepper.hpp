#pragma once

#include <chrono>
#include <condition_variable>
#include <deque>
#include <functional>
#include <future>
#include <memory>
#include <mutex>
#include <thread>
#include <type_traits>

#include <json.hpp>

#include "magicitem/world/world.hpp"

namespace magicitem::service {

/// Sole owner of the World. Other threads reach it only through submit(),
/// whose commands run in FIFO order between frames, so callers never see
/// mid-step state.
class Stepper {
 public:
  using Factory = std::function<std::unique_ptr<world::World>()>;
  using FrameHook = std::function<void(const world::FrameRecord&)>;

  /// In real-time mode frames advance at 1/dt Hz against a wall-clock epoch
  /// (frame count = floor(elapsed / dt)); in manual mode only stepFrames()
  /// advances the world.
  Stepper(Factory factory, bool manual, FrameHook hook = {});
  ~Stepper();
  Stepper(const Stepper&) = delete;
  Stepper& operator=(const Stepper&) = delete;

  void start();
  void stop();
  bool manual() const { return manual_; }

  /// The future resolves after the post-command snapshot is published.
  template <class F>
  auto submit(F&& fn) -> std::future<std::invoke_result_t<F, world::World&>> {
    using R = std::invoke_result_t<F, world::World&>;
    auto promise = std::make_shared<std::promise<R>>();
    auto fut = promise->get_future();
    enqueue([this, promise, fn = std::forward<F>(fn)](world::World& w) mutable {
      try {
        if constexpr (std::is_void_v<R>) {
          fn(w);
          afterCommand();
          promise->set_value();
        } else {
          R result = fn(w);
          afterCommand();
          promise->set_value(std::move(result));
        }
      } catch (...) {
        afterCommand();
        promise->set_exception(std::current_exception());
      }
    });
    return fut;
  }

  /// Steps `n` frames as one command; resolves to the resulting frame.
  std::future<std::uint64_t> stepFrames(int n);

  /// Rebuilds the world from the factory and restarts the clock.
  std::future<void> reset();

  /// Most recent frame-boundary snapshot.
  nlohmann::json snapshot() const;

  /// Frames skipped because the stepper fell too far behind wall clock.
  std::uint64_t droppedFrames() const;

 private:
  void enqueue(std::function<void(world::World&)> cmd);
  void run();
  void stepOnce();
  void publish();
  void afterCommand();

  Factory factory_;
  bool manual_;
  FrameHook hook_;
  std::unique_ptr<world::World> world_;

  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::function<void(world::World&)>> queue_;
  bool running_ = false;
  bool resetRequested_ = false;
  std::thread thread_;

  mutable std::mutex snapMu_;
  nlohmann::json snapshot_;
  std::uint64_t dropped_ = 0;

  std::chrono::steady_clock::time_point epoch_;
  std::uint64_t epochFrame_ = 0;
};

}  // namespace magicitem::service
