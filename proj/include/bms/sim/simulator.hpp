#pragma once

#include <cstdint>
#include <functional>
#include <queue>
#include <random>
#include <string_view>
#include <vector>

#include "bms/types.hpp"

namespace bms::sim {

// Single-threaded discrete-event loop. Events at equal timestamps run in
// insertion order, so a fixed seed replays identically.
class Simulator {
  public:
    using Action = std::function<void()>;

    explicit Simulator(std::uint64_t seed = 0) : seed_(seed) {}

    Simulator(const Simulator&) = delete;
    Simulator& operator=(const Simulator&) = delete;

    SimTime now() const { return now_; }
    std::uint64_t seed() const { return seed_; }

    // Throws std::invalid_argument when `at` lies in the past.
    void schedule(SimTime at, Action action);
    void schedule_after(SimTime delay, Action action) { schedule(now_ + delay, std::move(action)); }

    bool step();
    void run();
    // Runs every event with time <= limit, then advances the clock to limit.
    void run_until(SimTime limit);
    void stop() { stopped_ = true; }
    bool stopped() const { return stopped_; }

    bool idle() const { return queue_.empty(); }
    std::size_t pending() const { return queue_.size(); }
    std::uint64_t processed() const { return processed_; }

    // Running digest over (time, sequence) of every executed event.
    std::uint64_t trace_digest() const { return trace_; }

    // Independent deterministic stream for one component.
    std::mt19937_64 make_rng(std::string_view stream) const;

  private:
    struct Event {
        SimTime at;
        std::uint64_t seq;
        Action action;
    };
    struct Later {
        bool operator()(const Event& a, const Event& b) const {
            if (a.at != b.at) return a.at > b.at;
            return a.seq > b.seq;
        }
    };

    std::priority_queue<Event, std::vector<Event>, Later> queue_;
    SimTime now_ = 0.0;
    std::uint64_t next_seq_ = 0;
    std::uint64_t processed_ = 0;
    std::uint64_t trace_ = 0xcbf29ce484222325ULL;
    std::uint64_t seed_;
    bool stopped_ = false;
};

}  // namespace bms::sim
