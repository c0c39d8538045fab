#include "bms/sim/simulator.hpp"

#include <bit>
#include <stdexcept>

#include <fmt/format.h>

#include "bms/codec.hpp"

namespace bms::sim {

void Simulator::schedule(SimTime at, Action action) {
    if (at < now_) {
        throw std::invalid_argument(fmt::format("cannot schedule at {} before current time {}", at, now_));
    }
    queue_.push(Event{at, next_seq_++, std::move(action)});
}

bool Simulator::step() {
    if (queue_.empty() || stopped_) return false;
    // priority_queue::top is const; the action is moved out via a copy of the handle.
    Event ev = std::move(const_cast<Event&>(queue_.top()));
    queue_.pop();
    now_ = ev.at;
    ++processed_;
    trace_ = (trace_ ^ std::bit_cast<std::uint64_t>(ev.at)) * 0x100000001b3ULL;
    trace_ = (trace_ ^ ev.seq) * 0x100000001b3ULL;
    ev.action();
    return true;
}

void Simulator::run() {
    while (step()) {
    }
}

void Simulator::run_until(SimTime limit) {
    while (!stopped_ && !queue_.empty() && queue_.top().at <= limit) step();
    if (!stopped_ && limit > now_) now_ = limit;
}

std::mt19937_64 Simulator::make_rng(std::string_view stream) const {
    const auto h = fnv1a64(std::span(reinterpret_cast<const std::uint8_t*>(stream.data()), stream.size()));
    std::seed_seq seq{static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32),
                      static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
    return std::mt19937_64(seq);
}

}  // namespace bms::sim
