#ifndef TARDIS_EVENT_QUEUE_HPP
#define TARDIS_EVENT_QUEUE_HPP

#include <cstdint>
#include <functional>
#include <queue>
#include <vector>

namespace tardis {

// Deterministic discrete-event queue: events fire in (cycle, insertion seq)
// order, so equal-cycle events replay in the order they were scheduled.
class EventQueue {
 public:
  void schedule(std::uint64_t cycle, std::function<void()> fn) {
    if (cycle < now_) cycle = now_;
    heap_.push(Ev{cycle, seq_++, std::move(fn)});
  }

  bool empty() const { return heap_.empty(); }
  std::uint64_t now() const { return now_; }
  std::uint64_t next_cycle() const { return heap_.top().cycle; }

  void run_next() {
    Ev ev = heap_.top();
    heap_.pop();
    now_ = ev.cycle;
    ev.fn();
  }

 private:
  struct Ev {
    std::uint64_t cycle;
    std::uint64_t seq;
    std::function<void()> fn;
  };
  struct Later {
    bool operator()(const Ev& a, const Ev& b) const {
      if (a.cycle != b.cycle) return a.cycle > b.cycle;
      return a.seq > b.seq;
    }
  };

  std::priority_queue<Ev, std::vector<Ev>, Later> heap_;
  std::uint64_t seq_ = 0;
  std::uint64_t now_ = 0;
};

}  // namespace tardis

#endif  // TARDIS_EVENT_QUEUE_HPP
