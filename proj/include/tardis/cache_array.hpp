#ifndef TARDIS_CACHE_ARRAY_HPP
#define TARDIS_CACHE_ARRAY_HPP

#include <cstdint>
#include <functional>
#include <vector>

namespace tardis {

// Minimal set-associative array with LRU. Line types embed:
//   bool valid; std::uint64_t addr; std::uint64_t lru;
// Victim choice can be biased by a rank function (lower ranks evict first;
// LRU breaks ties) and a pin predicate for lines that must stay put.
template <class Line>
class CacheArray {
 public:
  // addr_div strips address bits consumed by interleaving before the set
  // index (an LLC slice sees only every N-th line).
  CacheArray(unsigned sets, unsigned ways, std::uint64_t addr_div = 1)
      : sets_(sets), ways_(ways), addr_div_(addr_div ? addr_div : 1),
        lines_(std::size_t(sets) * ways) {}

  Line* find(std::uint64_t addr) {
    Line* base = set_base(addr);
    for (unsigned w = 0; w < ways_; ++w)
      if (base[w].valid && base[w].addr == addr) return &base[w];
    return nullptr;
  }
  const Line* find(std::uint64_t addr) const {
    return const_cast<CacheArray*>(this)->find(addr);
  }

  void touch(Line& ln) { ln.lru = ++tick_; }

  // Slot for a fill of addr: an invalid way if one exists, otherwise the
  // best (lowest-rank, then least recently used) non-pinned victim. Returns
  // nullptr when every way is pinned. A returned valid line must be evicted
  // by the caller before reuse.
  Line* fill_slot(std::uint64_t addr,
                  const std::function<std::uint64_t(const Line&)>& rank,
                  const std::function<bool(const Line&)>& pinned) {
    Line* base = set_base(addr);
    for (unsigned w = 0; w < ways_; ++w)
      if (!base[w].valid) return &base[w];
    Line* best = nullptr;
    std::uint64_t best_rank = 0;
    for (unsigned w = 0; w < ways_; ++w) {
      Line& ln = base[w];
      if (pinned(ln)) continue;
      std::uint64_t r = rank(ln);
      if (!best || r < best_rank ||
          (r == best_rank && ln.lru < best->lru)) {
        best = &ln;
        best_rank = r;
      }
    }
    return best;
  }

  template <class Fn>
  void for_each_valid(Fn&& fn) {
    for (auto& ln : lines_)
      if (ln.valid) fn(ln);
  }

  unsigned sets() const { return sets_; }
  unsigned ways() const { return ways_; }

 private:
  Line* set_base(std::uint64_t addr) {
    return &lines_[std::size_t((addr / addr_div_) % sets_) * ways_];
  }

  unsigned sets_, ways_;
  std::uint64_t addr_div_;
  std::vector<Line> lines_;
  std::uint64_t tick_ = 0;
};

}  // namespace tardis

#endif  // TARDIS_CACHE_ARRAY_HPP
