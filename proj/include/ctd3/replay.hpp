#pragma once

// Three-buffer experience system: a main buffer plus high/low side buffers
// split by a reward cutoff. The cutoff is fixed by default; an opt-in
// adaptive mode tracks a reward quantile through a sampling reservoir.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "ctd3/rng.hpp"

namespace ctd3 {

struct Transition {
    std::vector<double> state;
    std::vector<double> action;
    double reward = 0.0;
    std::vector<double> next_state;
    bool truncated = false; // time limit hit; bootstrap anyway
    bool terminal = false;  // true terminal state; bootstrap masked
};

// FIFO ring of transitions. Each element also remembers the cutoff that was
// in force when it was stored, which is what the buffer-predicate invariants
// are checked against.
class RingBuffer {
public:
    explicit RingBuffer(std::size_t capacity);

    void push(Transition t, double cutoff_at_insert);
    std::size_t size() const { return items_.size(); }
    std::size_t capacity() const { return cap_; }

    // Logical index: 0 is the oldest surviving element.
    const Transition& operator[](std::size_t i) const { return slot(i).t; }
    double cutoff_at(std::size_t i) const { return slot(i).cutoff; }

private:
    struct Stored {
        Transition t;
        double cutoff = 0.0;
    };
    const Stored& slot(std::size_t i) const {
        return items_[items_.size() < cap_ ? i : (next_ + i) % cap_];
    }

    std::vector<Stored> items_;
    std::size_t cap_;
    std::size_t next_ = 0; // oldest slot once full
};

// n uniform draws with replacement; pointers stay valid until the next store.
// Returns nothing when the buffer holds fewer than n elements, which callers
// treat as "skip this update".
std::optional<std::vector<const Transition*>> sample(const RingBuffer& buf, std::size_t n,
                                                     Rng& rng);

struct TripleReplayConfig {
    std::size_t main_capacity = 1000000;
    std::size_t side_capacity = 100000;
    double cutoff = 0.0; // R
    bool adaptive = false;
    double quantile = 0.5;           // target quantile when adaptive
    std::uint64_t reservoir_seed = 0x5eed; // reservoir subsampling stream
};

class TripleReplay {
public:
    explicit TripleReplay(const TripleReplayConfig& cfg);

    struct Placement {
        bool high = false; // stored in main + (high ? high : low)
    };

    // Appends to main always and to exactly one side buffer: high iff
    // reward > cutoff (strict), low otherwise. Oldest elements are evicted on
    // overflow. Already-stored elements are never reclassified.
    Placement classify_and_store(Transition t);

    const RingBuffer& main() const { return main_; }
    const RingBuffer& high() const { return high_; }
    const RingBuffer& low() const { return low_; }
    double cutoff() const { return cutoff_; }
    bool adaptive() const { return cfg_.adaptive; }

    // Adaptive mode only: feeds rewards into the reservoir, then moves the
    // cutoff to the reservoir's nearest-rank q-quantile and returns it.
    double update_cutoff(std::span<const double> recent_rewards);

    std::size_t reservoir_size() const { return reservoir_.size(); }

private:
    TripleReplayConfig cfg_;
    RingBuffer main_;
    RingBuffer high_;
    RingBuffer low_;
    double cutoff_;

    std::vector<double> reservoir_;
    std::uint64_t seen_ = 0; // rewards offered to the reservoir so far
    Rng reservoir_rng_;
};

} // namespace ctd3
