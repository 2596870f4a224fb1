#include "ctd3/replay.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace ctd3 {

namespace {
constexpr std::size_t kReservoirCap = 16384;
} // namespace

RingBuffer::RingBuffer(std::size_t capacity) : cap_(capacity) {
    if (capacity < 1) throw std::invalid_argument("RingBuffer: capacity must be >= 1");
}

void RingBuffer::push(Transition t, double cutoff_at_insert) {
    if (items_.size() < cap_) {
        items_.push_back({std::move(t), cutoff_at_insert});
    } else {
        items_[next_] = {std::move(t), cutoff_at_insert};
        next_ = (next_ + 1) % cap_;
    }
}

std::optional<std::vector<const Transition*>> sample(const RingBuffer& buf, std::size_t n,
                                                     Rng& rng) {
    if (buf.size() < n || n == 0) return std::nullopt;
    std::vector<const Transition*> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = &buf[rng.index(buf.size())];
    return out;
}

TripleReplay::TripleReplay(const TripleReplayConfig& cfg)
    : cfg_(cfg),
      main_(cfg.main_capacity),
      high_(cfg.side_capacity),
      low_(cfg.side_capacity),
      cutoff_(cfg.cutoff),
      reservoir_rng_(cfg.reservoir_seed) {
    if (!std::isfinite(cfg.cutoff))
        throw std::invalid_argument("TripleReplay: cutoff must be finite");
    if (cfg.adaptive && (cfg.quantile < 0.0 || cfg.quantile > 1.0))
        throw std::invalid_argument("TripleReplay: quantile must lie in [0,1], got " +
                                    std::to_string(cfg.quantile));
}

TripleReplay::Placement TripleReplay::classify_and_store(Transition t) {
    if (!std::isfinite(t.reward))
        throw std::invalid_argument("TripleReplay: non-finite reward");
    const bool is_high = t.reward > cutoff_;
    if (is_high)
        high_.push(t, cutoff_);
    else
        low_.push(t, cutoff_);
    main_.push(std::move(t), cutoff_);
    return {is_high};
}

double TripleReplay::update_cutoff(std::span<const double> recent_rewards) {
    if (!cfg_.adaptive)
        throw std::logic_error("TripleReplay::update_cutoff: adaptive mode is disabled");
    for (double r : recent_rewards) {
        ++seen_;
        if (reservoir_.size() < kReservoirCap) {
            reservoir_.push_back(r);
        } else {
            // classic reservoir sampling: keep each seen reward with equal odds
            const std::size_t j = reservoir_rng_.index(seen_);
            if (j < kReservoirCap) reservoir_[j] = r;
        }
    }
    if (reservoir_.empty()) return cutoff_;

    std::vector<double> sorted(reservoir_);
    std::sort(sorted.begin(), sorted.end());
    const double qn = cfg_.quantile * static_cast<double>(sorted.size());
    std::size_t rank = static_cast<std::size_t>(std::ceil(qn)); // nearest-rank, 1-based
    rank = std::clamp<std::size_t>(rank, 1, sorted.size());
    cutoff_ = sorted[rank - 1];
    return cutoff_;
}

} // namespace ctd3
