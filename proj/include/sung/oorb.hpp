#pragma once
#include <vector>

#include "sung/dataset.hpp"
#include "sung/rng.hpp"

namespace sung {

// Bounded FIFO transition store. Logical index 0 is the oldest element.
class RingBuffer {
public:
    explicit RingBuffer(std::size_t capacity) : capacity_(capacity) {
        check(capacity_ >= 1, "ring buffer: capacity must be positive");
    }

    void push(Transition t) {
        if (data_.size() < capacity_) {
            data_.push_back(std::move(t));
        } else {
            data_[cursor_] = std::move(t);
            cursor_ = (cursor_ + 1) % capacity_;
        }
    }

    std::size_t size() const { return data_.size(); }
    std::size_t capacity() const { return capacity_; }
    bool empty() const { return data_.empty(); }

    const Transition& at(std::size_t logical) const {
        check(logical < data_.size(), "ring buffer: index out of range");
        if (data_.size() < capacity_) return data_[logical];
        return data_[(cursor_ + logical) % capacity_];
    }

private:
    std::size_t capacity_;
    std::size_t cursor_ = 0;
    std::vector<Transition> data_;
};

// Two-buffer replay: a fully online buffer B and an offline buffer D seeded
// with the dataset. Pushes go to both; each sampled slot draws from B with
// probability p_oorb, else from D.
class Oorb {
public:
    Oorb(std::size_t online_capacity, std::size_t offline_capacity, double p_oorb)
        : online_(online_capacity), offline_(offline_capacity), p_(p_oorb) {
        check(p_ >= 0.0 && p_ <= 1.0, "oorb: p must lie in [0,1]");
    }

    void preload(const OfflineDataset& dataset) {
        for (const auto& t : dataset.transitions) offline_.push(t);
    }

    void push(const Transition& t) {
        online_.push(t);
        offline_.push(t);
    }

    const Transition& draw(Rng& rng) const {
        check(!online_.empty() || !offline_.empty(), "oorb: both buffers empty");
        // Cold start: a draw that lands on an empty B falls back to D.
        const bool from_online = rng.uniform() < p_ && !online_.empty();
        const RingBuffer& buf = from_online ? online_ : offline_;
        check(!buf.empty(), "oorb: selected buffer empty");
        return buf.at(rng.integer(buf.size()));
    }

    // Same draw but reporting which buffer served the slot (for mixture-rate
    // diagnostics).
    const Transition& draw(Rng& rng, bool& from_online) const {
        check(!online_.empty() || !offline_.empty(), "oorb: both buffers empty");
        from_online = rng.uniform() < p_ && !online_.empty();
        const RingBuffer& buf = from_online ? online_ : offline_;
        check(!buf.empty(), "oorb: selected buffer empty");
        return buf.at(rng.integer(buf.size()));
    }

    std::vector<Transition> sample(std::size_t batch_size, Rng& rng) const {
        std::vector<Transition> out;
        out.reserve(batch_size);
        for (std::size_t i = 0; i < batch_size; ++i) out.push_back(draw(rng));
        return out;
    }

    const RingBuffer& online() const { return online_; }
    const RingBuffer& offline() const { return offline_; }
    double p_oorb() const { return p_; }

private:
    RingBuffer online_;
    RingBuffer offline_;
    double p_;
};

}  // namespace sung
