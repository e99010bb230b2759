#ifndef PESSILAB_REPLAY_HPP_
#define PESSILAB_REPLAY_HPP_

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "pessilab/mdp.hpp"
#include "pessilab/rng.hpp"

namespace pessilab {

// Environment transition in vector form; id is a globally unique insertion
// counter used to assert training/validation exclusivity.
struct Transition {
    Vector s;
    Vector a;
    double r = 0.0;
    Vector s_next;
    bool terminal = false;
    std::uint64_t id = 0;
};

enum class BufferDestination { kTraining, kValidation };

// Exclusive routing per Bernoulli(v) draw; one uniform is consumed per call
// regardless of v so that configurations differing only in v share the rest
// of the random stream.
inline BufferDestination route_transition(double v, Rng& rng) {
    if (v < 0.0 || v >= 1.0) throw ParameterError("route_transition: v must be in [0,1)");
    return rng.uniform() < v ? BufferDestination::kValidation : BufferDestination::kTraining;
}

// Ring buffer with uniform sampling (with replacement).
class ReplayBuffer {
  public:
    explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
        if (capacity == 0) throw ParameterError("ReplayBuffer: capacity must be positive");
    }

    void add(Transition t) {
        if (store_.size() < capacity_) {
            store_.push_back(std::move(t));
        } else {
            store_[insertions_ % capacity_] = std::move(t);
        }
        ++insertions_;
    }

    std::size_t size() const { return store_.size(); }
    std::uint64_t insertions() const { return insertions_; }
    const Transition& at(std::size_t i) const { return store_[i]; }

    std::vector<const Transition*> sample(std::size_t n, Rng& rng) const {
        if (store_.empty()) throw ParameterError("ReplayBuffer: sample from empty buffer");
        std::vector<const Transition*> batch(n);
        for (auto& slot : batch) slot = &store_[static_cast<std::size_t>(rng.uniform_int(store_.size()))];
        return batch;
    }

    void clear() { store_.clear(); }

  private:
    std::size_t capacity_;
    std::uint64_t insertions_ = 0;
    std::vector<Transition> store_;
};

}  // namespace pessilab

#endif  // PESSILAB_REPLAY_HPP_
