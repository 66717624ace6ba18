#include "recoverl/replay.hpp"

#include <cstring>

namespace recoverl {

ReplayBuffer::ReplayBuffer(std::size_t capacity, SchemaPtr state_schema, SchemaPtr action_schema)
    : cap_(capacity),
      sdim_(state_schema->size()),
      adim_(action_schema->size()),
      state_schema_(std::move(state_schema)),
      action_schema_(std::move(action_schema)) {
    if (cap_ == 0)
        throw ValidationError("replay buffer capacity must be positive");
    states_.resize(cap_ * sdim_);
    next_states_.resize(cap_ * sdim_);
    actions_.resize(cap_ * adim_);
    rewards_.resize(cap_);
    flags_.resize(cap_);
    terminals_.resize(cap_);
}

static bool same_schema(const SchemaPtr& a, const SchemaPtr& b) {
    if (a.get() == b.get())
        return true;
    return a && b && a->name() == b->name() && a->size() == b->size();
}

void ReplayBuffer::push(const Transition& t) {
    if (!same_schema(t.state.schema_ptr(), state_schema_) ||
        !same_schema(t.next_state.schema_ptr(), state_schema_))
        throw ValidationError("replay push: state schema mismatch");
    if (!same_schema(t.action.schema_ptr(), action_schema_))
        throw ValidationError("replay push: action schema mismatch");
    if (t.eval_flag != 0 && t.eval_flag != 1)
        throw ValidationError("replay push: eval flag must be 0 or 1");

    std::size_t s = size_ < cap_ ? slot(size_) : start_;
    std::memcpy(&states_[s * sdim_], t.state.values().data(), sizeof(double) * sdim_);
    std::memcpy(&next_states_[s * sdim_], t.next_state.values().data(), sizeof(double) * sdim_);
    std::memcpy(&actions_[s * adim_], t.action.values().data(), sizeof(double) * adim_);
    rewards_[s] = t.reward;
    flags_[s] = std::uint8_t(t.eval_flag);
    terminals_[s] = t.terminal ? 1 : 0;

    if (size_ < cap_) {
        ++size_;
    } else {
        start_ = (start_ + 1) % cap_;
    }
}

Transition ReplayBuffer::assemble(std::size_t s) const {
    Transition t;
    t.state = StateVector(std::vector<double>(&states_[s * sdim_], &states_[s * sdim_] + sdim_), state_schema_);
    t.next_state =
        StateVector(std::vector<double>(&next_states_[s * sdim_], &next_states_[s * sdim_] + sdim_), state_schema_);
    t.action = ActionVector(std::vector<double>(&actions_[s * adim_], &actions_[s * adim_] + adim_), action_schema_);
    t.reward = rewards_[s];
    t.eval_flag = flags_[s];
    t.terminal = terminals_[s] != 0;
    return t;
}

Transition ReplayBuffer::get(std::size_t index) const {
    if (index >= size_)
        throw ValidationError("replay get: index out of range");
    return assemble(slot(index));
}

std::vector<Transition> ReplayBuffer::sample(std::size_t n, Rng& rng) const {
    if (size_ == 0)
        throw ValidationError("replay sample: buffer is empty");
    std::vector<Transition> out;
    out.reserve(n);
    for (std::size_t j = 0; j < n; ++j)
        out.push_back(assemble(slot(rng.below(size_))));
    return out;
}

void ReplayBuffer::sample_into(Batch& out, std::size_t n, Rng& rng) const {
    if (size_ == 0)
        throw ValidationError("replay sample: buffer is empty");
    out.s.resize(int(n), sdim_);
    out.s2.resize(int(n), sdim_);
    out.a.resize(int(n), adim_);
    out.r.resize(n);
    out.flag.resize(n);
    out.term.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        std::size_t s = slot(rng.below(size_));
        std::memcpy(out.s.row(int(j)), &states_[s * sdim_], sizeof(double) * sdim_);
        std::memcpy(out.s2.row(int(j)), &next_states_[s * sdim_], sizeof(double) * sdim_);
        std::memcpy(out.a.row(int(j)), &actions_[s * adim_], sizeof(double) * adim_);
        out.r[j] = rewards_[s];
        out.flag[j] = flags_[s];
        out.term[j] = terminals_[s];
    }
}

} // namespace recoverl
