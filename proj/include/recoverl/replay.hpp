#pragma once
#include <cstdint>
#include <vector>

#include "recoverl/mat.hpp"
#include "recoverl/rng.hpp"
#include "recoverl/schema.hpp"

namespace recoverl {

// Sampled mini-batch in matrix form, rows are transitions.
struct Batch {
    Matrix s, a, s2;
    std::vector<double> r;
    std::vector<std::uint8_t> flag;  // eval flag of s
    std::vector<std::uint8_t> term;  // terminal at s2
    int size() const { return s.rows; }
};

// Fixed-capacity FIFO ring over flat per-component arrays. At the default
// 1M capacity with cartpole dims this is under 100 MB.
class ReplayBuffer {
public:
    ReplayBuffer(std::size_t capacity, SchemaPtr state_schema, SchemaPtr action_schema);

    std::size_t capacity() const { return cap_; }
    std::size_t size() const { return size_; }
    const SchemaPtr& state_schema() const { return state_schema_; }
    const SchemaPtr& action_schema() const { return action_schema_; }

    // Overwrites the oldest entry once full. Throws ValidationError if the
    // transition's schemas do not match the buffer's.
    void push(const Transition& t);

    // index 0 is the oldest stored transition
    Transition get(std::size_t index) const;

    // Uniform with replacement; consumes exactly n draws from rng.
    std::vector<Transition> sample(std::size_t n, Rng& rng) const;

    // Same index stream as sample(), gathered straight into matrices.
    void sample_into(Batch& out, std::size_t n, Rng& rng) const;

private:
    std::size_t slot(std::size_t index) const { return (start_ + index) % cap_; }
    Transition assemble(std::size_t s) const;

    std::size_t cap_;
    std::size_t size_ = 0;
    std::size_t start_ = 0;  // slot of the oldest entry
    int sdim_, adim_;
    SchemaPtr state_schema_, action_schema_;
    std::vector<double> states_, actions_, next_states_, rewards_;
    std::vector<std::uint8_t> flags_, terminals_;
};

} // namespace recoverl
