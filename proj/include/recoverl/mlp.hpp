#pragma once
#include <span>
#include <stdexcept>
#include <vector>

#include "recoverl/mat.hpp"
#include "recoverl/rng.hpp"

namespace recoverl {

// Raised when an update would apply non-finite gradients; callers treat it as
// a halt, not something to catch and continue past.
struct TrainingHalt : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Linear {
    Matrix w;                  // in x out
    Matrix wt;                 // out x in, transpose copy for the input-gradient pass
    std::vector<double> bias;  // out

    void refresh_transpose();
};

struct LinearGrads {
    Matrix dw;
    std::vector<double> dbias;
};

struct MlpGrads {
    std::vector<LinearGrads> layers;
    bool all_finite() const;
};

// act[0] is the input, act[l+1] the output of layer l (post-relu for hidden
// layers, raw for the last).
struct MlpCache {
    std::vector<Matrix> act;
    const Matrix& out() const { return act.back(); }
};

// Fully-connected net, relu on every layer but the last.
class Mlp {
public:
    Mlp() = default;

    // dims = {in, hidden..., out}; weights and biases U(-1/sqrt(fan_in), +1/sqrt(fan_in)).
    // Draw order is layer-major then row-major and is pinned: checkpoints and
    // recorded runs depend on it.
    static Mlp uniform_init(const std::vector<int>& dims, Rng& rng);
    static Mlp zeros(const std::vector<int>& dims);

    int input_dim() const { return dims_.front(); }
    int output_dim() const { return dims_.back(); }
    const std::vector<int>& dims() const { return dims_; }
    std::vector<Linear>& layers() { return layers_; }
    const std::vector<Linear>& layers() const { return layers_; }

    void forward(const Matrix& x, MlpCache& cache) const;
    std::vector<double> forward_one(std::span<const double> x) const;

    // d_out is dLoss/d(output). Parameter gradients are written into grads
    // (shapes fixed by make_grads); d_input optionally receives dLoss/d(input).
    void backward(const MlpCache& cache, const Matrix& d_out, MlpGrads& grads, Matrix* d_input = nullptr) const;
    // Input gradient only; skips the parameter-gradient work.
    void backward_input(const MlpCache& cache, const Matrix& d_out, Matrix& d_input) const;

    void refresh_transposes();
    MlpGrads make_grads() const;

private:
    std::vector<int> dims_;
    std::vector<Linear> layers_;
};

struct AdamConfig {
    double lr = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.99;
    double eps = 1e-8;
};

// Shared update core: p -= lr * m_hat / (sqrt(v_hat) + eps) with bias-corrected
// moments; t is the 1-based step count after increment.
void adam_update(std::span<double> p, std::span<const double> g, std::span<double> m, std::span<double> v, long t,
                 const AdamConfig& cfg);

class Adam {
public:
    Adam() = default;
    Adam(const Mlp& like, AdamConfig cfg);

    // Throws TrainingHalt if any gradient entry is non-finite; otherwise takes
    // one step and refreshes the weight transposes.
    void step(Mlp& net, const MlpGrads& g);
    long steps_taken() const { return t_; }
    const AdamConfig& config() const { return cfg_; }

private:
    AdamConfig cfg_;
    std::vector<std::vector<double>> m_, v_;  // w0, b0, w1, b1, ...
    long t_ = 0;
};

class AdamScalar {
public:
    AdamScalar() = default;
    explicit AdamScalar(AdamConfig cfg) : cfg_(cfg) {}
    void step(double& p, double g);
    long steps_taken() const { return t_; }

private:
    AdamConfig cfg_;
    double m_ = 0.0, v_ = 0.0;
    long t_ = 0;
};

} // namespace recoverl
