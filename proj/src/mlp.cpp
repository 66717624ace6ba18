#include "recoverl/mlp.hpp"

#include <cmath>
#include <cstring>

#include "recoverl/kernels.hpp"

namespace recoverl {

void Linear::refresh_transpose() {
    wt.resize(w.cols, w.rows);
    for (int k = 0; k < w.rows; ++k)
        for (int o = 0; o < w.cols; ++o)
            wt.at(o, k) = w.at(k, o);
}

bool MlpGrads::all_finite() const {
    for (const LinearGrads& g : layers) {
        for (double v : g.dw.data)
            if (!std::isfinite(v))
                return false;
        for (double v : g.dbias)
            if (!std::isfinite(v))
                return false;
    }
    return true;
}

Mlp Mlp::zeros(const std::vector<int>& dims) {
    Mlp net;
    net.dims_ = dims;
    net.layers_.resize(dims.size() - 1);
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        Linear& lin = net.layers_[l];
        lin.w.resize(dims[l], dims[l + 1]);
        lin.bias.assign(std::size_t(dims[l + 1]), 0.0);
        lin.refresh_transpose();
    }
    return net;
}

Mlp Mlp::uniform_init(const std::vector<int>& dims, Rng& rng) {
    Mlp net = zeros(dims);
    for (Linear& lin : net.layers_) {
        double bound = 1.0 / std::sqrt(double(lin.w.rows));
        for (double& v : lin.w.data)
            v = rng.uniform(-bound, bound);
        for (double& v : lin.bias)
            v = rng.uniform(-bound, bound);
        lin.refresh_transpose();
    }
    return net;
}

void Mlp::forward(const Matrix& x, MlpCache& cache) const {
    const std::size_t n = layers_.size();
    cache.act.resize(n + 1);
    cache.act[0] = x;
    Matrix pre;
    for (std::size_t l = 0; l < n; ++l) {
        kernels::linear_forward(pre, cache.act[l], layers_[l].w, layers_[l].bias);
        if (l + 1 < n) {
            kernels::relu_forward(cache.act[l + 1], pre);
        } else {
            cache.act[l + 1] = pre;
        }
    }
}

std::vector<double> Mlp::forward_one(std::span<const double> x) const {
    Matrix in(1, int(x.size()));
    std::memcpy(in.row(0), x.data(), sizeof(double) * x.size());
    MlpCache cache;
    forward(in, cache);
    const Matrix& out = cache.out();
    return std::vector<double>(out.row(0), out.row(0) + out.cols);
}

void Mlp::backward(const MlpCache& cache, const Matrix& d_out, MlpGrads& grads, Matrix* d_input) const {
    const int n = int(layers_.size());
    Matrix d = d_out;
    Matrix d_prev;
    for (int l = n - 1; l >= 0; --l) {
        kernels::linear_backward_params(grads.layers[std::size_t(l)].dw, grads.layers[std::size_t(l)].dbias,
                                        cache.act[std::size_t(l)], d);
        if (l > 0) {
            kernels::linear_backward_input(d_prev, d, layers_[std::size_t(l)].wt);
            kernels::relu_backward_inplace(d_prev, cache.act[std::size_t(l)]);
            std::swap(d, d_prev);
        } else if (d_input) {
            kernels::linear_backward_input(*d_input, d, layers_[0].wt);
        }
    }
}

void Mlp::backward_input(const MlpCache& cache, const Matrix& d_out, Matrix& d_input) const {
    const int n = int(layers_.size());
    Matrix d = d_out;
    Matrix d_prev;
    for (int l = n - 1; l >= 0; --l) {
        if (l > 0) {
            kernels::linear_backward_input(d_prev, d, layers_[std::size_t(l)].wt);
            kernels::relu_backward_inplace(d_prev, cache.act[std::size_t(l)]);
            std::swap(d, d_prev);
        } else {
            kernels::linear_backward_input(d_input, d, layers_[0].wt);
        }
    }
}

void Mlp::refresh_transposes() {
    for (Linear& lin : layers_)
        lin.refresh_transpose();
}

MlpGrads Mlp::make_grads() const {
    MlpGrads g;
    g.layers.resize(layers_.size());
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        g.layers[l].dw.resize(layers_[l].w.rows, layers_[l].w.cols);
        g.layers[l].dbias.assign(layers_[l].bias.size(), 0.0);
    }
    return g;
}

void adam_update(std::span<double> p, std::span<const double> g, std::span<double> m, std::span<double> v, long t,
                 const AdamConfig& cfg) {
    const double c1 = 1.0 - std::pow(cfg.beta1, double(t));
    const double c2 = 1.0 - std::pow(cfg.beta2, double(t));
    for (std::size_t i = 0; i < p.size(); ++i) {
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
        const double m_hat = m[i] / c1;
        const double v_hat = v[i] / c2;
        p[i] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
    }
}

Adam::Adam(const Mlp& like, AdamConfig cfg) : cfg_(cfg) {
    for (const Linear& lin : like.layers()) {
        m_.emplace_back(lin.w.data.size(), 0.0);
        v_.emplace_back(lin.w.data.size(), 0.0);
        m_.emplace_back(lin.bias.size(), 0.0);
        v_.emplace_back(lin.bias.size(), 0.0);
    }
}

void Adam::step(Mlp& net, const MlpGrads& g) {
    if (!g.all_finite())
        throw TrainingHalt("adam: non-finite gradient");
    ++t_;
    std::size_t slot = 0;
    for (std::size_t l = 0; l < net.layers().size(); ++l) {
        Linear& lin = net.layers()[l];
        adam_update(lin.w.data, g.layers[l].dw.data, m_[slot], v_[slot], t_, cfg_);
        ++slot;
        adam_update(lin.bias, g.layers[l].dbias, m_[slot], v_[slot], t_, cfg_);
        ++slot;
    }
    net.refresh_transposes();
}

void AdamScalar::step(double& p, double g) {
    if (!std::isfinite(g))
        throw TrainingHalt("adam: non-finite gradient");
    ++t_;
    adam_update(std::span<double>(&p, 1), std::span<const double>(&g, 1), std::span<double>(&m_, 1),
                std::span<double>(&v_, 1), t_, cfg_);
}

} // namespace recoverl
