#ifndef PESSILAB_MLP_HPP_
#define PESSILAB_MLP_HPP_

#include <Eigen/Dense>
#include <vector>

#include "pessilab/mdp.hpp"
#include "pessilab/rng.hpp"

namespace pessilab {

enum class Activation { kRelu, kTanh };

// Fully-connected net: layer_sizes includes input and output widths, hidden
// layers use the configured activation, output is linear.
struct MlpSpec {
    std::vector<int> layer_sizes;
    Activation activation = Activation::kRelu;

    int n_layers() const { return static_cast<int>(layer_sizes.size()) - 1; }
    int input_dim() const { return layer_sizes.front(); }
    int output_dim() const { return layer_sizes.back(); }

    void validate() const {
        if (layer_sizes.size() < 3) throw ParameterError("MlpSpec: need at least one hidden layer");
        for (int n : layer_sizes)
            if (n < 1) throw ParameterError("MlpSpec: layer sizes must be positive");
    }

    int param_count() const {
        int total = 0;
        for (int l = 0; l < n_layers(); ++l) total += layer_sizes[l] * layer_sizes[l + 1] + layer_sizes[l + 1];
        return total;
    }

    // offset of layer l's weight block; biases follow the weights
    int weight_offset(int l) const {
        int off = 0;
        for (int i = 0; i < l; ++i) off += layer_sizes[i] * layer_sizes[i + 1] + layer_sizes[i + 1];
        return off;
    }
    int bias_offset(int l) const { return weight_offset(l) + layer_sizes[l] * layer_sizes[l + 1]; }
};

// Parameters live in one flat vector; maps expose per-layer views so the
// flatten/unflatten round trip is the identity by construction.
inline Eigen::Map<Matrix> weight_view(const MlpSpec& spec, Vector& params, int l) {
    return {params.data() + spec.weight_offset(l), spec.layer_sizes[l + 1], spec.layer_sizes[l]};
}
inline Eigen::Map<const Matrix> weight_view(const MlpSpec& spec, const Vector& params, int l) {
    return {params.data() + spec.weight_offset(l), spec.layer_sizes[l + 1], spec.layer_sizes[l]};
}
inline Eigen::Map<Vector> bias_view(const MlpSpec& spec, Vector& params, int l) {
    return {params.data() + spec.bias_offset(l), spec.layer_sizes[l + 1]};
}
inline Eigen::Map<const Vector> bias_view(const MlpSpec& spec, const Vector& params, int l) {
    return {params.data() + spec.bias_offset(l), spec.layer_sizes[l + 1]};
}

// Uniform fan-in initialization (+-sqrt(1/fan_in)) for weights and biases.
inline Vector init_params(const MlpSpec& spec, Rng& rng) {
    spec.validate();
    Vector params(spec.param_count());
    for (int l = 0; l < spec.n_layers(); ++l) {
        const double bound = std::sqrt(1.0 / spec.layer_sizes[l]);
        auto w = weight_view(spec, params, l);
        for (Eigen::Index j = 0; j < w.cols(); ++j)
            for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = rng.uniform(-bound, bound);
        auto b = bias_view(spec, params, l);
        for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = rng.uniform(-bound, bound);
    }
    return params;
}

// Forward cache: inputs plus post-activation outputs of every layer.
struct MlpCache {
    std::vector<Matrix> activations;  // activations[0] = input (in_dim x batch)
    std::vector<Matrix> pre_acts;     // pre-activation of each layer
};

// Batched forward pass; columns are samples.
inline Matrix mlp_forward(const MlpSpec& spec, const Vector& params, const Matrix& input, MlpCache* cache = nullptr) {
    if (input.rows() != spec.input_dim()) throw ParameterError("mlp_forward: input dimension mismatch");
    if (cache) {
        cache->activations.clear();
        cache->pre_acts.clear();
        cache->activations.push_back(input);
    }
    Matrix h = input;
    for (int l = 0; l < spec.n_layers(); ++l) {
        Matrix z = (weight_view(spec, params, l) * h).colwise() + bias_view(spec, params, l);
        if (l + 1 < spec.n_layers()) {
            if (spec.activation == Activation::kRelu)
                h = z.cwiseMax(0.0);
            else
                h = z.array().tanh().matrix();
        } else {
            h = z;
        }
        if (cache) {
            cache->pre_acts.push_back(std::move(z));
            cache->activations.push_back(h);
        }
    }
    return h;
}

// Reverse-mode gradient of sum_b upstream(:,b) . output(:,b) w.r.t. params.
// Optionally also produces the gradient w.r.t. the input batch.
inline Vector mlp_backward(const MlpSpec& spec, const Vector& params, const MlpCache& cache, const Matrix& upstream,
                           Matrix* input_grad = nullptr) {
    if (cache.activations.size() != static_cast<std::size_t>(spec.n_layers()) + 1)
        throw ParameterError("mlp_backward: cache does not match spec");
    Vector grad = Vector::Zero(spec.param_count());
    Matrix delta = upstream;  // gradient w.r.t. current layer pre-activation
    for (int l = spec.n_layers() - 1; l >= 0; --l) {
        if (l + 1 < spec.n_layers()) {
            // pass through the activation derivative
            const Matrix& z = cache.pre_acts[static_cast<std::size_t>(l)];
            if (spec.activation == Activation::kRelu)
                delta = delta.cwiseProduct((z.array() > 0.0).cast<double>().matrix());
            else
                delta = delta.cwiseProduct((1.0 - z.array().tanh().square()).matrix());
        }
        const Matrix& h_in = cache.activations[static_cast<std::size_t>(l)];
        weight_view(spec, grad, l) = delta * h_in.transpose();
        bias_view(spec, grad, l) = delta.rowwise().sum();
        if (l > 0 || input_grad) {
            Matrix next_delta = weight_view(spec, params, l).transpose() * delta;
            if (l == 0 && input_grad) *input_grad = std::move(next_delta);
            else delta = std::move(next_delta);
        }
    }
    return grad;
}

}  // namespace pessilab

#endif  // PESSILAB_MLP_HPP_
