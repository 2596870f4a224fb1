#pragma once

// Minimal dense-network engine: forward evaluation, reverse-mode gradients
// (including gradients with respect to inputs), Adam, and Polyak soft
// updates. Only the dense pipelines the agent needs; no general graphs.
//
// All math is 64-bit. Heavy loops route through ctd3::kernels, so the same
// network runs on the scalar or AVX2 backend.

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "ctd3/rng.hpp"

namespace ctd3 {

// Row-major rows x cols matrix of doubles.
struct Tensor2 {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Tensor2() = default;
    Tensor2(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    void resize(std::size_t r, std::size_t c) {
        rows = r;
        cols = c;
        data.assign(r * c, 0.0);
    }

    double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
    double* row(std::size_t i) { return data.data() + i * cols; }
    const double* row(std::size_t i) const { return data.data() + i * cols; }
    std::size_t size() const { return rows * cols; }
    bool all_finite() const;
};

enum class Activation { identity, relu, tanh, sigmoid };

std::string_view to_string(Activation a);
Activation activation_from_string(std::string_view s); // throws on unknown tag

struct Layer {
    Tensor2 weight; // out x in
    std::vector<double> bias;
    Activation act = Activation::identity;

    std::size_t in_dim() const { return weight.cols; }
    std::size_t out_dim() const { return weight.rows; }
};

// Parameter-shaped buffers; used for gradients and for Adam moments.
struct LayerGrads {
    Tensor2 weight;
    std::vector<double> bias;
};

struct MlpGrads {
    std::vector<LayerGrads> layers;
    void zero();
    bool all_finite() const;
};

// Per-layer activations kept by the batched forward pass for reuse in
// backward; also owns the backward scratch so training steps stay
// allocation-free once warm.
struct MlpCache {
    std::vector<Tensor2> acts; // acts[0] = input batch, acts[L] = output
    Tensor2 g_a, g_b;          // backward scratch
};

struct Mlp {
    std::vector<Layer> layers;

    // dims has one more entry than acts: dims[0] is the input width.
    // Weights start uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)], biases too.
    static Mlp init(std::span<const std::size_t> dims,
                    std::span<const Activation> acts, Rng& rng);

    std::size_t input_dim() const { return layers.front().in_dim(); }
    std::size_t output_dim() const { return layers.back().out_dim(); }
    std::size_t param_count() const;
    bool same_architecture(const Mlp& other) const;

    std::vector<double> forward(std::span<const double> input) const;

    // Batched evaluation; input is N x input_dim. Returns cache.acts.back().
    const Tensor2& forward_batch(const Tensor2& input, MlpCache& cache) const;

    // Gradients of sum_i <upstream_i, output_i> with respect to parameters
    // (written to grads) and, when input_grad != nullptr, to the input batch.
    // Requires the cache of the matching forward_batch call.
    void backward_batch(MlpCache& cache, const Tensor2& upstream, MlpGrads& grads,
                        Tensor2* input_grad) const;

    // Single-sample reverse pass: returns parameter grads and the input grad.
    std::pair<MlpGrads, std::vector<double>>
    backward(std::span<const double> input, std::span<const double> upstream) const;

    MlpGrads make_grads() const; // zeroed, parameter-shaped
};

// target <- tau * source + (1 - tau) * target, parameter by parameter.
void soft_update(Mlp& target, const Mlp& source, double tau);

struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long long step = 0;
    std::vector<LayerGrads> m, v;

    static AdamState for_net(const Mlp& net);
};

// One bias-corrected Adam step (descent). Rejects non-finite gradients and
// shape mismatches before touching any parameter.
void adam_step(Mlp& net, const MlpGrads& grads, AdamState& state, double lr);

// Central-difference gradient (h = 1e-5) of scalar_head(forward(input)) with
// respect to every parameter. Test oracle for the reverse pass.
MlpGrads finite_diff_grad(const Mlp& net, std::span<const double> input,
                          const std::function<double(std::span<const double>)>& scalar_head);

// Text checkpoint: header "MLP v1 <layers> <dims...> <acts...>" followed by
// all parameters as decimals with 17 significant digits (round-trip exact).
void save_mlp(std::ostream& out, const Mlp& net);
Mlp load_mlp(std::istream& in);

} // namespace ctd3
