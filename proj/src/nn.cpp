#include "ctd3/nn.hpp"

#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>

#include "ctd3/kernels.hpp"
#include "text_util.hpp"

namespace ctd3 {

namespace {

// Reshape without the zero-fill of Tensor2::resize; contents are garbage
// until the caller overwrites them.
void ensure_shape(Tensor2& t, std::size_t r, std::size_t c) {
    t.rows = r;
    t.cols = c;
    t.data.resize(r * c);
}

void apply_activation(Activation act, double* a, std::size_t n) {
    switch (act) {
    case Activation::identity: break;
    case Activation::relu: kernels::relu_forward(a, n); break;
    case Activation::tanh: kernels::tanh_forward(a, n); break;
    case Activation::sigmoid: kernels::sigmoid_forward(a, n); break;
    }
}

// g *= act'(z), expressed through the stored post-activation values a.
void activation_grad(Activation act, const double* a, double* g, std::size_t n) {
    switch (act) {
    case Activation::identity: break;
    case Activation::relu: kernels::relu_backward(a, g, n); break;
    case Activation::tanh: kernels::tanh_backward(a, g, n); break;
    case Activation::sigmoid: kernels::sigmoid_backward(a, g, n); break;
    }
}

bool finite_block(const double* p, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        if (!std::isfinite(p[i])) return false;
    return true;
}

} // namespace

bool Tensor2::all_finite() const {
    return finite_block(data.data(), data.size());
}

std::string_view to_string(Activation a) {
    switch (a) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::sigmoid: return "sigmoid";
    }
    return "identity";
}

Activation activation_from_string(std::string_view s) {
    if (s == "identity") return Activation::identity;
    if (s == "relu") return Activation::relu;
    if (s == "tanh") return Activation::tanh;
    if (s == "sigmoid") return Activation::sigmoid;
    throw std::invalid_argument("unknown activation '" + std::string(s) + "'");
}

void MlpGrads::zero() {
    for (auto& l : layers) {
        std::fill(l.weight.data.begin(), l.weight.data.end(), 0.0);
        std::fill(l.bias.begin(), l.bias.end(), 0.0);
    }
}

bool MlpGrads::all_finite() const {
    for (const auto& l : layers) {
        if (!l.weight.all_finite()) return false;
        if (!finite_block(l.bias.data(), l.bias.size())) return false;
    }
    return true;
}

Mlp Mlp::init(std::span<const std::size_t> dims,
              std::span<const Activation> acts, Rng& rng) {
    if (dims.size() < 2)
        throw std::invalid_argument("Mlp::init: need at least input and output dims, got " +
                                    std::to_string(dims.size()));
    if (acts.size() != dims.size() - 1)
        throw std::invalid_argument("Mlp::init: " + std::to_string(dims.size() - 1) +
                                    " layers but " + std::to_string(acts.size()) +
                                    " activations");
    for (std::size_t d : dims)
        if (d == 0) throw std::invalid_argument("Mlp::init: zero layer width");

    Mlp net;
    net.layers.resize(acts.size());
    for (std::size_t l = 0; l < acts.size(); ++l) {
        Layer& layer = net.layers[l];
        layer.weight = Tensor2(dims[l + 1], dims[l]);
        layer.bias.assign(dims[l + 1], 0.0);
        layer.act = acts[l];
        const double bound = 1.0 / std::sqrt(static_cast<double>(dims[l]));
        for (double& w : layer.weight.data) w = rng.uniform(-bound, bound);
        for (double& b : layer.bias) b = rng.uniform(-bound, bound);
    }
    return net;
}

std::size_t Mlp::param_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.weight.size() + l.bias.size();
    return n;
}

bool Mlp::same_architecture(const Mlp& other) const {
    if (layers.size() != other.layers.size()) return false;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        if (layers[l].weight.rows != other.layers[l].weight.rows) return false;
        if (layers[l].weight.cols != other.layers[l].weight.cols) return false;
        if (layers[l].act != other.layers[l].act) return false;
    }
    return true;
}

std::vector<double> Mlp::forward(std::span<const double> input) const {
    if (input.size() != input_dim())
        throw std::invalid_argument("Mlp::forward: input length " +
                                    std::to_string(input.size()) +
                                    " but network expects " + std::to_string(input_dim()));
    std::vector<double> cur(input.begin(), input.end());
    std::vector<double> next;
    for (const auto& layer : layers) {
        next.resize(layer.out_dim());
        kernels::matvec(layer.weight.data.data(), cur.data(), next.data(),
                        layer.out_dim(), layer.in_dim());
        for (std::size_t i = 0; i < next.size(); ++i) next[i] += layer.bias[i];
        apply_activation(layer.act, next.data(), next.size());
        cur.swap(next);
    }
    return cur;
}

const Tensor2& Mlp::forward_batch(const Tensor2& input, MlpCache& cache) const {
    if (input.cols != input_dim())
        throw std::invalid_argument("Mlp::forward_batch: input width " +
                                    std::to_string(input.cols) + " but network expects " +
                                    std::to_string(input_dim()));
    if (input.rows == 0)
        throw std::invalid_argument("Mlp::forward_batch: empty batch");

    cache.acts.resize(layers.size() + 1);
    cache.acts[0] = input;
    const std::size_t n = input.rows;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const Layer& layer = layers[l];
        Tensor2& out = cache.acts[l + 1];
        ensure_shape(out, n, layer.out_dim());
        kernels::gemm_nt(cache.acts[l].data.data(), layer.weight.data.data(),
                         out.data.data(), n, layer.in_dim(), layer.out_dim(), false);
        kernels::add_bias_rows(out.data.data(), layer.bias.data(), n, layer.out_dim());
        apply_activation(layer.act, out.data.data(), out.size());
    }
    return cache.acts.back();
}

void Mlp::backward_batch(MlpCache& cache, const Tensor2& upstream, MlpGrads& grads,
                         Tensor2* input_grad) const {
    if (cache.acts.size() != layers.size() + 1)
        throw std::invalid_argument("Mlp::backward_batch: cache does not match network");
    const Tensor2& out = cache.acts.back();
    if (upstream.rows != out.rows || upstream.cols != out.cols)
        throw std::invalid_argument("Mlp::backward_batch: upstream is " +
                                    std::to_string(upstream.rows) + "x" +
                                    std::to_string(upstream.cols) + " but output is " +
                                    std::to_string(out.rows) + "x" + std::to_string(out.cols));

    grads.layers.resize(layers.size());
    const std::size_t n = out.rows;

    Tensor2* cur = &cache.g_a;
    Tensor2* next = &cache.g_b;
    *cur = upstream;

    for (std::size_t li = layers.size(); li-- > 0;) {
        const Layer& layer = layers[li];
        LayerGrads& lg = grads.layers[li];
        ensure_shape(lg.weight, layer.out_dim(), layer.in_dim());
        lg.bias.resize(layer.out_dim());

        activation_grad(layer.act, cache.acts[li + 1].data.data(), cur->data.data(),
                        cur->size());

        // dW = g^T * a_prev, db = column sums of g
        kernels::gemm_tn(cur->data.data(), cache.acts[li].data.data(),
                         lg.weight.data.data(), layer.out_dim(), n, layer.in_dim(), false);
        kernels::col_sums(cur->data.data(), lg.bias.data(), n, layer.out_dim());

        const bool need_dx = li > 0 || input_grad != nullptr;
        if (!need_dx) break;
        Tensor2* dst = (li == 0) ? input_grad : next;
        ensure_shape(*dst, n, layer.in_dim());
        kernels::gemm_nn(cur->data.data(), layer.weight.data.data(), dst->data.data(),
                         n, layer.out_dim(), layer.in_dim(), false);
        std::swap(cur, next);
    }
}

std::pair<MlpGrads, std::vector<double>>
Mlp::backward(std::span<const double> input, std::span<const double> upstream) const {
    if (input.size() != input_dim())
        throw std::invalid_argument("Mlp::backward: input length " +
                                    std::to_string(input.size()) + " but network expects " +
                                    std::to_string(input_dim()));
    if (upstream.size() != output_dim())
        throw std::invalid_argument("Mlp::backward: upstream length " +
                                    std::to_string(upstream.size()) +
                                    " but network outputs " + std::to_string(output_dim()));

    std::vector<std::vector<double>> acts(layers.size() + 1);
    acts[0].assign(input.begin(), input.end());
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const Layer& layer = layers[l];
        acts[l + 1].resize(layer.out_dim());
        kernels::matvec(layer.weight.data.data(), acts[l].data(), acts[l + 1].data(),
                        layer.out_dim(), layer.in_dim());
        for (std::size_t i = 0; i < acts[l + 1].size(); ++i)
            acts[l + 1][i] += layer.bias[i];
        apply_activation(layer.act, acts[l + 1].data(), acts[l + 1].size());
    }

    MlpGrads grads = make_grads();
    std::vector<double> g(upstream.begin(), upstream.end());
    std::vector<double> g_prev;
    for (std::size_t li = layers.size(); li-- > 0;) {
        const Layer& layer = layers[li];
        activation_grad(layer.act, acts[li + 1].data(), g.data(), g.size());
        LayerGrads& lg = grads.layers[li];
        for (std::size_t i = 0; i < layer.out_dim(); ++i) {
            const double gi = g[i];
            double* wrow = lg.weight.row(i);
            const double* prev = acts[li].data();
            for (std::size_t j = 0; j < layer.in_dim(); ++j) wrow[j] = gi * prev[j];
            lg.bias[i] = gi;
        }
        g_prev.resize(layer.in_dim());
        kernels::matvec_t(layer.weight.data.data(), g.data(), g_prev.data(),
                          layer.out_dim(), layer.in_dim());
        g.swap(g_prev);
    }
    return {std::move(grads), std::move(g)};
}

MlpGrads Mlp::make_grads() const {
    MlpGrads g;
    g.layers.resize(layers.size());
    for (std::size_t l = 0; l < layers.size(); ++l) {
        g.layers[l].weight = Tensor2(layers[l].out_dim(), layers[l].in_dim());
        g.layers[l].bias.assign(layers[l].out_dim(), 0.0);
    }
    return g;
}

void soft_update(Mlp& target, const Mlp& source, double tau) {
    if (!target.same_architecture(source))
        throw std::invalid_argument("soft_update: target and source architectures differ");
    for (std::size_t l = 0; l < target.layers.size(); ++l) {
        Layer& t = target.layers[l];
        const Layer& s = source.layers[l];
        kernels::axpby(tau, s.weight.data.data(), 1.0 - tau, t.weight.data.data(),
                       t.weight.size());
        kernels::axpby(tau, s.bias.data(), 1.0 - tau, t.bias.data(), t.bias.size());
    }
}

AdamState AdamState::for_net(const Mlp& net) {
    AdamState st;
    auto shaped = net.make_grads();
    st.m = shaped.layers;
    st.v = std::move(shaped.layers);
    return st;
}

void adam_step(Mlp& net, const MlpGrads& grads, AdamState& state, double lr) {
    if (grads.layers.size() != net.layers.size() || state.m.size() != net.layers.size() ||
        state.v.size() != net.layers.size())
        throw std::invalid_argument("adam_step: gradient/state layer count does not match network");
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        if (grads.layers[l].weight.size() != net.layers[l].weight.size() ||
            grads.layers[l].bias.size() != net.layers[l].bias.size())
            throw std::invalid_argument("adam_step: gradient shape mismatch at layer " +
                                        std::to_string(l));
    }
    if (!grads.all_finite())
        throw std::runtime_error("adam_step: non-finite gradient");

    ++state.step;
    const double b1p = std::pow(state.beta1, static_cast<double>(state.step));
    const double b2p = std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        Layer& layer = net.layers[l];
        kernels::adam_update(layer.weight.data.data(), grads.layers[l].weight.data.data(),
                             state.m[l].weight.data.data(), state.v[l].weight.data.data(),
                             layer.weight.size(), lr, state.beta1, state.beta2, state.eps,
                             b1p, b2p);
        kernels::adam_update(layer.bias.data(), grads.layers[l].bias.data(),
                             state.m[l].bias.data(), state.v[l].bias.data(),
                             layer.bias.size(), lr, state.beta1, state.beta2, state.eps,
                             b1p, b2p);
    }
}

MlpGrads finite_diff_grad(const Mlp& net, std::span<const double> input,
                          const std::function<double(std::span<const double>)>& scalar_head) {
    const double h = 1e-5;
    Mlp work = net;
    MlpGrads out = net.make_grads();
    auto eval = [&]() {
        auto y = work.forward(input);
        return scalar_head(y);
    };
    for (std::size_t l = 0; l < work.layers.size(); ++l) {
        auto probe = [&](double* p, double* g, std::size_t n) {
            for (std::size_t i = 0; i < n; ++i) {
                const double orig = p[i];
                p[i] = orig + h;
                const double fp = eval();
                p[i] = orig - h;
                const double fm = eval();
                p[i] = orig;
                g[i] = (fp - fm) / (2.0 * h);
            }
        };
        probe(work.layers[l].weight.data.data(), out.layers[l].weight.data.data(),
              work.layers[l].weight.size());
        probe(work.layers[l].bias.data(), out.layers[l].bias.data(),
              work.layers[l].bias.size());
    }
    return out;
}

void save_mlp(std::ostream& out, const Mlp& net) {
    out << "MLP v1 " << net.layers.size();
    out << ' ' << net.input_dim();
    for (const auto& l : net.layers) out << ' ' << l.out_dim();
    for (const auto& l : net.layers) out << ' ' << to_string(l.act);
    out << '\n';
    char buf[40];
    for (const auto& l : net.layers) {
        for (std::size_t i = 0; i < l.weight.rows; ++i) {
            for (std::size_t j = 0; j < l.weight.cols; ++j) {
                if (j) out << ' ';
                out << format_double(buf, l.weight.at(i, j));
            }
            out << '\n';
        }
        for (std::size_t i = 0; i < l.bias.size(); ++i) {
            if (i) out << ' ';
            out << format_double(buf, l.bias[i]);
        }
        out << '\n';
    }
}

Mlp load_mlp(std::istream& in) {
    std::string magic, version;
    if (!(in >> magic >> version) || magic != "MLP" || version != "v1")
        throw std::runtime_error("load_mlp: not an MLP v1 checkpoint (header '" + magic +
                                 " " + version + "')");
    std::string tok;
    auto next_token = [&](const char* what) -> std::string& {
        if (!(in >> tok))
            throw std::runtime_error(std::string("load_mlp: truncated checkpoint, expected ") +
                                     what);
        return tok;
    };
    const long long num_layers = parse_int(next_token("layer count"), "layer count");
    if (num_layers < 1 || num_layers > 64)
        throw std::runtime_error("load_mlp: implausible layer count " +
                                 std::to_string(num_layers));
    std::vector<std::size_t> dims(static_cast<std::size_t>(num_layers) + 1);
    for (auto& d : dims) {
        const long long v = parse_int(next_token("dimension"), "dimension");
        if (v < 1) throw std::runtime_error("load_mlp: bad layer width " + std::to_string(v));
        d = static_cast<std::size_t>(v);
    }
    std::vector<Activation> acts(static_cast<std::size_t>(num_layers));
    for (auto& a : acts) a = activation_from_string(next_token("activation"));

    Mlp net;
    net.layers.resize(acts.size());
    for (std::size_t l = 0; l < acts.size(); ++l) {
        net.layers[l].weight = Tensor2(dims[l + 1], dims[l]);
        net.layers[l].bias.assign(dims[l + 1], 0.0);
        net.layers[l].act = acts[l];
    }
    for (auto& layer : net.layers) {
        for (double& w : layer.weight.data) w = parse_double(next_token("weight"), "weight");
        for (double& b : layer.bias) b = parse_double(next_token("bias"), "bias");
    }
    return net;
}

} // namespace ctd3
