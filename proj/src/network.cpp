#include "fedup/network.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "fedup/errors.hpp"

namespace fedup {

namespace {

// Activation tensor flowing through the network: `shape` is per-sample,
// values are batch-major in 64-bit.
struct Activation {
    std::vector<int> shape;
    int count = 0;
    std::vector<double> values;

    std::size_t per_sample() const {
        std::size_t n = 1;
        for (int d : shape) n *= static_cast<std::size_t>(d);
        return n;
    }
};

struct ForwardCache {
    std::vector<Activation> inputs;  // input seen by each layer
    std::vector<Activation> pre;     // each layer's pre-activation output
};

Activation batch_to_activation(const Batch& batch) {
    if (batch.count < 1) throw UsageError("forward: batch_size must be >= 1");
    Activation a;
    a.shape = batch.sample_shape;
    a.count = batch.count;
    a.values.assign(batch.inputs.begin(), batch.inputs.end());
    if (a.values.size() != a.per_sample() * static_cast<std::size_t>(a.count))
        throw IntegrityError("forward: batch buffer size mismatch");
    return a;
}

Activation apply_dense(const LayerParams& l, const Activation& in, std::size_t layer_idx) {
    const std::size_t out_n = l.shape[0];
    const std::size_t in_n = l.shape[1];
    if (in.per_sample() != in_n)
        throw ConfigError("forward: dense layer " + std::to_string(layer_idx) + " expects " +
                          std::to_string(in_n) + " inputs, got " +
                          std::to_string(in.per_sample()));
    Activation out;
    out.shape = {static_cast<int>(out_n)};
    out.count = in.count;
    out.values.resize(static_cast<std::size_t>(in.count) * out_n);
    for (int s = 0; s < in.count; ++s) {
        const double* x = in.values.data() + static_cast<std::size_t>(s) * in_n;
        double* y = out.values.data() + static_cast<std::size_t>(s) * out_n;
        for (std::size_t o = 0; o < out_n; ++o) {
            double acc = l.biases[o];
            const float* w = l.weights.data() + o * in_n;
            for (std::size_t k = 0; k < in_n; ++k) acc += static_cast<double>(w[k]) * x[k];
            y[o] = acc;
        }
    }
    return out;
}

Activation apply_conv2d(const LayerParams& l, const Activation& in, std::size_t layer_idx) {
    if (in.shape.size() != 3)
        throw ConfigError("forward: conv2d layer " + std::to_string(layer_idx) +
                          " expects channels x h x w input");
    const int oc = static_cast<int>(l.shape[0]);
    const int ic = static_cast<int>(l.shape[1]);
    const int kh = static_cast<int>(l.shape[2]);
    const int kw = static_cast<int>(l.shape[3]);
    const int c = in.shape[0], h = in.shape[1], w = in.shape[2];
    if (c != ic)
        throw ConfigError("forward: conv2d layer " + std::to_string(layer_idx) +
                          " channel mismatch");
    const int oh = h - kh + 1, ow = w - kw + 1;
    if (oh < 1 || ow < 1)
        throw ConfigError("forward: conv2d layer " + std::to_string(layer_idx) +
                          " kernel larger than input");

    Activation out;
    out.shape = {oc, oh, ow};
    out.count = in.count;
    out.values.resize(static_cast<std::size_t>(in.count) * oc * oh * ow);
    const std::size_t in_ss = in.per_sample();
    for (int s = 0; s < in.count; ++s) {
        const double* x = in.values.data() + static_cast<std::size_t>(s) * in_ss;
        double* y = out.values.data() + static_cast<std::size_t>(s) * oc * oh * ow;
        for (int o = 0; o < oc; ++o) {
            for (int oy = 0; oy < oh; ++oy) {
                for (int ox = 0; ox < ow; ++ox) {
                    double acc = l.biases[o];
                    for (int i = 0; i < ic; ++i) {
                        for (int ky = 0; ky < kh; ++ky) {
                            const float* wrow =
                                l.weights.data() +
                                ((static_cast<std::size_t>(o) * ic + i) * kh + ky) * kw;
                            const double* xrow =
                                x + (static_cast<std::size_t>(i) * h + oy + ky) * w + ox;
                            for (int kx = 0; kx < kw; ++kx)
                                acc += static_cast<double>(wrow[kx]) * xrow[kx];
                        }
                    }
                    y[(static_cast<std::size_t>(o) * oh + oy) * ow + ox] = acc;
                }
            }
        }
    }
    return out;
}

Activation apply_other(const LayerParams& l, const Activation& in, std::size_t layer_idx) {
    const std::size_t dim = l.shape[0];
    if (in.per_sample() != dim)
        throw ConfigError("forward: affine layer " + std::to_string(layer_idx) +
                          " size mismatch");
    Activation out = in;  // keeps the incoming shape
    for (int s = 0; s < in.count; ++s) {
        double* y = out.values.data() + static_cast<std::size_t>(s) * dim;
        for (std::size_t d = 0; d < dim; ++d)
            y[d] = static_cast<double>(l.weights[d]) * y[d] + l.biases[d];
    }
    return out;
}

Activation forward_impl(const ModelParams& model, const Batch& batch, ForwardCache* cache) {
    if (model.layers.empty()) throw ConfigError("forward: model has no layers");
    Activation a = batch_to_activation(batch);
    const std::size_t n_layers = model.layers.size();
    for (std::size_t i = 0; i < n_layers; ++i) {
        const auto& l = model.layers[i];
        if (cache) cache->inputs.push_back(a);
        Activation pre;
        switch (l.kind) {
            case LayerKind::dense: pre = apply_dense(l, a, i); break;
            case LayerKind::conv2d: pre = apply_conv2d(l, a, i); break;
            case LayerKind::other: pre = apply_other(l, a, i); break;
        }
        if (cache) cache->pre.push_back(pre);
        if (i + 1 < n_layers) {
            for (auto& v : pre.values) v = v > 0.0 ? v : 0.0;
        }
        a = std::move(pre);
    }
    return a;
}

Logits to_logits(Activation&& a) {
    if (a.shape.size() != 1)
        throw ConfigError("forward: final layer must produce a flat class vector");
    Logits out;
    out.rows = a.count;
    out.cols = a.shape[0];
    out.values = std::move(a.values);
    return out;
}

// Mean cross-entropy and, when requested, its gradient w.r.t. the logits.
double softmax_cross_entropy(const Logits& logits, const std::vector<int>& labels,
                             std::vector<double>* dlogits) {
    if (static_cast<int>(labels.size()) != logits.rows)
        throw UsageError("cross_entropy: label count mismatch");
    if (dlogits) dlogits->assign(logits.values.size(), 0.0);
    double total = 0.0;
    const int c = logits.cols;
    for (int r = 0; r < logits.rows; ++r) {
        const int label = labels[r];
        if (label < 0 || label >= c) throw UsageError("cross_entropy: label out of range");
        const double* row = logits.values.data() + static_cast<std::size_t>(r) * c;
        double m = row[0];
        for (int j = 1; j < c; ++j) m = std::max(m, row[j]);
        double z = 0.0;
        for (int j = 0; j < c; ++j) z += std::exp(row[j] - m);
        const double logz = std::log(z) + m;
        total += logz - row[label];
        if (dlogits) {
            double* g = dlogits->data() + static_cast<std::size_t>(r) * c;
            const double inv = 1.0 / static_cast<double>(logits.rows);
            for (int j = 0; j < c; ++j) g[j] = std::exp(row[j] - logz) * inv;
            g[label] -= inv;
        }
    }
    return total / static_cast<double>(logits.rows);
}

struct Gradients {
    std::vector<std::vector<double>> weights;
    std::vector<std::vector<double>> biases;
};

void dense_backward(const LayerParams& l, const Activation& in, const std::vector<double>& g,
                    std::vector<double>& gw, std::vector<double>& gb,
                    std::vector<double>& gin) {
    const std::size_t out_n = l.shape[0];
    const std::size_t in_n = l.shape[1];
    for (int s = 0; s < in.count; ++s) {
        const double* x = in.values.data() + static_cast<std::size_t>(s) * in_n;
        const double* go = g.data() + static_cast<std::size_t>(s) * out_n;
        double* gx = gin.data() + static_cast<std::size_t>(s) * in_n;
        for (std::size_t o = 0; o < out_n; ++o) {
            const double gv = go[o];
            gb[o] += gv;
            double* gwrow = gw.data() + o * in_n;
            const float* wrow = l.weights.data() + o * in_n;
            for (std::size_t k = 0; k < in_n; ++k) {
                gwrow[k] += gv * x[k];
                gx[k] += gv * static_cast<double>(wrow[k]);
            }
        }
    }
}

void conv2d_backward(const LayerParams& l, const Activation& in, const Activation& pre,
                     const std::vector<double>& g, std::vector<double>& gw,
                     std::vector<double>& gb, std::vector<double>& gin) {
    const int oc = static_cast<int>(l.shape[0]);
    const int ic = static_cast<int>(l.shape[1]);
    const int kh = static_cast<int>(l.shape[2]);
    const int kw = static_cast<int>(l.shape[3]);
    const int h = in.shape[1], w = in.shape[2];
    const int oh = pre.shape[1], ow = pre.shape[2];
    const std::size_t in_ss = in.per_sample();
    const std::size_t out_ss = pre.per_sample();
    for (int s = 0; s < in.count; ++s) {
        const double* x = in.values.data() + static_cast<std::size_t>(s) * in_ss;
        const double* go = g.data() + static_cast<std::size_t>(s) * out_ss;
        double* gx = gin.data() + static_cast<std::size_t>(s) * in_ss;
        for (int o = 0; o < oc; ++o) {
            for (int oy = 0; oy < oh; ++oy) {
                for (int ox = 0; ox < ow; ++ox) {
                    const double gv = go[(static_cast<std::size_t>(o) * oh + oy) * ow + ox];
                    gb[o] += gv;
                    for (int i = 0; i < ic; ++i) {
                        for (int ky = 0; ky < kh; ++ky) {
                            double* gwrow =
                                gw.data() + ((static_cast<std::size_t>(o) * ic + i) * kh + ky) * kw;
                            const float* wrow =
                                l.weights.data() +
                                ((static_cast<std::size_t>(o) * ic + i) * kh + ky) * kw;
                            const std::size_t xoff =
                                (static_cast<std::size_t>(i) * h + oy + ky) * w + ox;
                            for (int kx = 0; kx < kw; ++kx) {
                                gwrow[kx] += gv * x[xoff + kx];
                                gx[xoff + kx] += gv * static_cast<double>(wrow[kx]);
                            }
                        }
                    }
                }
            }
        }
    }
}

void other_backward(const LayerParams& l, const Activation& in, const std::vector<double>& g,
                    std::vector<double>& gw, std::vector<double>& gb,
                    std::vector<double>& gin) {
    const std::size_t dim = l.shape[0];
    for (int s = 0; s < in.count; ++s) {
        const double* x = in.values.data() + static_cast<std::size_t>(s) * dim;
        const double* go = g.data() + static_cast<std::size_t>(s) * dim;
        double* gx = gin.data() + static_cast<std::size_t>(s) * dim;
        for (std::size_t d = 0; d < dim; ++d) {
            gw[d] += go[d] * x[d];
            gb[d] += go[d];
            gx[d] += go[d] * static_cast<double>(l.weights[d]);
        }
    }
}

Gradients backward_impl(const ModelParams& model, const ForwardCache& cache,
                        std::vector<double> g) {
    const std::size_t n_layers = model.layers.size();
    Gradients grads;
    grads.weights.resize(n_layers);
    grads.biases.resize(n_layers);
    for (std::size_t li = n_layers; li-- > 0;) {
        const auto& l = model.layers[li];
        const Activation& in = cache.inputs[li];
        grads.weights[li].assign(l.weights.size(), 0.0);
        grads.biases[li].assign(l.biases.size(), 0.0);
        std::vector<double> gin(in.values.size(), 0.0);
        switch (l.kind) {
            case LayerKind::dense:
                dense_backward(l, in, g, grads.weights[li], grads.biases[li], gin);
                break;
            case LayerKind::conv2d:
                conv2d_backward(l, in, cache.pre[li], g, grads.weights[li], grads.biases[li],
                                gin);
                break;
            case LayerKind::other:
                other_backward(l, in, g, grads.weights[li], grads.biases[li], gin);
                break;
        }
        if (li > 0) {
            // gin is w.r.t. the post-ReLU output of the previous layer.
            const auto& prev_pre = cache.pre[li - 1].values;
            for (std::size_t j = 0; j < gin.size(); ++j)
                if (prev_pre[j] <= 0.0) gin[j] = 0.0;
        }
        g = std::move(gin);
    }
    return grads;
}

void adam_update(std::vector<float>& params, std::vector<double>& m, std::vector<double>& v,
                 const std::vector<double>& grad, const AdamConfig& cfg, double bc1,
                 double bc2) {
    for (std::size_t j = 0; j < params.size(); ++j) {
        m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * grad[j];
        v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * grad[j] * grad[j];
        const double mhat = m[j] / bc1;
        const double vhat = v[j] / bc2;
        params[j] = static_cast<float>(static_cast<double>(params[j]) -
                                       cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon));
    }
}

}  // namespace

OptimizerState OptimizerState::init(const ModelParams& model, const AdamConfig& config) {
    OptimizerState s;
    s.config = config;
    for (const auto& l : model.layers) {
        s.m_weights.emplace_back(l.weights.size(), 0.0);
        s.v_weights.emplace_back(l.weights.size(), 0.0);
        s.m_biases.emplace_back(l.biases.size(), 0.0);
        s.v_biases.emplace_back(l.biases.size(), 0.0);
    }
    return s;
}

bool OptimizerState::congruent_with(const ModelParams& model) const {
    if (m_weights.size() != model.layers.size()) return false;
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
        if (m_weights[i].size() != model.layers[i].weights.size()) return false;
        if (m_biases[i].size() != model.layers[i].biases.size()) return false;
    }
    return true;
}

Logits forward(const ModelParams& model, const Batch& batch) {
    return to_logits(forward_impl(model, batch, nullptr));
}

double mean_cross_entropy(const Logits& logits, const std::vector<int>& labels) {
    return softmax_cross_entropy(logits, labels, nullptr);
}

TrainStepResult train_step(const ModelParams& model, const OptimizerState& opt,
                           const Batch& batch) {
    if (!opt.congruent_with(model))
        throw IntegrityError("train_step: optimizer state not congruent with model");

    ForwardCache cache;
    Logits logits = to_logits(forward_impl(model, batch, &cache));
    std::vector<double> dlogits;
    const double loss = softmax_cross_entropy(logits, batch.labels, &dlogits);
    if (!std::isfinite(loss))
        throw NumericalError("train_step: non-finite loss at optimizer step " +
                             std::to_string(opt.step + 1));

    Gradients grads = backward_impl(model, cache, std::move(dlogits));

    TrainStepResult out{model, opt, loss};
    out.opt.step = opt.step + 1;
    const double bc1 = 1.0 - std::pow(out.opt.config.beta1, static_cast<double>(out.opt.step));
    const double bc2 = 1.0 - std::pow(out.opt.config.beta2, static_cast<double>(out.opt.step));
    for (std::size_t li = 0; li < model.layers.size(); ++li) {
        auto& layer = out.model.layers[li];
        adam_update(layer.weights, out.opt.m_weights[li], out.opt.v_weights[li],
                    grads.weights[li], out.opt.config, bc1, bc2);
        adam_update(layer.biases, out.opt.m_biases[li], out.opt.v_biases[li], grads.biases[li],
                    out.opt.config, bc1, bc2);
    }
    if (!all_finite(out.model))
        throw NumericalError("train_step: non-finite parameter after update at step " +
                             std::to_string(out.opt.step));
    return out;
}

double evaluate(const ModelParams& model, const Dataset& dataset) {
    if (dataset.size() == 0) throw UsageError("evaluate: empty dataset");
    constexpr std::size_t kChunk = 256;
    std::size_t correct = 0;
    std::vector<std::size_t> idx;
    for (std::size_t start = 0; start < dataset.size(); start += kChunk) {
        const std::size_t end = std::min(dataset.size(), start + kChunk);
        idx.resize(end - start);
        std::iota(idx.begin(), idx.end(), start);
        const Batch b = make_batch(dataset, idx);
        const Logits logits = forward(model, b);
        for (int r = 0; r < logits.rows; ++r) {
            int best = 0;
            double best_v = logits.at(r, 0);
            for (int c = 1; c < logits.cols; ++c) {
                if (logits.at(r, c) > best_v) {
                    best_v = logits.at(r, c);
                    best = c;
                }
            }
            if (best == dataset.labels[start + static_cast<std::size_t>(r)]) ++correct;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(dataset.size());
}

double last_layer_cosine_similarity(const ModelParams& a, const ModelParams& b) {
    require_congruent(a, b, "last_layer_cosine_similarity");
    const LayerParams* la = nullptr;
    const LayerParams* lb = nullptr;
    for (std::size_t i = a.layers.size(); i-- > 0;) {
        if (a.layers[i].kind == LayerKind::dense) {
            la = &a.layers[i];
            lb = &b.layers[i];
            break;
        }
    }
    if (!la) throw UsageError("last_layer_cosine_similarity: model has no dense layer");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t j = 0; j < la->weights.size(); ++j) {
        const double x = la->weights[j];
        const double y = lb->weights[j];
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if (na == 0.0 || nb == 0.0)
        throw NumericalError("last_layer_cosine_similarity: zero-norm weight vector");
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace fedup
