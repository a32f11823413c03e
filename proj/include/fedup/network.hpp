#pragma once

#include <cstdint>
#include <vector>

#include "fedup/dataset.hpp"
#include "fedup/model.hpp"

namespace fedup {

struct Logits {
    int rows = 0;
    int cols = 0;
    std::vector<double> values;
    double at(int r, int c) const { return values[static_cast<std::size_t>(r) * cols + c]; }
};

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// Adam moments, congruent with a ModelParams instance. Moments are kept
// in 64-bit; the step counter only ever increases.
struct OptimizerState {
    AdamConfig config;
    std::int64_t step = 0;
    std::vector<std::vector<double>> m_weights, v_weights, m_biases, v_biases;

    static OptimizerState init(const ModelParams& model, const AdamConfig& config = {});
    bool congruent_with(const ModelParams& model) const;
};

// Hidden layers are followed by ReLU; the final layer emits raw logits.
Logits forward(const ModelParams& model, const Batch& batch);

double mean_cross_entropy(const Logits& logits, const std::vector<int>& labels);

struct TrainStepResult {
    ModelParams model;
    OptimizerState opt;
    double loss = 0.0;
};

// One mini-batch step of cross-entropy + Adam. Pure: returns updated copies.
TrainStepResult train_step(const ModelParams& model, const OptimizerState& opt,
                           const Batch& batch);

// Fraction of samples whose argmax logit equals the label; argmax ties go
// to the lowest class index.
double evaluate(const ModelParams& model, const Dataset& dataset);

// Cosine of the flattened weight arrays of the last dense layer.
double last_layer_cosine_similarity(const ModelParams& a, const ModelParams& b);

}  // namespace fedup
