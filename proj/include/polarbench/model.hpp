#pragma once

// Small fixed-architecture networks with hand-derived backpropagation.
//
//   mlp_classifier:  x -> [W, b, act] * hidden -> W, b -> softmax
//   char_lm:         context bytes -> concatenated embeddings -> same MLP
//
// Weight matrices are stored out x in. Loss is mean cross-entropy.

#include <cstdint>
#include <string_view>
#include <vector>

#include "polarbench/dataset.hpp"
#include "polarbench/matrix.hpp"

namespace polarbench {

enum class ModelKind { mlp_classifier, char_lm };
enum class Activation { relu, tanh };

std::string_view to_string(ModelKind k);
std::string_view to_string(Activation a);
ModelKind parse_model_kind(std::string_view s);
Activation parse_activation(std::string_view s);

struct ModelSpec {
    ModelKind kind = ModelKind::mlp_classifier;
    std::vector<int> layer_widths;  // hidden widths; layers = widths + 1 matrices
    Activation activation = Activation::relu;
    // Filled from the dataset for mlp_classifier.
    int input_dim = 0;
    int num_classes = 0;
    // char_lm only.
    int vocab_size = 0;
    int context_length = 16;
    int embedding_dim = 16;

    int network_input() const;
    int network_output() const;
    /// Throws ConfigError when shapes are missing or not positive.
    void validate() const;
};

/// Resolves dataset-dependent dimensions of `spec`.
ModelSpec bind_to_dataset(ModelSpec spec, const Dataset& d);

struct Parameters {
    std::vector<DenseMatrix> weights;  // hidden matrices take Muon-family updates, the last (head) does not
    std::vector<DenseVector> biases;   // coordinate-wise updates
    DenseMatrix embedding;             // vocab x embedding_dim, char_lm only; coordinate-wise

    Index count() const;
    double squared_norm() const;
    bool finite() const;
};

/// Scaled-uniform init ±√(6/(fan_in+fan_out)); biases zero; embeddings ±√(3/dim).
Parameters init_parameters(const ModelSpec& spec, std::uint64_t seed);
Parameters zeros_like(const Parameters& p);

struct LossAndGrads {
    double loss = 0;
    Parameters grads;
};

/// Mean cross-entropy and exact gradients. Throws DivergedError (step -1)
/// on a non-finite loss.
LossAndGrads forward_backward(const ModelSpec& spec, const Parameters& params, const Batch& batch);
double evaluate_loss(const ModelSpec& spec, const Parameters& params, const Batch& batch);

}  // namespace polarbench
