#include "polarbench/model.hpp"

#include <cmath>
#include <string>

namespace polarbench {

std::string_view to_string(ModelKind k) {
    return k == ModelKind::mlp_classifier ? "mlp_classifier" : "char_lm";
}

std::string_view to_string(Activation a) { return a == Activation::relu ? "relu" : "tanh"; }

ModelKind parse_model_kind(std::string_view s) {
    if (s == "mlp_classifier") return ModelKind::mlp_classifier;
    if (s == "char_lm") return ModelKind::char_lm;
    throw ConfigError("unknown model kind '" + std::string(s) + "'");
}

Activation parse_activation(std::string_view s) {
    if (s == "relu") return Activation::relu;
    if (s == "tanh") return Activation::tanh;
    throw ConfigError("unknown activation '" + std::string(s) + "'");
}

int ModelSpec::network_input() const {
    return kind == ModelKind::char_lm ? context_length * embedding_dim : input_dim;
}

int ModelSpec::network_output() const {
    return kind == ModelKind::char_lm ? vocab_size : num_classes;
}

void ModelSpec::validate() const {
    if (layer_widths.empty()) {
        throw ConfigError("model.layer_widths needs at least one hidden width (two matrix layers)");
    }
    for (int w : layer_widths) {
        if (w < 1) throw ConfigError("model.layer_widths entries must be positive");
    }
    if (kind == ModelKind::char_lm) {
        if (context_length < 1) throw ConfigError("model.context_length must be >= 1");
        if (embedding_dim < 1) throw ConfigError("model.embedding_dim must be >= 1");
        if (vocab_size < 2) throw ConfigError("model.vocab_size must be >= 2");
    } else {
        if (input_dim < 1) throw ConfigError("model input dimension must be >= 1");
        if (num_classes < 2) throw ConfigError("model needs at least two classes");
    }
}

ModelSpec bind_to_dataset(ModelSpec spec, const Dataset& d) {
    if (spec.kind == ModelKind::char_lm) {
        if (d.kind != TaskKind::char_lm) {
            throw ConfigError("char_lm model needs a text dataset, got '" + d.name + "'");
        }
        spec.vocab_size = d.vocab_size();
        spec.context_length = d.context_length;
    } else {
        if (d.kind != TaskKind::classification) {
            throw ConfigError("mlp_classifier needs a classification dataset, got '" + d.name + "'");
        }
        spec.input_dim = d.input_dim();
        spec.num_classes = d.num_classes;
    }
    spec.validate();
    return spec;
}

Index Parameters::count() const {
    Index n = embedding.size();
    for (const auto& w : weights) n += w.size();
    for (const auto& b : biases) n += b.size();
    return n;
}

double Parameters::squared_norm() const {
    double s = embedding.squaredNorm();
    for (const auto& w : weights) s += w.squaredNorm();
    for (const auto& b : biases) s += b.squaredNorm();
    return s;
}

bool Parameters::finite() const {
    if (!all_finite(embedding)) return false;
    for (const auto& w : weights) {
        if (!all_finite(w)) return false;
    }
    for (const auto& b : biases) {
        if (!all_finite(b)) return false;
    }
    return true;
}

Parameters init_parameters(const ModelSpec& spec, std::uint64_t seed) {
    spec.validate();
    Rng rng(seed);
    Parameters p;
    std::vector<int> widths;
    widths.push_back(spec.network_input());
    widths.insert(widths.end(), spec.layer_widths.begin(), spec.layer_widths.end());
    widths.push_back(spec.network_output());
    if (spec.kind == ModelKind::char_lm) {
        const double bound = std::sqrt(3.0 / spec.embedding_dim);
        p.embedding.resize(spec.vocab_size, spec.embedding_dim);
        for (Index i = 0; i < p.embedding.size(); ++i) {
            p.embedding.data()[i] = rng.uniform(-bound, bound);
        }
    }
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        const int fan_in = widths[l];
        const int fan_out = widths[l + 1];
        const double bound = std::sqrt(6.0 / (fan_in + fan_out));
        DenseMatrix w(fan_out, fan_in);
        for (Index i = 0; i < w.size(); ++i) w.data()[i] = rng.uniform(-bound, bound);
        p.weights.push_back(std::move(w));
        p.biases.push_back(DenseVector::Zero(fan_out));
    }
    return p;
}

Parameters zeros_like(const Parameters& p) {
    Parameters z;
    z.embedding = DenseMatrix::Zero(p.embedding.rows(), p.embedding.cols());
    for (const auto& w : p.weights) z.weights.push_back(DenseMatrix::Zero(w.rows(), w.cols()));
    for (const auto& b : p.biases) z.biases.push_back(DenseVector::Zero(b.size()));
    return z;
}

namespace {

DenseMatrix network_input(const ModelSpec& spec, const Parameters& p, const Batch& batch) {
    if (spec.kind == ModelKind::mlp_classifier) {
        if (batch.features.cols() != spec.input_dim || batch.features.rows() != batch.size()) {
            throw DimensionError("batch features " + shape_string(batch.features) +
                                 " do not match model input " + std::to_string(spec.input_dim));
        }
        return batch.features;
    }
    const int c = spec.context_length;
    const int d = spec.embedding_dim;
    if (batch.contexts.cols() != c || batch.contexts.rows() != batch.size()) {
        throw DimensionError("batch contexts do not match context length " + std::to_string(c));
    }
    DenseMatrix x(batch.size(), c * d);
    for (Index i = 0; i < batch.size(); ++i) {
        for (int j = 0; j < c; ++j) {
            const int tok = batch.contexts(i, j);
            if (tok < 0 || tok >= spec.vocab_size) throw DimensionError("token id out of range");
            x.row(i).segment(static_cast<Index>(j) * d, d) = p.embedding.row(tok);
        }
    }
    return x;
}

void activate(DenseMatrix& z, Activation a) {
    if (a == Activation::relu) {
        z = z.cwiseMax(0.0);
    } else {
        z = z.array().tanh().matrix();
    }
}

struct Forward {
    DenseMatrix input;
    std::vector<DenseMatrix> pre;   // pre-activations of hidden layers
    std::vector<DenseMatrix> post;  // activations of hidden layers
    DenseMatrix logits;
};

Forward run_forward(const ModelSpec& spec, const Parameters& p, const Batch& batch) {
    Forward f;
    f.input = network_input(spec, p, batch);
    const DenseMatrix* h = &f.input;
    const std::size_t layers = p.weights.size();
    f.pre.reserve(layers);
    f.post.reserve(layers);
    for (std::size_t l = 0; l < layers; ++l) {
        DenseMatrix z = *h * p.weights[l].transpose();
        z.rowwise() += p.biases[l].transpose();
        if (l + 1 == layers) {
            f.logits = std::move(z);
        } else {
            f.pre.push_back(z);
            activate(z, spec.activation);
            f.post.push_back(std::move(z));
            h = &f.post.back();
        }
    }
    return f;
}

// Softmax probabilities (rows) and mean cross-entropy.
double softmax_xent(const DenseMatrix& logits, const std::vector<int>& targets, DenseMatrix* probs) {
    const Index n = logits.rows();
    double loss = 0;
    if (probs) probs->resize(logits.rows(), logits.cols());
    for (Index i = 0; i < n; ++i) {
        const double mx = logits.row(i).maxCoeff();
        const auto shifted = (logits.row(i).array() - mx).eval();
        const double z = shifted.exp().sum();
        const int t = targets[static_cast<std::size_t>(i)];
        if (t < 0 || t >= logits.cols()) throw DimensionError("target out of range");
        loss += std::log(z) - shifted(t);
        if (probs) probs->row(i) = (shifted.exp() / z).matrix();
    }
    return loss / static_cast<double>(n);
}

}  // namespace

LossAndGrads forward_backward(const ModelSpec& spec, const Parameters& p, const Batch& batch) {
    if (batch.size() == 0) throw DimensionError("empty batch");
    Forward f = run_forward(spec, p, batch);
    LossAndGrads out;
    DenseMatrix delta;
    out.loss = softmax_xent(f.logits, batch.targets, &delta);
    if (!std::isfinite(out.loss)) throw DivergedError("non-finite loss", -1);

    const auto n = static_cast<double>(batch.size());
    for (Index i = 0; i < batch.size(); ++i) delta(i, batch.targets[static_cast<std::size_t>(i)]) -= 1.0;
    delta /= n;

    const std::size_t layers = p.weights.size();
    out.grads.weights.resize(layers);
    out.grads.biases.resize(layers);
    for (std::size_t l = layers; l-- > 0;) {
        const DenseMatrix& h_in = l == 0 ? f.input : f.post[l - 1];
        out.grads.weights[l] = delta.transpose() * h_in;
        out.grads.biases[l] = delta.colwise().sum().transpose();
        DenseMatrix d_in = delta * p.weights[l];
        if (l > 0) {
            if (spec.activation == Activation::relu) {
                d_in = d_in.cwiseProduct((f.pre[l - 1].array() > 0.0).cast<double>().matrix());
            } else {
                d_in = d_in.cwiseProduct((1.0 - f.post[l - 1].array().square()).matrix());
            }
        } else if (spec.kind == ModelKind::char_lm) {
            const int d = spec.embedding_dim;
            out.grads.embedding = DenseMatrix::Zero(p.embedding.rows(), p.embedding.cols());
            for (Index i = 0; i < batch.size(); ++i) {
                for (int j = 0; j < spec.context_length; ++j) {
                    out.grads.embedding.row(batch.contexts(i, j)) +=
                        d_in.row(i).segment(static_cast<Index>(j) * d, d);
                }
            }
        }
        delta = std::move(d_in);
    }
    if (spec.kind != ModelKind::char_lm) out.grads.embedding.resize(0, 0);
    return out;
}

double evaluate_loss(const ModelSpec& spec, const Parameters& p, const Batch& batch) {
    if (batch.size() == 0) throw DimensionError("empty batch");
    const Forward f = run_forward(spec, p, batch);
    return softmax_xent(f.logits, batch.targets, nullptr);
}

}  // namespace polarbench
