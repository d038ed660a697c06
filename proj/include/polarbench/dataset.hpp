#pragma once

// Training data for the desk-scale harness: a Gaussian-cluster
// classification task, a generated English-like text corpus, or any raw
// byte file (byte-tokenized for the character language model).

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "polarbench/matrix.hpp"

namespace polarbench {

/// Portable sampling helpers over mt19937_64 (the engine output sequence is
/// fixed by the standard, distributions are not).
struct Rng {
    explicit Rng(std::uint64_t seed) : engine(seed) {}
    std::uint64_t next() { return engine(); }
    double uniform01() { return static_cast<double>(engine() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
    std::size_t index(std::size_t n) { return static_cast<std::size_t>(engine() % n); }
    double normal();

    std::mt19937_64 engine;
};

enum class TaskKind { classification, char_lm };

struct Dataset {
    TaskKind kind = TaskKind::classification;
    std::string name;

    // classification
    DenseMatrix features;  // examples x input_dim
    std::vector<int> labels;
    int num_classes = 0;

    // char_lm
    std::vector<std::uint8_t> tokens;   // ids into `alphabet`
    std::vector<std::uint8_t> alphabet; // sorted distinct byte values
    int context_length = 0;

    int input_dim() const { return static_cast<int>(features.cols()); }
    int vocab_size() const { return static_cast<int>(alphabet.size()); }
    /// Examples (classification) or next-byte positions (n - context).
    std::size_t num_examples() const;
};

inline constexpr std::size_t kTinyTextBytes = 1'000'000;

/// Builtins: "synthetic_gaussian", "tiny_text". Anything else is read as a
/// raw byte file. Throws ConfigError on unreadable or empty input.
Dataset load_dataset(const std::string& path_or_builtin, int context_length = 16);

Dataset make_synthetic_gaussian(int examples = 4096, int dim = 16, int classes = 8,
                                std::uint64_t data_seed = 20240601);
/// Deterministic English-like corpus of exactly `bytes` bytes.
std::string generate_tiny_text(std::size_t bytes = kTinyTextBytes,
                               std::uint64_t data_seed = 1234567);
Dataset make_char_dataset(const std::string& name, const std::string& bytes, int context_length);

struct Batch {
    DenseMatrix features;  // classification
    Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> contexts;  // char_lm
    std::vector<int> targets;

    Index size() const { return static_cast<Index>(targets.size()); }
};

/// Assembles the examples at `indices` (in order).
Batch make_batch(const Dataset& d, const std::vector<std::size_t>& indices);

/// Train / held-out split: the last tenth of the examples is held out.
struct Split {
    std::size_t train_begin = 0, train_end = 0;
    std::size_t eval_begin = 0, eval_end = 0;
};
Split split_dataset(const Dataset& d);

/// Uniform draws with replacement from the training split.
class BatchSampler {
public:
    BatchSampler(const Dataset& d, int batch_size, std::uint64_t seed);
    Batch next();

private:
    const Dataset* data_;
    int batch_size_;
    Split split_;
    Rng rng_;
};

/// Fixed, evenly strided subset of the held-out split.
Batch eval_batch(const Dataset& d, int max_examples);

}  // namespace polarbench
