#include "polarbench/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>
#include <span>
#include <string_view>

namespace polarbench {

double Rng::normal() {
    // Box-Muller; u1 kept away from 0.
    const double u1 = (static_cast<double>(engine() >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::size_t Dataset::num_examples() const {
    if (kind == TaskKind::classification) return labels.size();
    const auto c = static_cast<std::size_t>(context_length);
    return tokens.size() > c ? tokens.size() - c : 0;
}

Dataset make_synthetic_gaussian(int examples, int dim, int classes, std::uint64_t data_seed) {
    Rng rng(data_seed);
    DenseMatrix means(classes, dim);
    for (Index i = 0; i < means.size(); ++i) means.data()[i] = 1.5 * rng.normal();
    Dataset d;
    d.kind = TaskKind::classification;
    d.name = "synthetic_gaussian";
    d.num_classes = classes;
    d.features.resize(examples, dim);
    d.labels.resize(static_cast<std::size_t>(examples));
    for (int i = 0; i < examples; ++i) {
        const int label = static_cast<int>(rng.index(static_cast<std::size_t>(classes)));
        d.labels[static_cast<std::size_t>(i)] = label;
        for (int j = 0; j < dim; ++j) d.features(i, j) = means(label, j) + rng.normal();
    }
    return d;
}

namespace {

using Words = std::span<const std::string_view>;

constexpr std::array<std::string_view, 24> kAnimals = {
    "fox", "dog", "cat", "horse", "bird", "rabbit", "wolf", "bear", "mouse", "owl", "goat", "deer",
    "child", "farmer", "sailor", "teacher", "baker", "king", "queen", "doctor", "girl", "boy",
    "miller", "hunter"};
constexpr std::array<std::string_view, 24> kThings = {
    "river", "stone", "house", "garden", "bridge", "forest", "road", "tower", "boat", "field",
    "window", "letter", "basket", "lamp", "mountain", "village", "market", "wall", "table",
    "door", "hill", "lake", "ship", "castle"};
constexpr std::array<std::string_view, 18> kActions = {
    "sees", "finds", "follows", "watches", "carries", "remembers", "visits", "guards", "paints",
    "builds", "crosses", "leaves", "reaches", "opens", "likes", "fears", "needs", "keeps"};
constexpr std::array<std::string_view, 12> kIntransitive = {
    "sleeps", "waits", "sings", "runs", "laughs", "rests", "dreams", "listens", "wanders",
    "stays", "falls", "returns"};
constexpr std::array<std::string_view, 22> kAdjectives = {
    "old", "small", "quick", "quiet", "brown", "green", "bright", "dark", "tall", "cold",
    "warm", "little", "great", "gentle", "broken", "hidden", "golden", "silver", "narrow",
    "wide", "lonely", "busy"};
constexpr std::array<std::string_view, 10> kPrepositions = {
    "near", "under", "behind", "beside", "across", "over", "inside", "beyond", "along", "past"};
constexpr std::array<std::string_view, 8> kTimes = {
    "in the morning", "at night", "every day", "after the rain", "before dawn",
    "in the winter", "at noon", "once again"};
constexpr std::array<std::string_view, 5> kConjunctions = {"and", "but", "while", "because",
                                                           "so"};

std::string_view pick(Rng& rng, Words words) { return words[rng.index(words.size())]; }

void noun_phrase(Rng& rng, std::string& out, Words nouns) {
    out += rng.uniform01() < 0.6 ? "the " : "a ";
    if (rng.uniform01() < 0.45) {
        out += pick(rng, kAdjectives);
        out += ' ';
    }
    out += pick(rng, nouns);
}

void clause(Rng& rng, std::string& out) {
    noun_phrase(rng, out, kAnimals);
    out += ' ';
    if (rng.uniform01() < 0.7) {
        out += pick(rng, kActions);
        out += ' ';
        noun_phrase(rng, out, rng.uniform01() < 0.6 ? Words(kThings) : Words(kAnimals));
    } else {
        out += pick(rng, kIntransitive);
    }
    if (rng.uniform01() < 0.4) {
        out += ' ';
        out += pick(rng, kPrepositions);
        out += ' ';
        noun_phrase(rng, out, kThings);
    }
    if (rng.uniform01() < 0.2) {
        out += ' ';
        out += pick(rng, kTimes);
    }
}

}  // namespace

std::string generate_tiny_text(std::size_t bytes, std::uint64_t data_seed) {
    Rng rng(data_seed);
    std::string text;
    text.reserve(bytes + 256);
    int sentences_in_paragraph = 0;
    while (text.size() < bytes) {
        std::string s;
        clause(rng, s);
        if (rng.uniform01() < 0.3) {
            s += rng.uniform01() < 0.5 ? ", " : " ";
            s += pick(rng, kConjunctions);
            s += ' ';
            clause(rng, s);
        }
        s[0] = static_cast<char>(s[0] - 'a' + 'A');
        s += rng.uniform01() < 0.9 ? '.' : '!';
        text += s;
        if (++sentences_in_paragraph >= 6 && rng.uniform01() < 0.3) {
            text += '\n';
            sentences_in_paragraph = 0;
        } else {
            text += ' ';
        }
    }
    text.resize(bytes);
    return text;
}

Dataset make_char_dataset(const std::string& name, const std::string& bytes, int context_length) {
    if (context_length < 1) throw ConfigError("context_length must be >= 1");
    if (bytes.empty()) throw ConfigError("dataset '" + name + "' is empty");
    if (bytes.size() <= static_cast<std::size_t>(context_length)) {
        throw ConfigError("dataset '" + name + "' is shorter than the context window");
    }
    std::array<bool, 256> seen{};
    for (unsigned char ch : bytes) seen[ch] = true;
    std::array<std::uint8_t, 256> id{};
    Dataset d;
    d.kind = TaskKind::char_lm;
    d.name = name;
    d.context_length = context_length;
    for (int b = 0; b < 256; ++b) {
        if (seen[static_cast<std::size_t>(b)]) {
            id[static_cast<std::size_t>(b)] = static_cast<std::uint8_t>(d.alphabet.size());
            d.alphabet.push_back(static_cast<std::uint8_t>(b));
        }
    }
    d.tokens.reserve(bytes.size());
    for (unsigned char ch : bytes) d.tokens.push_back(id[ch]);
    return d;
}

Dataset load_dataset(const std::string& path_or_builtin, int context_length) {
    if (path_or_builtin == "synthetic_gaussian") return make_synthetic_gaussian();
    if (path_or_builtin == "tiny_text") {
        return make_char_dataset("tiny_text", generate_tiny_text(), context_length);
    }
    std::ifstream f(path_or_builtin, std::ios::binary);
    if (!f) throw ConfigError("cannot read dataset '" + path_or_builtin + "'");
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return make_char_dataset(path_or_builtin, bytes, context_length);
}

Batch make_batch(const Dataset& d, const std::vector<std::size_t>& indices) {
    Batch b;
    const auto n = static_cast<Index>(indices.size());
    b.targets.resize(indices.size());
    if (d.kind == TaskKind::classification) {
        b.features.resize(n, d.features.cols());
        for (Index i = 0; i < n; ++i) {
            const auto src = indices[static_cast<std::size_t>(i)];
            b.features.row(i) = d.features.row(static_cast<Index>(src));
            b.targets[static_cast<std::size_t>(i)] = d.labels[src];
        }
    } else {
        const int c = d.context_length;
        b.contexts.resize(n, c);
        for (Index i = 0; i < n; ++i) {
            const auto pos = indices[static_cast<std::size_t>(i)];
            for (int j = 0; j < c; ++j) b.contexts(i, j) = d.tokens[pos + static_cast<std::size_t>(j)];
            b.targets[static_cast<std::size_t>(i)] = d.tokens[pos + static_cast<std::size_t>(c)];
        }
    }
    return b;
}

Split split_dataset(const Dataset& d) {
    const std::size_t n = d.num_examples();
    if (n < 2) throw ConfigError("dataset '" + d.name + "' has too few examples");
    Split s;
    const std::size_t held = std::max<std::size_t>(1, n / 10);
    s.train_begin = 0;
    s.train_end = n - held;
    s.eval_begin = s.train_end;
    s.eval_end = n;
    return s;
}

BatchSampler::BatchSampler(const Dataset& d, int batch_size, std::uint64_t seed)
    : data_(&d), batch_size_(batch_size), split_(split_dataset(d)), rng_(seed) {
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
}

Batch BatchSampler::next() {
    std::vector<std::size_t> idx(static_cast<std::size_t>(batch_size_));
    const std::size_t span = split_.train_end - split_.train_begin;
    for (auto& i : idx) i = split_.train_begin + rng_.index(span);
    return make_batch(*data_, idx);
}

Batch eval_batch(const Dataset& d, int max_examples) {
    const Split s = split_dataset(d);
    const std::size_t avail = s.eval_end - s.eval_begin;
    const std::size_t n = std::min<std::size_t>(avail, static_cast<std::size_t>(std::max(1, max_examples)));
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = s.eval_begin + (i * avail) / n;
    return make_batch(d, idx);
}

}  // namespace polarbench
