#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gifcat/bpe.hpp"
#include "gifcat/prediction.hpp"
#include "gifcat/threads.hpp"

namespace gifcat {

// Three feature configurations play the role of three model types in the
// ensemble; they differ in n-gram orders and hash seed so their mistakes
// decorrelate.
enum class ModelFamily { A, B, C };

std::string_view family_name(ModelFamily f);
ModelFamily family_from_name(std::string_view name);

// Hashing namespaces that keep text-side and reply-side features apart, the
// sentence-pair analogue of marker tokens between the two segments.
struct PairLayout {
    std::uint32_t text_namespace = 0;
    std::uint32_t reply_namespace = 1;

    bool operator==(const PairLayout&) const = default;
};

struct FeatureConfig {
    ModelFamily family = ModelFamily::A;
    std::size_t dimension = std::size_t{1} << 18;  // power of two
    std::vector<int> ngram_orders = {1, 2};        // subset of {1, 2}
    std::uint64_t hash_seed = 0;
    PairLayout pair_layout;
    std::size_t max_tokens_per_side = 113;  // subword ids kept per side

    static FeatureConfig for_family(ModelFamily f, std::size_t dimension = std::size_t{1} << 18);
    void validate() const;

    bool operator==(const FeatureConfig&) const = default;
};

// index -> count, sorted by index.
using SparseFeatures = std::vector<std::pair<std::uint32_t, double>>;

// Hashed bag of subword n-grams; text and reply land in distinct
// namespaces, so swapping the two sides changes the vector.
SparseFeatures featurize(const Thread& thread, const SubwordVocab& vocab,
                         const FeatureConfig& cfg);

struct LossConfig {
    // Per-class weights; empty means 1.0 everywhere. Reduction is the mean
    // over classes (the train loop means over the batch as well).
    std::vector<double> weights;

    void validate(std::size_t n_classes) const;
};

// Numerically stable binary cross entropy straight from logits:
// max(z,0) - z*y + log1p(exp(-|z|)) per class, weighted, mean-reduced.
// Finite for |z| up to 1e4 and beyond.
double bce_with_logits(std::span<const double> logits, std::span<const double> targets,
                       const LossConfig& lc = {});

// d(loss)/d(logit): w_c * (sigmoid(z_c) - y_c) / C under mean reduction.
std::vector<double> bce_gradient(std::span<const double> logits,
                                 std::span<const double> targets, const LossConfig& lc = {});

struct TrainConfig {
    // The transformer-scale 4e-5 barely moves a linear model in 4 epochs;
    // the default suits the hashed-feature classifier and 4e-5 remains a
    // legal setting.
    double learning_rate = 1e-2;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    std::size_t batch_size = 16;
    std::size_t epochs = 4;
    double warmup_ratio = 0.06;
    double init_std = 0.02;
    std::uint64_t seed = 0;

    void validate() const;
};

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::size_t t = 0;

    explicit AdamState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

// One standard bias-corrected Adam update over a flat parameter vector. The
// learning rate warms up linearly over warmup_ratio * total_steps steps,
// then stays constant.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               const TrainConfig& tc, std::size_t total_steps);

// Dense C x D weight matrix plus bias, stored as one flat buffer so the
// optimizer sees a single parameter vector.
class ModelParams {
public:
    ModelParams() = default;
    ModelParams(FeatureConfig config, std::size_t n_classes, std::uint64_t label_fingerprint);

    const FeatureConfig& config() const { return config_; }
    std::size_t n_classes() const { return n_classes_; }
    std::uint64_t label_fingerprint() const { return label_fingerprint_; }

    double weight(std::size_t c, std::size_t j) const { return data_[c * config_.dimension + j]; }
    double& weight(std::size_t c, std::size_t j) { return data_[c * config_.dimension + j]; }
    double bias(std::size_t c) const { return data_[n_classes_ * config_.dimension + c]; }
    double& bias(std::size_t c) { return data_[n_classes_ * config_.dimension + c]; }

    std::span<double> flat() { return data_; }
    std::span<const double> flat() const { return data_; }

    std::vector<double> logits(const SparseFeatures& x) const;

    void check_finite() const;

    // Versioned little-endian binary container: config, label-space
    // fingerprint, W row-major as 64-bit floats, then b.
    void save(const std::string& path) const;
    static ModelParams load(const std::string& path);

private:
    FeatureConfig config_;
    std::size_t n_classes_ = 0;
    std::uint64_t label_fingerprint_ = 0;
    std::vector<double> data_;  // C*D weights then C biases
};

struct TrainResult {
    ModelParams params;
    std::vector<double> epoch_loss;  // mean per-sample loss, one per epoch
};

// Mini-batch Adam over shuffled epochs. Bit-reproducible for a fixed
// (seed, config, data); the seed drives both the init and the shuffles.
TrainResult train(const ThreadSet& train_set, const LabelSpace& ls, const SubwordVocab& vocab,
                  const FeatureConfig& fc, const TrainConfig& tc);

// sigmoid(W x + b) per thread; rows follow ts order. The label space must
// carry the fingerprint the model was trained against.
PredictionMatrix predict_scores(const ModelParams& model, const ThreadSet& ts,
                                const SubwordVocab& vocab, const LabelSpace& ls);

} // namespace gifcat
