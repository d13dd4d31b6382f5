#include "gifcat/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <unordered_map>

#include "gifcat/error.hpp"
#include "gifcat/rng.hpp"

namespace gifcat {

std::string_view family_name(ModelFamily f) {
    switch (f) {
        case ModelFamily::A: return "A";
        case ModelFamily::B: return "B";
        case ModelFamily::C: return "C";
    }
    return "A";
}

ModelFamily family_from_name(std::string_view name) {
    if (name == "A") return ModelFamily::A;
    if (name == "B") return ModelFamily::B;
    if (name == "C") return ModelFamily::C;
    throw ValidationError("unknown model family: " + std::string(name));
}

FeatureConfig FeatureConfig::for_family(ModelFamily f, std::size_t dimension) {
    FeatureConfig cfg;
    cfg.family = f;
    cfg.dimension = dimension;
    switch (f) {
        case ModelFamily::A:
            cfg.ngram_orders = {1, 2};
            cfg.hash_seed = 0x9E3779B97F4A7C15ULL;
            break;
        case ModelFamily::B:
            cfg.ngram_orders = {1};
            cfg.hash_seed = 0xC2B2AE3D27D4EB4FULL;
            break;
        case ModelFamily::C:
            cfg.ngram_orders = {2};
            cfg.hash_seed = 0x165667B19E3779F9ULL;
            break;
    }
    cfg.validate();
    return cfg;
}

void FeatureConfig::validate() const {
    if (dimension < 2 || (dimension & (dimension - 1)) != 0) {
        throw ValidationError("feature dimension must be a power of two >= 2");
    }
    if (ngram_orders.empty()) throw ValidationError("ngram_orders must not be empty");
    for (int o : ngram_orders) {
        if (o != 1 && o != 2) throw ValidationError("ngram order must be 1 or 2");
    }
    if (max_tokens_per_side == 0) throw ValidationError("max_tokens_per_side must be positive");
    if (pair_layout.text_namespace == pair_layout.reply_namespace) {
        throw ValidationError("text and reply namespaces must differ");
    }
}

namespace {

inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline std::uint64_t hash_ngram(std::uint64_t seed, std::uint32_t ns, int order,
                                const int* ids) {
    std::uint64_t h = mix64(seed ^ (std::uint64_t{ns} << 32) ^ static_cast<std::uint64_t>(order));
    for (int k = 0; k < order; ++k) {
        h = mix64(h ^ static_cast<std::uint64_t>(static_cast<std::uint32_t>(ids[k])));
    }
    return h;
}

void hash_side(const std::vector<int>& ids, std::uint32_t ns, const FeatureConfig& cfg,
               std::unordered_map<std::uint32_t, double>& counts) {
    const std::uint64_t mask = cfg.dimension - 1;
    for (int order : cfg.ngram_orders) {
        if (ids.size() < static_cast<std::size_t>(order)) continue;
        for (std::size_t i = 0; i + order <= ids.size(); ++i) {
            const std::uint64_t h = hash_ngram(cfg.hash_seed, ns, order, ids.data() + i);
            counts[static_cast<std::uint32_t>(h & mask)] += 1.0;
        }
    }
}

} // namespace

SparseFeatures featurize(const Thread& thread, const SubwordVocab& vocab,
                         const FeatureConfig& cfg) {
    cfg.validate();
    std::vector<int> text_ids = encode(thread.text, vocab);
    std::vector<int> reply_ids = encode(thread.reply, vocab);
    if (text_ids.size() > cfg.max_tokens_per_side) text_ids.resize(cfg.max_tokens_per_side);
    if (reply_ids.size() > cfg.max_tokens_per_side) reply_ids.resize(cfg.max_tokens_per_side);

    std::unordered_map<std::uint32_t, double> counts;
    hash_side(text_ids, cfg.pair_layout.text_namespace, cfg, counts);
    hash_side(reply_ids, cfg.pair_layout.reply_namespace, cfg, counts);

    SparseFeatures out(counts.begin(), counts.end());
    std::sort(out.begin(), out.end());
    return out;
}

void LossConfig::validate(std::size_t n_classes) const {
    if (weights.empty()) return;
    if (weights.size() != n_classes) {
        throw ValidationError("loss weight count does not match class count");
    }
    for (double w : weights) {
        if (!(w > 0.0)) throw ValidationError("loss weights must be positive");
    }
}

namespace {

inline double stable_bce_term(double z, double y) {
    return std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
}

inline double sigmoid(double z) {
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

} // namespace

double bce_with_logits(std::span<const double> logits, std::span<const double> targets,
                       const LossConfig& lc) {
    if (logits.size() != targets.size() || logits.empty()) {
        throw ValidationError("logits/targets size mismatch");
    }
    lc.validate(logits.size());
    double sum = 0.0;
    for (std::size_t c = 0; c < logits.size(); ++c) {
        if (!std::isfinite(logits[c]) || !std::isfinite(targets[c])) {
            throw ValidationError("non-finite input to bce_with_logits");
        }
        const double w = lc.weights.empty() ? 1.0 : lc.weights[c];
        sum += w * stable_bce_term(logits[c], targets[c]);
    }
    return sum / static_cast<double>(logits.size());
}

std::vector<double> bce_gradient(std::span<const double> logits,
                                 std::span<const double> targets, const LossConfig& lc) {
    if (logits.size() != targets.size() || logits.empty()) {
        throw ValidationError("logits/targets size mismatch");
    }
    lc.validate(logits.size());
    std::vector<double> grad(logits.size());
    const double inv_c = 1.0 / static_cast<double>(logits.size());
    for (std::size_t c = 0; c < logits.size(); ++c) {
        const double w = lc.weights.empty() ? 1.0 : lc.weights[c];
        grad[c] = w * (sigmoid(logits[c]) - targets[c]) * inv_c;
    }
    return grad;
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw ValidationError("learning rate must be positive");
    if (!(adam_beta1 > 0.0 && adam_beta1 < 1.0) || !(adam_beta2 > 0.0 && adam_beta2 < 1.0)) {
        throw ValidationError("Adam betas must lie in (0,1)");
    }
    if (!(adam_epsilon > 0.0)) throw ValidationError("Adam epsilon must be positive");
    if (batch_size == 0) throw ValidationError("batch size must be positive");
    if (epochs == 0) throw ValidationError("epochs must be positive");
    if (warmup_ratio < 0.0 || warmup_ratio >= 1.0) {
        throw ValidationError("warmup ratio must lie in [0,1)");
    }
    if (init_std < 0.0) throw ValidationError("init std must be non-negative");
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               const TrainConfig& tc, std::size_t total_steps) {
    if (params.size() != grads.size() || params.size() != state.m.size() ||
        params.size() != state.v.size()) {
        throw ValidationError("adam_step shape mismatch");
    }
    ++state.t;
    const double t = static_cast<double>(state.t);
    const std::size_t warmup_steps =
        static_cast<std::size_t>(tc.warmup_ratio * static_cast<double>(total_steps));
    const double warmup_scale =
        (warmup_steps > 0 && state.t < warmup_steps)
            ? t / static_cast<double>(warmup_steps)
            : 1.0;
    const double lr = tc.learning_rate * warmup_scale;
    const double bc1 = 1.0 - std::pow(tc.adam_beta1, t);
    const double bc2 = 1.0 - std::pow(tc.adam_beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        state.m[i] = tc.adam_beta1 * state.m[i] + (1.0 - tc.adam_beta1) * g;
        state.v[i] = tc.adam_beta2 * state.v[i] + (1.0 - tc.adam_beta2) * g * g;
        const double m_hat = state.m[i] / bc1;
        const double v_hat = state.v[i] / bc2;
        params[i] -= lr * m_hat / (std::sqrt(v_hat) + tc.adam_epsilon);
    }
}

ModelParams::ModelParams(FeatureConfig config, std::size_t n_classes,
                         std::uint64_t label_fingerprint)
    : config_(std::move(config)),
      n_classes_(n_classes),
      label_fingerprint_(label_fingerprint),
      data_(n_classes * config_.dimension + n_classes, 0.0) {
    config_.validate();
    if (n_classes_ == 0) throw ValidationError("model needs at least one class");
}

std::vector<double> ModelParams::logits(const SparseFeatures& x) const {
    std::vector<double> z(n_classes_);
    for (std::size_t c = 0; c < n_classes_; ++c) {
        const double* row = data_.data() + c * config_.dimension;
        double acc = bias(c);
        for (const auto& [j, v] : x) acc += row[j] * v;
        z[c] = acc;
    }
    return z;
}

void ModelParams::check_finite() const {
    for (double v : data_) {
        if (!std::isfinite(v)) throw ValidationError("model parameters are not finite");
    }
}

namespace {

constexpr char kModelMagic[8] = {'G', 'C', 'M', 'O', 'D', 'L', '0', '1'};

template <typename T>
void put(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& in, const std::string& path) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw ParseError("truncated model file: " + path);
    return v;
}

} // namespace

void ModelParams::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot write model file: " + path);
    out.write(kModelMagic, sizeof(kModelMagic));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(config_.family));
    put<std::uint64_t>(out, config_.dimension);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(config_.ngram_orders.size()));
    for (int o : config_.ngram_orders) put<std::int32_t>(out, o);
    put<std::uint64_t>(out, config_.hash_seed);
    put<std::uint32_t>(out, config_.pair_layout.text_namespace);
    put<std::uint32_t>(out, config_.pair_layout.reply_namespace);
    put<std::uint64_t>(out, config_.max_tokens_per_side);
    put<std::uint64_t>(out, label_fingerprint_);
    put<std::uint64_t>(out, n_classes_);
    out.write(reinterpret_cast<const char*>(data_.data()),
              static_cast<std::streamsize>(data_.size() * sizeof(double)));
    if (!out) throw ParseError("failed writing model file: " + path);
}

ModelParams ModelParams::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open model file: " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kModelMagic, sizeof(magic)) != 0) {
        throw ParseError("not a model file (bad magic): " + path);
    }
    FeatureConfig cfg;
    cfg.family = static_cast<ModelFamily>(get<std::uint32_t>(in, path));
    cfg.dimension = get<std::uint64_t>(in, path);
    const auto n_orders = get<std::uint32_t>(in, path);
    cfg.ngram_orders.clear();
    for (std::uint32_t i = 0; i < n_orders; ++i) {
        cfg.ngram_orders.push_back(get<std::int32_t>(in, path));
    }
    cfg.hash_seed = get<std::uint64_t>(in, path);
    cfg.pair_layout.text_namespace = get<std::uint32_t>(in, path);
    cfg.pair_layout.reply_namespace = get<std::uint32_t>(in, path);
    cfg.max_tokens_per_side = get<std::uint64_t>(in, path);
    const auto fingerprint = get<std::uint64_t>(in, path);
    const auto n_classes = get<std::uint64_t>(in, path);

    ModelParams params(cfg, n_classes, fingerprint);
    in.read(reinterpret_cast<char*>(params.data_.data()),
            static_cast<std::streamsize>(params.data_.size() * sizeof(double)));
    if (!in) throw ParseError("truncated model file: " + path);
    params.check_finite();
    return params;
}

TrainResult train(const ThreadSet& train_set, const LabelSpace& ls, const SubwordVocab& vocab,
                  const FeatureConfig& fc, const TrainConfig& tc) {
    fc.validate();
    tc.validate();
    if (train_set.threads.empty()) throw ValidationError("cannot train on an empty thread set");
    if (!train_set.labeled) throw ValidationError("training set is not labeled");

    const std::size_t n = train_set.threads.size();
    const std::size_t c_count = ls.size();

    std::vector<SparseFeatures> features;
    features.reserve(n);
    std::vector<std::vector<double>> targets;
    targets.reserve(n);
    for (const Thread& t : train_set.threads) {
        features.push_back(featurize(t, vocab, fc));
        std::vector<double> y(c_count, 0.0);
        for (const auto& cat : *t.categories) y[ls.index_of(cat)] = 1.0;
        targets.push_back(std::move(y));
    }

    ModelParams params(fc, c_count, ls.fingerprint());
    Rng init_rng(tc.seed);
    for (std::size_t c = 0; c < c_count; ++c) {
        for (std::size_t j = 0; j < fc.dimension; ++j) {
            params.weight(c, j) = tc.init_std * init_rng.next_gaussian();
        }
    }

    AdamState state(params.flat().size());
    std::vector<double> grad(params.flat().size(), 0.0);
    const std::size_t batches_per_epoch = (n + tc.batch_size - 1) / tc.batch_size;
    const std::size_t total_steps = tc.epochs * batches_per_epoch;

    TrainResult result;
    result.epoch_loss.reserve(tc.epochs);

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;

    const LossConfig lc;
    for (std::size_t epoch = 0; epoch < tc.epochs; ++epoch) {
        Rng shuffle_rng(tc.seed + 1000003ULL * (epoch + 1));
        shuffle_rng.shuffle(order);

        double epoch_loss_sum = 0.0;
        for (std::size_t start = 0; start < n; start += tc.batch_size) {
            const std::size_t end = std::min(n, start + tc.batch_size);
            const double inv_batch = 1.0 / static_cast<double>(end - start);
            std::fill(grad.begin(), grad.end(), 0.0);
            for (std::size_t k = start; k < end; ++k) {
                const std::size_t i = order[k];
                const std::vector<double> z = params.logits(features[i]);
                epoch_loss_sum += bce_with_logits(z, targets[i], lc);
                const std::vector<double> dz = bce_gradient(z, targets[i], lc);
                for (std::size_t c = 0; c < c_count; ++c) {
                    const double g = dz[c] * inv_batch;
                    if (g == 0.0) continue;
                    double* grow = grad.data() + c * fc.dimension;
                    for (const auto& [j, v] : features[i]) grow[j] += g * v;
                    grad[c_count * fc.dimension + c] += g;
                }
            }
            adam_step(params.flat(), grad, state, tc, total_steps);
        }
        result.epoch_loss.push_back(epoch_loss_sum / static_cast<double>(n));
    }

    params.check_finite();
    result.params = std::move(params);
    return result;
}

PredictionMatrix predict_scores(const ModelParams& model, const ThreadSet& ts,
                                const SubwordVocab& vocab, const LabelSpace& ls) {
    if (ls.fingerprint() != model.label_fingerprint()) {
        throw ValidationError("label space fingerprint does not match the model");
    }
    if (ls.size() != model.n_classes()) {
        throw ValidationError("label space size does not match the model");
    }
    PredictionMatrix m;
    m.kind = ScoreKind::probability;
    m.names = ls.names();
    m.idx.reserve(ts.threads.size());
    m.scores.reserve(ts.threads.size() * ls.size());
    for (const Thread& t : ts.threads) {
        m.idx.push_back(t.idx);
        const std::vector<double> z = model.logits(featurize(t, vocab, model.config()));
        for (double zc : z) m.scores.push_back(sigmoid(zc));
    }
    m.validate();
    return m;
}

} // namespace gifcat
