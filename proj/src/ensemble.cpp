#include "gifcat/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "gifcat/error.hpp"
#include "gifcat/metrics.hpp"

namespace gifcat {

void EnsembleConfig::validate() const {
    if (!(power > 0.0)) throw ValidationError("ensemble power must be positive");
    if (weights.empty()) throw ValidationError("ensemble needs at least one weight");
    for (double w : weights) {
        if (!(w > 0.0)) throw ValidationError("ensemble weights must be positive");
    }
}

namespace {

void check_aligned(const PredictionMatrix& a, const PredictionMatrix& b) {
    if (a.idx != b.idx) throw ValidationError("prediction matrices disagree on idx order");
    if (a.names != b.names) throw ValidationError("prediction matrices disagree on categories");
}

void check_probability(const PredictionMatrix& m) {
    if (m.kind != ScoreKind::probability) {
        throw ValidationError("expected probability scores, got fused scores");
    }
}

} // namespace

PredictionMatrix average_runs(const std::vector<PredictionMatrix>& runs) {
    if (runs.empty()) throw ValidationError("cannot average zero runs");
    for (const PredictionMatrix& r : runs) {
        r.validate();
        check_probability(r);
        check_aligned(runs.front(), r);
    }
    PredictionMatrix mean = runs.front();
    const double inv = 1.0 / static_cast<double>(runs.size());
    for (std::size_t i = 0; i < mean.scores.size(); ++i) {
        double sum = 0.0;
        for (const PredictionMatrix& r : runs) sum += r.scores[i];
        mean.scores[i] = sum * inv;
    }
    return mean;
}

PredictionMatrix power_weighted_sum(const std::vector<PredictionMatrix>& family_means,
                                    const EnsembleConfig& cfg) {
    cfg.validate();
    if (family_means.empty()) throw ValidationError("power weighted sum needs at least one family");
    if (family_means.size() != cfg.weights.size()) {
        throw ValidationError("got " + std::to_string(family_means.size()) + " families for " +
                              std::to_string(cfg.weights.size()) + " weights");
    }
    for (const PredictionMatrix& m : family_means) {
        m.validate();
        check_probability(m);
        check_aligned(family_means.front(), m);
    }
    PredictionMatrix fused = family_means.front();
    fused.kind = ScoreKind::fused;
    for (std::size_t i = 0; i < fused.scores.size(); ++i) {
        double acc = 0.0;
        for (std::size_t f = 0; f < family_means.size(); ++f) {
            acc += cfg.weights[f] * std::pow(family_means[f].scores[i], cfg.power);
        }
        fused.scores[i] = acc;
    }
    return fused;
}

std::unordered_map<std::string, std::vector<std::string>> top_k(
    const PredictionMatrix& fused, std::size_t k, const LabelSpace& ls,
    const std::vector<std::size_t>& tie_prior) {
    if (fused.cols() != ls.size()) {
        throw ValidationError("prediction matrix has " + std::to_string(fused.cols()) +
                              " columns for a label space of " + std::to_string(ls.size()));
    }
    if (!fused.names.empty() && fused.names != ls.names()) {
        throw ValidationError("prediction matrix categories do not match the label space");
    }
    if (k > ls.size()) {
        throw ValidationError("cannot pick top " + std::to_string(k) + " of " +
                              std::to_string(ls.size()) + " categories");
    }
    if (tie_prior.size() != ls.size()) {
        throw ValidationError("tie prior size does not match the label space");
    }

    std::unordered_map<std::string, std::vector<std::string>> out;
    out.reserve(fused.rows());
    std::vector<std::size_t> cols(ls.size());
    for (std::size_t r = 0; r < fused.rows(); ++r) {
        std::iota(cols.begin(), cols.end(), std::size_t{0});
        const double* row = fused.scores.data() + r * ls.size();
        std::partial_sort(cols.begin(), cols.begin() + static_cast<std::ptrdiff_t>(k), cols.end(),
                          [&](std::size_t a, std::size_t b) {
                              if (row[a] != row[b]) return row[a] > row[b];
                              if (tie_prior[a] != tie_prior[b]) return tie_prior[a] > tie_prior[b];
                              return ls.name(a) < ls.name(b);
                          });
        std::vector<std::string> names;
        names.reserve(k);
        for (std::size_t i = 0; i < k; ++i) names.push_back(ls.name(cols[i]));
        out.emplace(fused.idx[r], std::move(names));
    }
    return out;
}

GridSearchResult grid_search(const std::vector<PredictionMatrix>& family_means,
                             const ThreadSet& val_gold, const LabelSpace& ls,
                             const std::vector<std::size_t>& tie_prior,
                             const std::vector<double>& power_grid,
                             const std::vector<std::vector<double>>& weight_grid,
                             std::size_t k) {
    if (power_grid.empty() || weight_grid.empty()) {
        throw ValidationError("grid search needs a non-empty grid");
    }
    if (!val_gold.labeled) throw ValidationError("grid search needs a labeled validation set");

    GridSearchResult best;
    bool have_best = false;
    for (double power : power_grid) {
        for (const std::vector<double>& weights : weight_grid) {
            EnsembleConfig cfg{power, weights};
            const PredictionMatrix fused = power_weighted_sum(family_means, cfg);
            const auto preds = top_k(fused, k, ls, tie_prior);
            const double score = mean_recall_at_6(preds, val_gold).mean;
            if (!have_best || score > best.score) {
                best = {std::move(cfg), score};
                have_best = true;
            }
        }
    }
    return best;
}

std::vector<double> default_power_grid() { return {0.5, 1.0, 1.4, 1.8, 2.2, 3.0}; }

std::vector<std::vector<double>> default_weight_grid(std::size_t n_families) {
    if (n_families == 0) throw ValidationError("weight grid needs at least one family");
    const std::vector<double> steps = {0.2, 0.4, 0.6, 0.8, 1.0};
    std::vector<std::vector<double>> grid;
    std::vector<double> current(n_families, 0.0);
    // Every lattice tuple whose largest entry is 1.0, scaled to max 3.0.
    auto emit = [&](auto&& self, std::size_t pos) -> void {
        if (pos == n_families) {
            if (*std::max_element(current.begin(), current.end()) == 1.0) {
                std::vector<double> scaled = current;
                for (double& w : scaled) w *= 3.0;
                grid.push_back(std::move(scaled));
            }
            return;
        }
        for (double s : steps) {
            current[pos] = s;
            self(self, pos + 1);
        }
    };
    emit(emit, 0);
    if (n_families == 3) grid.push_back({3.0, 1.8, 0.8});
    return grid;
}

RunManifest RunManifest::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open manifest: " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path + ": malformed JSON: " + e.what());
    }
    if (!doc.is_object() || !doc.contains("families") || !doc["families"].is_array()) {
        throw ParseError(path + ": expected {\"families\": [...]}");
    }
    const std::filesystem::path base = std::filesystem::path(path).parent_path();
    RunManifest manifest;
    for (const auto& fam : doc["families"]) {
        ManifestFamily f;
        if (!fam.contains("name") || !fam.contains("runs")) {
            throw ValidationError(path + ": each family needs 'name' and 'runs'");
        }
        f.name = fam["name"].get<std::string>();
        if (fam.contains("weight")) f.weight = fam["weight"].get<double>();
        for (const auto& run : fam["runs"]) {
            std::filesystem::path p = run.get<std::string>();
            if (p.is_relative()) p = base / p;
            f.run_paths.push_back(p.string());
        }
        if (f.run_paths.empty()) {
            throw ValidationError(path + ": family '" + f.name + "' lists no runs");
        }
        manifest.families.push_back(std::move(f));
    }
    if (manifest.families.empty()) throw ValidationError(path + ": manifest lists no families");
    return manifest;
}

} // namespace gifcat
