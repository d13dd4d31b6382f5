#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "gifcat/prediction.hpp"
#include "gifcat/threads.hpp"

namespace gifcat {

struct EnsembleConfig {
    double power = 1.8;
    std::vector<double> weights;  // one per family, all positive

    void validate() const;
};

// Elementwise mean of aligned probability matrices from same-family runs.
PredictionMatrix average_runs(const std::vector<PredictionMatrix>& runs);

// Per cell: sum_i weights[i] * P_i ^ power. Output kind is fused; scores lie
// in [0, sum of weights] and are never renormalized (only ranking matters).
PredictionMatrix power_weighted_sum(const std::vector<PredictionMatrix>& family_means,
                                    const EnsembleConfig& cfg);

// The k best categories per thread, score descending; ties fall back to the
// training-frequency prior, then to the lexicographically smaller name.
std::unordered_map<std::string, std::vector<std::string>> top_k(
    const PredictionMatrix& fused, std::size_t k, const LabelSpace& ls,
    const std::vector<std::size_t>& tie_prior);

struct GridSearchResult {
    EnsembleConfig config;
    double score = 0.0;  // MR@6 the config achieves on the validation set
};

// Exhaustive search over power x weight-tuple candidates; the first maximal
// grid point wins, so results are independent of evaluation order.
GridSearchResult grid_search(const std::vector<PredictionMatrix>& family_means,
                             const ThreadSet& val_gold, const LabelSpace& ls,
                             const std::vector<std::size_t>& tie_prior,
                             const std::vector<double>& power_grid,
                             const std::vector<std::vector<double>>& weight_grid,
                             std::size_t k = 6);

std::vector<double> default_power_grid();
// Weight tuples on a 0.2-step lattice scaled to max 3.0; for three families
// the (3.0, 1.8, 0.8) point is included as well.
std::vector<std::vector<double>> default_weight_grid(std::size_t n_families);

struct ManifestFamily {
    std::string name;
    double weight = 1.0;
    std::vector<std::string> run_paths;  // score CSVs of this family's runs
};

// JSON manifest: {"families":[{"name":..,"weight":..,"runs":[..]},..]}.
// Relative run paths resolve against the manifest's directory.
struct RunManifest {
    std::vector<ManifestFamily> families;

    static RunManifest load(const std::string& path);
};

} // namespace gifcat
