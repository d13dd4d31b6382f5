#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "gifcat/threads.hpp"

namespace gifcat {

enum class ScoreKind { probability, fused };

// Per-thread, per-category scores. Columns follow the label-space order of
// `names`. probability kind keeps every entry in [0,1]; fused scores are
// unbounded above.
struct PredictionMatrix {
    std::vector<std::string> idx;
    std::vector<std::string> names;   // column labels
    std::vector<double> scores;       // row-major, idx.size() x names.size()
    ScoreKind kind = ScoreKind::probability;

    std::size_t rows() const { return idx.size(); }
    std::size_t cols() const { return names.size(); }
    double at(std::size_t r, std::size_t c) const { return scores[r * names.size() + c]; }
    double& at(std::size_t r, std::size_t c) { return scores[r * names.size() + c]; }

    // Checks the declared kind's range and the row/score shape.
    void validate() const;
    // Rows must cover exactly the threads of ts (same idx set, same order).
    void check_alignment(const ThreadSet& ts) const;
};

// Scores CSV: header "idx,<name1>,...,<nameC>", one row per thread, scores
// printed with enough digits to survive a round-trip.
void write_scores_csv(const std::string& path, const PredictionMatrix& m);
PredictionMatrix read_scores_csv(const std::string& path);

// Submission shape: JSON-lines of {"idx": ..., "categories": [...]}.
void write_submission(const std::string& path,
                      const std::vector<std::string>& idx_order,
                      const std::unordered_map<std::string, std::vector<std::string>>& predictions);
std::unordered_map<std::string, std::vector<std::string>> read_submission(const std::string& path);

} // namespace gifcat
