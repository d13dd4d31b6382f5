#include "gifcat/metrics.hpp"

#include <algorithm>
#include <set>

#include "gifcat/error.hpp"

namespace gifcat {

double recall_at_k(const std::vector<std::string>& predicted,
                   const std::vector<std::string>& answer, std::size_t k) {
    if (predicted.size() != k) {
        throw ValidationError("expected exactly " + std::to_string(k) + " predictions, got " +
                              std::to_string(predicted.size()));
    }
    std::set<std::string> pred_set(predicted.begin(), predicted.end());
    if (pred_set.size() != predicted.size()) {
        throw ValidationError("duplicate category among predictions");
    }
    if (answer.empty()) throw ValidationError("answer set is empty");
    if (answer.size() > k) {
        throw ValidationError("answer set has " + std::to_string(answer.size()) +
                              " categories, more than k=" + std::to_string(k));
    }
    std::size_t hits = 0;
    for (const std::string& a : answer) {
        if (pred_set.count(a)) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(answer.size());
}

EvalResult mean_recall_at_6(
    const std::unordered_map<std::string, std::vector<std::string>>& predictions,
    const ThreadSet& gold) {
    if (!gold.labeled) throw ValidationError("gold thread set is not labeled");

    std::vector<std::string> missing;
    for (const Thread& t : gold.threads) {
        if (!predictions.count(t.idx)) missing.push_back(t.idx);
    }
    std::vector<std::string> extra;
    if (predictions.size() != gold.threads.size() || !missing.empty()) {
        std::set<std::string> gold_idx;
        for (const Thread& t : gold.threads) gold_idx.insert(t.idx);
        for (const auto& [idx, _] : predictions) {
            if (!gold_idx.count(idx)) extra.push_back(idx);
        }
    }
    if (!missing.empty() || !extra.empty()) {
        std::string msg = "prediction/gold idx mismatch;";
        std::sort(missing.begin(), missing.end());
        std::sort(extra.begin(), extra.end());
        if (!missing.empty()) {
            msg += " missing:";
            for (const auto& m : missing) msg += " " + m;
        }
        if (!extra.empty()) {
            msg += " extra:";
            for (const auto& e : extra) msg += " " + e;
        }
        throw ValidationError(msg);
    }

    EvalResult result;
    result.n_threads = gold.threads.size();
    result.per_thread.reserve(result.n_threads);
    // Neumaier-compensated sum so the mean is exact to the last ulp
    // regardless of thread order.
    double sum = 0.0, comp = 0.0;
    for (const Thread& t : gold.threads) {
        const double r = recall_at_k(predictions.at(t.idx), *t.categories, kRecallK);
        result.per_thread.push_back(r);
        const double s = sum + r;
        if (std::abs(sum) >= std::abs(r)) {
            comp += (sum - s) + r;
        } else {
            comp += (r - s) + sum;
        }
        sum = s;
    }
    result.mean = result.n_threads == 0 ? 0.0
                                        : (sum + comp) / static_cast<double>(result.n_threads);
    return result;
}

} // namespace gifcat
