#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "gifcat/threads.hpp"

namespace gifcat {

struct EvalResult {
    std::vector<double> per_thread;  // recall per thread, gold order
    double mean = 0.0;
    std::size_t n_threads = 0;
};

// |predicted ∩ answer| / |answer|. predicted must hold exactly k distinct
// names; answer must hold 1..k names.
double recall_at_k(const std::vector<std::string>& predicted,
                   const std::vector<std::string>& answer, std::size_t k);

// Mean of per-thread recall_at_k with k = 6. predictions maps idx to the
// 6 predicted names; its idx set must match gold's exactly.
EvalResult mean_recall_at_6(
    const std::unordered_map<std::string, std::vector<std::string>>& predictions,
    const ThreadSet& gold);

inline constexpr std::size_t kRecallK = 6;

} // namespace gifcat
