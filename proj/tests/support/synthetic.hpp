#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gifcat/threads.hpp"

namespace testsup {

// Synthetic two-turn threads from a seeded sparse generative model: each
// category owns a small keyword pool, threads mix keywords of their true
// categories with shared noise words, and a small label-noise rate keeps the
// task from being perfectly learnable.
struct SyntheticSpec {
    std::size_t n_categories = 43;
    std::size_t n_train = 2000;
    std::size_t n_val = 500;
    double label_noise = 0.08;
    std::uint64_t seed = 42;
};

struct SyntheticData {
    gifcat::ThreadSet train;
    gifcat::ThreadSet val;
};

SyntheticData make_synthetic(const SyntheticSpec& spec);

// Noise-free variant whose labels are exactly recoverable from the text;
// training loss should fall monotonically on it.
gifcat::ThreadSet make_separable(std::size_t n_threads, std::size_t n_categories,
                                 std::uint64_t seed);

// The 43 reaction-category names used by the synthetic sets.
const std::vector<std::string>& category_names_43();

} // namespace testsup
