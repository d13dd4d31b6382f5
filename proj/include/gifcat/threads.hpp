#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace gifcat {

enum class Split { train, dev, test };

std::string_view split_name(Split s);
Split split_from_name(std::string_view name);

// One two-turn thread: an original tweet plus one reply. text and reply may
// both be empty (replies to media-only tweets occur). mp4 is carried through
// verbatim and never consumed.
struct Thread {
    std::string idx;
    std::string text;
    std::string reply;
    std::optional<std::vector<std::string>> categories;
    std::optional<std::string> mp4;

    bool operator==(const Thread&) const = default;
};

// The ordered category universe. Construction validates that names are
// unique; index lookups are O(1) amortized via an internal map.
class LabelSpace {
public:
    LabelSpace() = default;
    static LabelSpace from_names(std::vector<std::string> names);

    // Sidecar format: one category name per line, order significant.
    static LabelSpace load(const std::string& path);
    void save(const std::string& path) const;

    const std::vector<std::string>& names() const { return names_; }
    std::size_t size() const { return names_.size(); }
    const std::string& name(std::size_t i) const { return names_[i]; }
    bool contains(std::string_view name) const;
    std::size_t index_of(std::string_view name) const;  // throws ValidationError if absent

    // FNV-1a over the newline-joined names; embedded in model files so a
    // model cannot be scored against a reordered label set.
    std::uint64_t fingerprint() const;

    bool operator==(const LabelSpace& other) const { return names_ == other.names_; }

private:
    std::vector<std::string> names_;
    std::vector<std::pair<std::string, std::size_t>> sorted_index_;  // binary-searchable
};

struct ThreadSet {
    std::vector<Thread> threads;
    Split split = Split::train;
    bool labeled = false;

    std::size_t size() const { return threads.size(); }
};

inline constexpr std::size_t kMaxCategoriesPerThread = 6;

// Reads a thread file. Accepts one JSON object per line or a single JSON
// array of objects (auto-detected). Every record needs idx, text and reply;
// categories, when present, must hold 1..6 distinct names. When `labels` is
// given, every category must belong to it.
ThreadSet load_threads(const std::string& path, bool expect_labeled,
                       Split split = Split::train, const LabelSpace* labels = nullptr);

// Same contract, parsing from memory. `origin` names the source in errors.
ThreadSet parse_threads(std::string_view data, bool expect_labeled,
                        Split split = Split::train, const LabelSpace* labels = nullptr,
                        std::string_view origin = "<memory>");

// Always writes JSON-lines, one object per thread.
void save_threads(const ThreadSet& ts, const std::string& path);
std::string serialize_threads(const ThreadSet& ts);

// Sorted union of all categories seen in a labeled, non-empty train set.
LabelSpace build_label_space(const ThreadSet& train);

// counts[i] = number of threads whose categories contain name i.
std::vector<std::size_t> category_distribution(const ThreadSet& ts, const LabelSpace& ls);

// Symmetric co-appearance counts; the diagonal holds per-category totals.
class CooccurrenceTable {
public:
    explicit CooccurrenceTable(std::size_t c) : c_(c), counts_(c * c, 0) {}

    std::size_t dim() const { return c_; }
    std::size_t at(std::size_t i, std::size_t j) const { return counts_[i * c_ + j]; }
    std::size_t& at(std::size_t i, std::size_t j) { return counts_[i * c_ + j]; }

private:
    std::size_t c_;
    std::vector<std::size_t> counts_;
};

CooccurrenceTable cooccurrence(const ThreadSet& ts, const LabelSpace& ls);

// CSV with header "category,count".
void write_distribution_csv(const std::string& path, const LabelSpace& ls,
                            const std::vector<std::size_t>& counts);
std::vector<std::size_t> read_distribution_csv(const std::string& path, const LabelSpace& ls);

// Square CSV with the category names as both header row and first column.
void write_cooccurrence_csv(const std::string& path, const LabelSpace& ls,
                            const CooccurrenceTable& table);

} // namespace gifcat
