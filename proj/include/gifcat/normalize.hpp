#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "gifcat/threads.hpp"

namespace gifcat {

struct NormalizationReport {
    std::size_t punctuation = 0;   // step 1 substitutions
    std::size_t contractions = 0;  // step 2
    std::size_t symbols = 0;       // step 3
    std::size_t emoji = 0;         // step 4
    std::size_t slang = 0;         // step 5
    std::size_t unmapped_emoji = 0;
    std::size_t input_chars = 0;   // codepoints
    std::size_t output_chars = 0;

    NormalizationReport& operator+=(const NormalizationReport& other);
};

struct Rule {
    std::string source;
    std::string target;
};

// The five ordered mapping tables. Loading validates the idempotence
// invariant: no target may contain (under the owning step's matching rules)
// a source key of its own table or of any earlier step's table, so running
// the pipeline twice is the same as running it once.
class RuleSet {
public:
    static RuleSet from_tables(std::vector<Rule> punct, std::vector<Rule> contractions,
                               std::vector<Rule> symbols, std::vector<Rule> emoji,
                               std::vector<Rule> slang);

    // One UTF-8 TSV per step: source<TAB>target, '#'-prefixed comment lines.
    static RuleSet load(const std::string& punct_path, const std::string& contractions_path,
                        const std::string& symbols_path, const std::string& emoji_path,
                        const std::string& slang_path);

    // Loads <dir>/punctuation.tsv, contractions.tsv, symbols.tsv, emoji.tsv,
    // slang.tsv.
    static RuleSet load_dir(const std::string& dir);

    const std::vector<Rule>& punct() const { return punct_; }
    const std::vector<Rule>& contractions() const { return contractions_; }
    const std::vector<Rule>& symbols() const { return symbols_; }
    const std::vector<Rule>& emoji() const { return emoji_; }
    const std::vector<Rule>& slang() const { return slang_; }

    const std::string* contraction_target(const std::string& word) const;
    const std::string* slang_target(const std::string& lowercase_word) const;
    const std::string* emoji_target(const std::u32string& key) const;
    const std::string* symbol_target(const std::u32string& key) const;
    std::size_t emoji_max_key_len() const { return emoji_max_key_len_; }
    std::size_t symbol_max_key_len() const { return symbol_max_key_len_; }

private:
    void build_lookups();
    void validate() const;

    std::vector<Rule> punct_;
    std::vector<Rule> contractions_;
    std::vector<Rule> symbols_;
    std::vector<Rule> emoji_;
    std::vector<Rule> slang_;

    std::unordered_map<std::string, std::string> contraction_lookup_;
    std::unordered_map<std::string, std::string> slang_lookup_;  // lowercase keys
    std::unordered_map<std::u32string, std::string> emoji_lookup_;
    std::unordered_map<std::u32string, std::string> symbol_lookup_;
    std::size_t emoji_max_key_len_ = 0;   // codepoints
    std::size_t symbol_max_key_len_ = 0;  // codepoints
};

// Step 1: literal replacement of each punct source, in table order.
std::string fix_punctuation(std::string_view s, const RuleSet& rules,
                            NormalizationReport* report = nullptr);

// Step 2: whole-word contraction expansion; only the first letter may differ
// in case from the table key, and a leading capital carries over.
std::string expand_apostrophes(std::string_view s, const RuleSet& rules,
                               NormalizationReport* report = nullptr);

// Step 3: symbol-to-word replacement, the word space-padded on any side that
// touches a non-space character.
std::string map_unknown_punct(std::string_view s, const RuleSet& rules,
                              NormalizationReport* report = nullptr);

// Step 4: a maximal consecutive run of one emoji collapses to a single
// occurrence, then mapped emoji become their :name: form. Unmapped emoji
// pass through (counted in the report).
std::string demojize(std::string_view s, const RuleSet& rules,
                     NormalizationReport* report = nullptr);

// Step 5: whole-word, case-insensitive slang/trend-word replacement.
std::string detweetize(std::string_view s, const RuleSet& rules,
                       NormalizationReport* report = nullptr);

// Steps 1..5 in order, then whitespace squeezed to single spaces and
// trimmed. Case is never folded.
std::pair<std::string, NormalizationReport> normalize(std::string_view s, const RuleSet& rules);

// Applies the first `step_count` steps (0..5) without the final whitespace
// squeeze, for measuring tokenizer coverage after a step prefix.
std::string normalize_prefix(std::string_view s, const RuleSet& rules, std::size_t step_count,
                             NormalizationReport* report = nullptr);

// Normalizes text and reply of every thread in place; returns the summed
// report.
NormalizationReport normalize_threads(ThreadSet& ts, const RuleSet& rules);

// Codepoints the emoji step treats as emoji when they carry no table entry.
bool is_emoji_codepoint(char32_t cp);

} // namespace gifcat
