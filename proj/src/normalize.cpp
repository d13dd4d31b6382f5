#include "gifcat/normalize.hpp"

#include <fstream>

#include "gifcat/error.hpp"
#include "gifcat/text.hpp"

namespace gifcat {

NormalizationReport& NormalizationReport::operator+=(const NormalizationReport& other) {
    punctuation += other.punctuation;
    contractions += other.contractions;
    symbols += other.symbols;
    emoji += other.emoji;
    slang += other.slang;
    unmapped_emoji += other.unmapped_emoji;
    input_chars += other.input_chars;
    output_chars += other.output_chars;
    return *this;
}

namespace {

std::u32string to_u32(std::string_view s) {
    std::u32string out;
    std::size_t i = 0;
    while (i < s.size()) out += text::next_codepoint(s, i);
    return out;
}

std::vector<Rule> load_tsv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open rule file: " + path);
    std::vector<Rule> rules;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const std::size_t tab = line.find('\t');
        if (tab == std::string::npos) {
            throw ParseError(path + ":" + std::to_string(lineno) +
                             ": expected two tab-separated columns");
        }
        Rule r{line.substr(0, tab), line.substr(tab + 1)};
        if (r.source.empty()) {
            throw ParseError(path + ":" + std::to_string(lineno) + ": empty source key");
        }
        rules.push_back(std::move(r));
    }
    return rules;
}

bool word_equals_with_leading_case_flex(const std::string& word, const std::string& key) {
    if (word == key) return true;
    if (word.empty() || key.empty() || word.size() != key.size()) return false;
    char w0 = word[0];
    if (w0 >= 'A' && w0 <= 'Z') w0 = static_cast<char>(w0 - 'A' + 'a');
    return w0 == key[0] && word.compare(1, std::string::npos, key, 1, std::string::npos) == 0;
}

// Walks hay's words (runs of word characters) and asks `pred` about each.
template <typename Pred>
bool any_word(const std::string& hay, Pred pred) {
    std::size_t i = 0;
    std::string word;
    while (i <= hay.size()) {
        char32_t cp = 0;
        bool at_end = i == hay.size();
        std::size_t start = i;
        if (!at_end) cp = text::next_codepoint(hay, i);
        if (!at_end && text::is_word_char(cp)) {
            word.append(hay.substr(start, i - start));
        } else {
            if (!word.empty() && pred(word)) return true;
            word.clear();
            if (at_end) break;
        }
    }
    return false;
}

enum class StepKind { substring, word_leading_case, word_ci };

bool target_contains_key(const std::string& target, const std::string& key, StepKind kind) {
    switch (kind) {
        case StepKind::substring:
            return target.find(key) != std::string::npos;
        case StepKind::word_leading_case:
            return any_word(target, [&](const std::string& w) {
                return word_equals_with_leading_case_flex(w, key);
            });
        case StepKind::word_ci: {
            const std::string lower_key = text::ascii_lower(key);
            return any_word(target, [&](const std::string& w) {
                return text::ascii_lower(w) == lower_key;
            });
        }
    }
    return false;
}

const char* kStepNames[5] = {"punctuation", "contractions", "symbols", "emoji", "slang"};

} // namespace

RuleSet RuleSet::from_tables(std::vector<Rule> punct, std::vector<Rule> contractions,
                             std::vector<Rule> symbols, std::vector<Rule> emoji,
                             std::vector<Rule> slang) {
    RuleSet rs;
    rs.punct_ = std::move(punct);
    rs.contractions_ = std::move(contractions);
    rs.symbols_ = std::move(symbols);
    rs.emoji_ = std::move(emoji);
    rs.slang_ = std::move(slang);
    rs.build_lookups();
    rs.validate();
    return rs;
}

RuleSet RuleSet::load(const std::string& punct_path, const std::string& contractions_path,
                      const std::string& symbols_path, const std::string& emoji_path,
                      const std::string& slang_path) {
    return from_tables(load_tsv(punct_path), load_tsv(contractions_path),
                       load_tsv(symbols_path), load_tsv(emoji_path), load_tsv(slang_path));
}

RuleSet RuleSet::load_dir(const std::string& dir) {
    return load(dir + "/punctuation.tsv", dir + "/contractions.tsv", dir + "/symbols.tsv",
                dir + "/emoji.tsv", dir + "/slang.tsv");
}

void RuleSet::build_lookups() {
    for (const Rule& r : contractions_) contraction_lookup_.emplace(r.source, r.target);
    for (const Rule& r : slang_) slang_lookup_.emplace(text::ascii_lower(r.source), r.target);
    for (const Rule& r : emoji_) {
        std::u32string key = to_u32(r.source);
        emoji_max_key_len_ = std::max(emoji_max_key_len_, key.size());
        emoji_lookup_.emplace(std::move(key), r.target);
    }
    for (const Rule& r : symbols_) {
        std::u32string key = to_u32(r.source);
        symbol_max_key_len_ = std::max(symbol_max_key_len_, key.size());
        symbol_lookup_.emplace(std::move(key), r.target);
    }
}

void RuleSet::validate() const {
    const std::vector<Rule>* tables[5] = {&punct_, &contractions_, &symbols_, &emoji_, &slang_};
    const StepKind kinds[5] = {StepKind::substring, StepKind::word_leading_case,
                               StepKind::substring, StepKind::substring, StepKind::word_ci};
    for (std::size_t step = 0; step < 5; ++step) {
        for (const Rule& rule : *tables[step]) {
            for (std::size_t earlier = 0; earlier <= step; ++earlier) {
                for (const Rule& key_rule : *tables[earlier]) {
                    if (target_contains_key(rule.target, key_rule.source, kinds[earlier])) {
                        throw ValidationError(
                            std::string("rule table invariant violated: ") + kStepNames[step] +
                            " target '" + rule.target + "' contains " + kStepNames[earlier] +
                            " key '" + key_rule.source + "'");
                    }
                }
            }
        }
    }
}

const std::string* RuleSet::contraction_target(const std::string& word) const {
    auto it = contraction_lookup_.find(word);
    return it == contraction_lookup_.end() ? nullptr : &it->second;
}

const std::string* RuleSet::slang_target(const std::string& lowercase_word) const {
    auto it = slang_lookup_.find(lowercase_word);
    return it == slang_lookup_.end() ? nullptr : &it->second;
}

const std::string* RuleSet::emoji_target(const std::u32string& key) const {
    auto it = emoji_lookup_.find(key);
    return it == emoji_lookup_.end() ? nullptr : &it->second;
}

const std::string* RuleSet::symbol_target(const std::u32string& key) const {
    auto it = symbol_lookup_.find(key);
    return it == symbol_lookup_.end() ? nullptr : &it->second;
}

bool is_emoji_codepoint(char32_t cp) {
    return (cp >= 0x1F000 && cp <= 0x1FAFF) ||  // pictographs, emoticons, transport, ...
           (cp >= 0x2600 && cp <= 0x27BF) ||    // misc symbols and dingbats
           (cp >= 0x2B00 && cp <= 0x2BFF) ||    // stars, geometric shapes
           cp == 0x203C || cp == 0x2049;
}

std::string fix_punctuation(std::string_view s, const RuleSet& rules,
                            NormalizationReport* report) {
    std::string current(s);
    for (const Rule& r : rules.punct()) {
        if (current.find(r.source) == std::string::npos) continue;
        std::string next;
        next.reserve(current.size());
        std::size_t pos = 0;
        while (true) {
            const std::size_t hit = current.find(r.source, pos);
            if (hit == std::string::npos) {
                next.append(current, pos, std::string::npos);
                break;
            }
            next.append(current, pos, hit - pos);
            next.append(r.target);
            pos = hit + r.source.size();
            if (report) ++report->punctuation;
        }
        current = std::move(next);
    }
    return current;
}

namespace {

// Shared scanner for the two whole-word steps: copies non-word spans
// verbatim and lets `replace_word` rewrite each word.
template <typename ReplaceWord>
std::string map_words(std::string_view s, ReplaceWord replace_word) {
    std::string out;
    out.reserve(s.size());
    std::string word;
    std::size_t i = 0;
    while (i <= s.size()) {
        const bool at_end = i == s.size();
        const std::size_t start = i;
        char32_t cp = 0;
        if (!at_end) cp = text::next_codepoint(s, i);
        if (!at_end && text::is_word_char(cp)) {
            word.append(s.substr(start, i - start));
        } else {
            if (!word.empty()) {
                replace_word(word, out);
                word.clear();
            }
            if (at_end) break;
            out.append(s.substr(start, i - start));
        }
    }
    return out;
}

} // namespace

std::string expand_apostrophes(std::string_view s, const RuleSet& rules,
                               NormalizationReport* report) {
    return map_words(s, [&](const std::string& word, std::string& out) {
        if (const std::string* t = rules.contraction_target(word)) {
            out.append(*t);
            if (report) ++report->contractions;
            return;
        }
        if (word[0] >= 'A' && word[0] <= 'Z') {
            std::string lowered = word;
            lowered[0] = static_cast<char>(lowered[0] - 'A' + 'a');
            if (const std::string* t = rules.contraction_target(lowered)) {
                std::string expansion = *t;
                if (!expansion.empty() && expansion[0] >= 'a' && expansion[0] <= 'z') {
                    expansion[0] = static_cast<char>(expansion[0] - 'a' + 'A');
                }
                out.append(expansion);
                if (report) ++report->contractions;
                return;
            }
        }
        out.append(word);
    });
}

std::string detweetize(std::string_view s, const RuleSet& rules, NormalizationReport* report) {
    return map_words(s, [&](const std::string& word, std::string& out) {
        if (const std::string* t = rules.slang_target(text::ascii_lower(word))) {
            out.append(*t);
            if (report) ++report->slang;
        } else {
            out.append(word);
        }
    });
}

std::string map_unknown_punct(std::string_view s, const RuleSet& rules,
                              NormalizationReport* report) {
    const std::u32string cps = to_u32(s);
    std::string out;
    out.reserve(s.size());
    char32_t last_out = 0;
    auto append_cp = [&](char32_t cp) {
        text::append_utf8(out, cp);
        last_out = cp;
    };
    std::size_t i = 0;
    while (i < cps.size()) {
        const std::string* target = nullptr;
        std::size_t match_len = 0;
        const std::size_t cap = std::min(rules.symbol_max_key_len(), cps.size() - i);
        for (std::size_t len = cap; len >= 1 && !target; --len) {
            target = rules.symbol_target(cps.substr(i, len));
            if (target) match_len = len;
        }
        if (!target) {
            append_cp(cps[i]);
            ++i;
            continue;
        }
        if (!out.empty() && !text::is_space(last_out)) append_cp(U' ');
        for (char c : *target) out += c;
        last_out = out.empty() ? 0 : static_cast<char32_t>(static_cast<unsigned char>(out.back()));
        i += match_len;
        if (i < cps.size() && !text::is_space(cps[i])) append_cp(U' ');
        if (report) ++report->symbols;
    }
    return out;
}

std::string demojize(std::string_view s, const RuleSet& rules, NormalizationReport* report) {
    const std::u32string cps = to_u32(s);
    std::string out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < cps.size()) {
        const std::string* target = nullptr;
        std::size_t match_len = 0;
        const std::size_t cap = std::min(rules.emoji_max_key_len(), cps.size() - i);
        for (std::size_t len = cap; len >= 1 && !target; --len) {
            target = rules.emoji_target(cps.substr(i, len));
            if (target) match_len = len;
        }
        if (target) {
            // Consume the whole run of this exact emoji sequence.
            std::size_t j = i + match_len;
            while (j + match_len <= cps.size() &&
                   cps.compare(j, match_len, cps, i, match_len) == 0) {
                j += match_len;
            }
            out.append(*target);
            if (report) ++report->emoji;
            i = j;
        } else if (is_emoji_codepoint(cps[i])) {
            const char32_t cp = cps[i];
            std::size_t j = i + 1;
            while (j < cps.size() && cps[j] == cp) ++j;
            text::append_utf8(out, cp);
            if (report) ++report->unmapped_emoji;
            i = j;
        } else {
            text::append_utf8(out, cps[i]);
            ++i;
        }
    }
    return out;
}

std::string normalize_prefix(std::string_view s, const RuleSet& rules, std::size_t step_count,
                             NormalizationReport* report) {
    if (step_count > 5) throw ValidationError("step prefix must be 0..5");
    std::string current(s);
    if (step_count >= 1) current = fix_punctuation(current, rules, report);
    if (step_count >= 2) current = expand_apostrophes(current, rules, report);
    if (step_count >= 3) current = map_unknown_punct(current, rules, report);
    if (step_count >= 4) current = demojize(current, rules, report);
    if (step_count >= 5) current = detweetize(current, rules, report);
    return current;
}

std::pair<std::string, NormalizationReport> normalize(std::string_view s, const RuleSet& rules) {
    NormalizationReport report;
    report.input_chars = to_u32(s).size();
    std::string out = text::squeeze_spaces(normalize_prefix(s, rules, 5, &report));
    report.output_chars = to_u32(out).size();
    return {std::move(out), report};
}

NormalizationReport normalize_threads(ThreadSet& ts, const RuleSet& rules) {
    NormalizationReport total;
    for (Thread& t : ts.threads) {
        auto [text_out, text_rep] = normalize(t.text, rules);
        auto [reply_out, reply_rep] = normalize(t.reply, rules);
        t.text = std::move(text_out);
        t.reply = std::move(reply_out);
        total += text_rep;
        total += reply_rep;
    }
    return total;
}

} // namespace gifcat
