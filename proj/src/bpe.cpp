#include "gifcat/bpe.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "gifcat/error.hpp"
#include "gifcat/text.hpp"

namespace gifcat {

namespace {

// Adjacent-pair key for the rank map. 0x01 never occurs inside a token
// string because every byte-encoder codepoint is printable.
std::string pair_key(const std::string& left, const std::string& right) {
    std::string k;
    k.reserve(left.size() + right.size() + 1);
    k += left;
    k += '\x01';
    k += right;
    return k;
}

bool is_ascii_ws(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

} // namespace

ByteEncoder::ByteEncoder() {
    std::array<bool, 256> direct{};
    auto mark = [&](int lo, int hi) {
        for (int b = lo; b <= hi; ++b) direct[static_cast<std::size_t>(b)] = true;
    };
    mark('!', '~');
    mark(0xA1, 0xAC);
    mark(0xAE, 0xFF);
    char32_t next = 256;
    for (int b = 0; b < 256; ++b) {
        const char32_t cp = direct[static_cast<std::size_t>(b)] ? static_cast<char32_t>(b) : next++;
        to_char_[static_cast<std::size_t>(b)] = cp;
        to_utf8_[static_cast<std::size_t>(b)] = text::to_utf8(cp);
        to_byte_.emplace(cp, static_cast<unsigned char>(b));
    }
}

std::optional<unsigned char> ByteEncoder::byte_of(char32_t cp) const {
    auto it = to_byte_.find(cp);
    if (it == to_byte_.end()) return std::nullopt;
    return it->second;
}

std::string ByteEncoder::encode_bytes(std::string_view raw) const {
    std::string out;
    out.reserve(raw.size() * 2);
    for (unsigned char b : raw) out += to_utf8_[b];
    return out;
}

std::string ByteEncoder::decode_chars(std::string_view encoded) const {
    std::string out;
    out.reserve(encoded.size());
    std::size_t i = 0;
    while (i < encoded.size()) {
        const char32_t cp = text::next_codepoint(encoded, i);
        const auto b = byte_of(cp);
        if (!b) {
            throw ValidationError("token contains a codepoint outside the byte map: U+" +
                                  std::to_string(static_cast<std::uint32_t>(cp)));
        }
        out += static_cast<char>(*b);
    }
    return out;
}

SubwordVocab SubwordVocab::from_tables(std::unordered_map<std::string, int> token_to_id,
                                       std::vector<std::pair<std::string, std::string>> merges) {
    SubwordVocab v;
    v.token_to_id_ = std::move(token_to_id);
    v.merges_ = std::move(merges);
    v.id_to_token_.resize(v.token_to_id_.size());
    std::vector<bool> seen(v.token_to_id_.size(), false);
    for (const auto& [token, id] : v.token_to_id_) {
        if (id < 0 || static_cast<std::size_t>(id) >= v.id_to_token_.size() || seen[id]) {
            throw ValidationError("vocab ids are not a dense 0..V-1 range (offending id " +
                                  std::to_string(id) + " for token '" + token + "')");
        }
        seen[static_cast<std::size_t>(id)] = true;
        v.id_to_token_[static_cast<std::size_t>(id)] = token;
    }
    int rank = 0;
    for (const auto& [left, right] : v.merges_) {
        auto [it, inserted] = v.pair_rank_.emplace(pair_key(left, right), rank++);
        if (!inserted) {
            throw ValidationError("duplicate merge rule: '" + left + "' + '" + right + "'");
        }
    }
    v.validate();
    return v;
}

void SubwordVocab::validate() const {
    for (const auto& [left, right] : merges_) {
        if (!has_token(left + right)) {
            throw ValidationError("dangling merge: '" + left + "' + '" + right +
                                  "' produces a token not in the vocabulary");
        }
    }
    for (int b = 0; b < 256; ++b) {
        const std::string& tok = byte_encoder_.utf8_of(static_cast<unsigned char>(b));
        if (!has_token(tok)) {
            throw ValidationError("vocabulary is missing the base token for byte " +
                                  std::to_string(b));
        }
    }
    // Every token must map back to bytes, or decode would not be total.
    for (const std::string& tok : id_to_token_) {
        byte_encoder_.decode_chars(tok);
    }
}

SubwordVocab SubwordVocab::load(const std::string& vocab_path, const std::string& merges_path) {
    std::ifstream vin(vocab_path, std::ios::binary);
    if (!vin) throw ParseError("cannot open vocab file: " + vocab_path);
    nlohmann::json doc;
    try {
        vin >> doc;
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(vocab_path + ": malformed JSON: " + e.what());
    }
    if (!doc.is_object()) throw ParseError(vocab_path + ": expected a JSON object token -> id");
    std::unordered_map<std::string, int> token_to_id;
    token_to_id.reserve(doc.size());
    for (auto it = doc.begin(); it != doc.end(); ++it) {
        if (!it.value().is_number_integer()) {
            throw ParseError(vocab_path + ": id for token '" + it.key() + "' is not an integer");
        }
        token_to_id.emplace(it.key(), it.value().get<int>());
    }

    std::ifstream min(merges_path, std::ios::binary);
    if (!min) throw ParseError("cannot open merges file: " + merges_path);
    std::vector<std::pair<std::string, std::string>> merges;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(min, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.rfind("#version", 0) == 0) continue;
        const std::size_t space = line.find(' ');
        if (space == std::string::npos || space == 0 || space + 1 == line.size()) {
            throw ParseError(merges_path + ":" + std::to_string(lineno) +
                             ": expected 'left right'");
        }
        merges.emplace_back(line.substr(0, space), line.substr(space + 1));
    }
    return from_tables(std::move(token_to_id), std::move(merges));
}

SubwordVocab SubwordVocab::byte_only() {
    std::unordered_map<std::string, int> token_to_id;
    const ByteEncoder enc;
    for (int b = 0; b < 256; ++b) {
        token_to_id.emplace(enc.utf8_of(static_cast<unsigned char>(b)), b);
    }
    return from_tables(std::move(token_to_id), {});
}

bool SubwordVocab::has_token(const std::string& token) const {
    return token_to_id_.count(token) != 0;
}

int SubwordVocab::id_of(const std::string& token) const {
    auto it = token_to_id_.find(token);
    if (it == token_to_id_.end()) throw ValidationError("token not in vocabulary: '" + token + "'");
    return it->second;
}

const std::string& SubwordVocab::token_of(int id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size()) {
        throw ValidationError("token id out of range: " + std::to_string(id));
    }
    return id_to_token_[static_cast<std::size_t>(id)];
}

int SubwordVocab::pair_rank(const std::string& left, const std::string& right) const {
    auto it = pair_rank_.find(pair_key(left, right));
    return it == pair_rank_.end() ? -1 : it->second;
}

std::vector<std::string_view> pretokenize(std::string_view raw) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    const std::size_t n = raw.size();
    while (i < n) {
        if (!is_ascii_ws(raw[i])) {
            std::size_t j = i;
            while (j < n && !is_ascii_ws(raw[j])) ++j;
            out.push_back(raw.substr(i, j - i));
            i = j;
            continue;
        }
        std::size_t j = i;
        while (j < n && is_ascii_ws(raw[j])) ++j;
        if (j < n && raw[j - 1] == ' ') {
            // Last space of the run attaches to the following word.
            if (j - 1 > i) out.push_back(raw.substr(i, j - 1 - i));
            std::size_t k = j;
            while (k < n && !is_ascii_ws(raw[k])) ++k;
            out.push_back(raw.substr(j - 1, k - (j - 1)));
            i = k;
        } else {
            out.push_back(raw.substr(i, j - i));
            i = j;
        }
    }
    return out;
}

namespace {

// Splits an encoded pre-token into its single-char symbols, then greedily
// applies the lowest-ranked merge present until none applies; all
// occurrences of the chosen pair merge left to right in one sweep.
std::vector<std::string> bpe_symbols(std::string_view encoded, const SubwordVocab& vocab) {
    std::vector<std::string> word;
    std::size_t i = 0;
    while (i < encoded.size()) {
        const std::size_t start = i;
        text::next_codepoint(encoded, i);
        word.emplace_back(encoded.substr(start, i - start));
    }
    while (word.size() > 1) {
        int best_rank = std::numeric_limits<int>::max();
        std::size_t best_pos = 0;
        for (std::size_t p = 0; p + 1 < word.size(); ++p) {
            const int r = vocab.pair_rank(word[p], word[p + 1]);
            if (r >= 0 && r < best_rank) {
                best_rank = r;
                best_pos = p;
            }
        }
        if (best_rank == std::numeric_limits<int>::max()) break;
        const std::string left = word[best_pos];
        const std::string right = word[best_pos + 1];
        std::vector<std::string> next;
        next.reserve(word.size());
        std::size_t p = 0;
        while (p < word.size()) {
            if (p + 1 < word.size() && word[p] == left && word[p + 1] == right) {
                next.push_back(left + right);
                p += 2;
            } else {
                next.push_back(word[p]);
                ++p;
            }
        }
        word = std::move(next);
    }
    return word;
}

void encode_pretoken_into(std::string_view raw_pretoken, const SubwordVocab& vocab,
                          std::vector<int>& out) {
    const std::string encoded = vocab.bytes().encode_bytes(raw_pretoken);
    for (const std::string& sym : bpe_symbols(encoded, vocab)) {
        out.push_back(vocab.id_of(sym));
    }
}

} // namespace

std::vector<int> encode(std::string_view raw, const SubwordVocab& vocab) {
    std::vector<int> ids;
    ids.reserve(raw.size() / 3 + 1);
    for (std::string_view pre : pretokenize(raw)) {
        encode_pretoken_into(pre, vocab, ids);
    }
    return ids;
}

std::vector<int> encode_pretoken(std::string_view raw_pretoken, const SubwordVocab& vocab) {
    std::vector<int> ids;
    encode_pretoken_into(raw_pretoken, vocab, ids);
    return ids;
}

std::string decode(const std::vector<int>& ids, const SubwordVocab& vocab) {
    std::string encoded;
    for (int id : ids) encoded += vocab.token_of(id);
    return vocab.bytes().decode_chars(encoded);
}

std::string_view field_name(ThreadField f) {
    return f == ThreadField::text ? "text" : "reply";
}

ThreadField field_from_name(std::string_view name) {
    if (name == "text") return ThreadField::text;
    if (name == "reply") return ThreadField::reply;
    throw ValidationError("unknown field: " + std::string(name));
}

const std::string& field_of(const Thread& t, ThreadField f) {
    return f == ThreadField::text ? t.text : t.reply;
}

namespace {

// Covered = the mid-sentence (leading space) form is a single token.
// Cached per distinct word; coverage counts occurrences.
class CoverageScanner {
public:
    explicit CoverageScanner(const SubwordVocab& vocab) : vocab_(vocab) {}

    bool covered(const std::string& word) {
        auto it = cache_.find(word);
        if (it != cache_.end()) return it->second;
        const bool one_token = encode_pretoken(" " + word, vocab_).size() == 1;
        cache_.emplace(word, one_token);
        return one_token;
    }

private:
    const SubwordVocab& vocab_;
    std::unordered_map<std::string, bool> cache_;
};

} // namespace

CoverageStat coverage(const ThreadSet& ts, ThreadField field, const SubwordVocab& vocab) {
    CoverageScanner scanner(vocab);
    CoverageStat stat;
    stat.field = field;
    stat.split = ts.split;
    for (const Thread& t : ts.threads) {
        for (const std::string& word : text::split_words(field_of(t, field))) {
            ++stat.total_words;
            if (scanner.covered(word)) ++stat.covered_words;
        }
    }
    if (stat.total_words == 0) {
        stat.percentage = 100.0;
        stat.empty_corpus = true;
    } else {
        stat.percentage = 100.0 * static_cast<double>(stat.covered_words) /
                          static_cast<double>(stat.total_words);
    }
    return stat;
}

std::vector<OovEntry> oov_report(const ThreadSet& ts, ThreadField field,
                                 const SubwordVocab& vocab, std::size_t top_n) {
    CoverageScanner scanner(vocab);
    std::unordered_map<std::string, std::size_t> counts;
    for (const Thread& t : ts.threads) {
        for (const std::string& word : text::split_words(field_of(t, field))) {
            if (!scanner.covered(word)) ++counts[word];
        }
    }
    std::vector<OovEntry> entries;
    entries.reserve(counts.size());
    for (auto& [word, count] : counts) entries.push_back({word, count});
    std::sort(entries.begin(), entries.end(), [](const OovEntry& a, const OovEntry& b) {
        if (a.count != b.count) return a.count > b.count;
        return a.word < b.word;
    });
    if (entries.size() > top_n) entries.resize(top_n);
    return entries;
}

} // namespace gifcat
