#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "gifcat/threads.hpp"

namespace gifcat {

// The standard byte-level scheme: every raw byte maps to a printable
// codepoint (printable ASCII and Latin-1 map to themselves, the rest fill
// 256..), so token strings never contain control bytes and any byte string
// round-trips.
class ByteEncoder {
public:
    ByteEncoder();

    char32_t codepoint_of(unsigned char b) const { return to_char_[b]; }
    const std::string& utf8_of(unsigned char b) const { return to_utf8_[b]; }
    std::optional<unsigned char> byte_of(char32_t cp) const;

    // Raw bytes -> printable-char string.
    std::string encode_bytes(std::string_view raw) const;
    // Printable-char string -> raw bytes; throws ValidationError on a
    // codepoint outside the byte map.
    std::string decode_chars(std::string_view encoded) const;

private:
    std::array<char32_t, 256> to_char_;
    std::array<std::string, 256> to_utf8_;
    std::unordered_map<char32_t, unsigned char> to_byte_;
};

// Byte-level BPE vocabulary: dense token ids plus ranked merge rules.
class SubwordVocab {
public:
    // vocab file: JSON object token -> id. merges file: one space-separated
    // pair per line, rank order; a leading "#version" line is tolerated.
    static SubwordVocab load(const std::string& vocab_path, const std::string& merges_path);

    static SubwordVocab from_tables(std::unordered_map<std::string, int> token_to_id,
                                    std::vector<std::pair<std::string, std::string>> merges);

    // The 256 single-byte tokens and no merges: every word splits to bytes.
    static SubwordVocab byte_only();

    std::size_t size() const { return id_to_token_.size(); }
    bool has_token(const std::string& token) const;
    int id_of(const std::string& token) const;  // throws ValidationError if absent
    const std::string& token_of(int id) const;  // throws ValidationError if out of range
    // Merge rank of an adjacent symbol pair, or -1 when the pair never merges.
    int pair_rank(const std::string& left, const std::string& right) const;
    const std::vector<std::pair<std::string, std::string>>& merges() const { return merges_; }
    const ByteEncoder& bytes() const { return byte_encoder_; }

private:
    void validate() const;

    std::unordered_map<std::string, int> token_to_id_;
    std::vector<std::string> id_to_token_;
    std::vector<std::pair<std::string, std::string>> merges_;
    std::unordered_map<std::string, int> pair_rank_;
    ByteEncoder byte_encoder_;
};

// Splits raw bytes into pre-tokens: a non-space run takes one immediately
// preceding plain space with it; remaining whitespace runs stand alone.
// Concatenating the pre-tokens reproduces the input exactly.
std::vector<std::string_view> pretokenize(std::string_view raw);

// Byte-level BPE encoding of arbitrary bytes; total, and decode(encode(s))
// reconstructs s exactly.
std::vector<int> encode(std::string_view raw, const SubwordVocab& vocab);

// Encodes one pre-token (no whitespace splitting), e.g. " word" to test the
// mid-sentence form of a word.
std::vector<int> encode_pretoken(std::string_view raw_pretoken, const SubwordVocab& vocab);

std::string decode(const std::vector<int>& ids, const SubwordVocab& vocab);

enum class ThreadField { text, reply };

std::string_view field_name(ThreadField f);
ThreadField field_from_name(std::string_view name);
const std::string& field_of(const Thread& t, ThreadField f);

// A word is covered when its leading-space form encodes to exactly one
// token. Words are whitespace-delimited; punctuation stays attached.
struct CoverageStat {
    ThreadField field = ThreadField::text;
    Split split = Split::train;
    std::size_t covered_words = 0;
    std::size_t total_words = 0;
    double percentage = 100.0;
    bool empty_corpus = false;  // total_words == 0; percentage defined as 100
};

CoverageStat coverage(const ThreadSet& ts, ThreadField field, const SubwordVocab& vocab);

struct OovEntry {
    std::string word;
    std::size_t count = 0;

    bool operator==(const OovEntry&) const = default;
};

// Occurrence counts of all uncovered words, most frequent first (ties
// lexicographic), truncated to top_n.
std::vector<OovEntry> oov_report(const ThreadSet& ts, ThreadField field,
                                 const SubwordVocab& vocab, std::size_t top_n);

} // namespace gifcat
