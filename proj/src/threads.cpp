#include "gifcat/threads.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "gifcat/error.hpp"
#include "gifcat/text.hpp"

namespace gifcat {

using json = nlohmann::ordered_json;

std::string_view split_name(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::dev: return "dev";
        case Split::test: return "test";
    }
    return "train";
}

Split split_from_name(std::string_view name) {
    if (name == "train") return Split::train;
    if (name == "dev") return Split::dev;
    if (name == "test") return Split::test;
    throw ValidationError("unknown split name: " + std::string(name));
}

LabelSpace LabelSpace::from_names(std::vector<std::string> names) {
    LabelSpace ls;
    ls.names_ = std::move(names);
    ls.sorted_index_.reserve(ls.names_.size());
    for (std::size_t i = 0; i < ls.names_.size(); ++i) {
        ls.sorted_index_.emplace_back(ls.names_[i], i);
    }
    std::sort(ls.sorted_index_.begin(), ls.sorted_index_.end());
    for (std::size_t i = 1; i < ls.sorted_index_.size(); ++i) {
        if (ls.sorted_index_[i].first == ls.sorted_index_[i - 1].first) {
            throw ValidationError("duplicate category name in label space: " +
                                  ls.sorted_index_[i].first);
        }
    }
    return ls;
}

LabelSpace LabelSpace::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open label file: " + path);
    std::vector<std::string> names;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) names.push_back(line);
    }
    if (names.empty()) throw ValidationError("label file is empty: " + path);
    return from_names(std::move(names));
}

void LabelSpace::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot write label file: " + path);
    for (const auto& n : names_) out << n << '\n';
}

bool LabelSpace::contains(std::string_view name) const {
    auto it = std::lower_bound(sorted_index_.begin(), sorted_index_.end(), name,
                               [](const auto& p, std::string_view v) { return p.first < v; });
    return it != sorted_index_.end() && it->first == name;
}

std::size_t LabelSpace::index_of(std::string_view name) const {
    auto it = std::lower_bound(sorted_index_.begin(), sorted_index_.end(), name,
                               [](const auto& p, std::string_view v) { return p.first < v; });
    if (it == sorted_index_.end() || it->first != name) {
        throw ValidationError("category not in label space: " + std::string(name));
    }
    return it->second;
}

std::uint64_t LabelSpace::fingerprint() const {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    auto mix = [&h](char c) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ULL;
    };
    for (const auto& n : names_) {
        for (char c : n) mix(c);
        mix('\n');
    }
    return h;
}

namespace {

Thread thread_from_json(const json& obj, std::size_t line, std::string_view origin,
                        const LabelSpace* labels) {
    auto where = [&] {
        return std::string(origin) + ":" + std::to_string(line);
    };
    if (!obj.is_object()) throw ValidationError(where() + ": record is not a JSON object");

    Thread t;
    auto require_string = [&](const char* key) -> std::string {
        auto it = obj.find(key);
        if (it == obj.end()) throw ValidationError(where() + ": missing required key '" + key + "'");
        if (!it->is_string()) throw ValidationError(where() + ": key '" + key + "' is not a string");
        return it->get<std::string>();
    };
    t.idx = require_string("idx");
    t.text = require_string("text");
    t.reply = require_string("reply");

    if (auto it = obj.find("mp4"); it != obj.end()) {
        // Lenient: non-string values are kept as their compact JSON text.
        t.mp4 = it->is_string() ? it->get<std::string>() : it->dump();
    }

    if (auto it = obj.find("categories"); it != obj.end() && !it->is_null()) {
        if (!it->is_array()) throw ValidationError(where() + ": 'categories' is not an array");
        std::vector<std::string> cats;
        for (const auto& c : *it) {
            if (!c.is_string()) throw ValidationError(where() + ": category entry is not a string");
            cats.push_back(c.get<std::string>());
        }
        if (cats.empty() || cats.size() > kMaxCategoriesPerThread) {
            throw ValidationError(where() + ": thread '" + t.idx + "' has " +
                                  std::to_string(cats.size()) + " categories, expected 1.." +
                                  std::to_string(kMaxCategoriesPerThread));
        }
        std::set<std::string> seen;
        for (const auto& c : cats) {
            if (!seen.insert(c).second) {
                throw ValidationError(where() + ": duplicate category '" + c + "' in thread '" +
                                      t.idx + "'");
            }
            if (labels && !labels->contains(c)) {
                throw ValidationError(where() + ": category '" + c +
                                      "' is not in the label space (thread '" + t.idx + "')");
            }
        }
        t.categories = std::move(cats);
    }
    return t;
}

} // namespace

ThreadSet parse_threads(std::string_view data, bool expect_labeled, Split split,
                        const LabelSpace* labels, std::string_view origin) {
    ThreadSet ts;
    ts.split = split;

    std::size_t first = data.find_first_not_of(" \t\r\n");
    const bool is_array = first != std::string_view::npos && data[first] == '[';

    std::vector<std::pair<json, std::size_t>> records;  // (object, line)
    if (is_array) {
        json arr;
        try {
            arr = json::parse(data);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError(std::string(origin) + ":" +
                             std::to_string(text::line_of_offset(data, e.byte)) +
                             ": malformed JSON: " + e.what());
        }
        for (const auto& obj : arr) records.emplace_back(obj, 1);
    } else {
        std::size_t pos = 0, line = 0;
        while (pos <= data.size()) {
            std::size_t eol = data.find('\n', pos);
            if (eol == std::string_view::npos) eol = data.size();
            std::string_view raw = data.substr(pos, eol - pos);
            ++line;
            pos = eol + 1;
            if (raw.find_first_not_of(" \t\r") == std::string_view::npos) continue;
            try {
                records.emplace_back(json::parse(raw), line);
            } catch (const nlohmann::json::parse_error& e) {
                throw ParseError(std::string(origin) + ":" + std::to_string(line) +
                                 ": malformed JSON: " + e.what());
            }
        }
    }

    std::unordered_set<std::string> seen_idx;
    seen_idx.reserve(records.size());
    for (const auto& [obj, line] : records) {
        Thread t = thread_from_json(obj, line, origin, labels);
        if (!seen_idx.insert(t.idx).second) {
            throw ValidationError(std::string(origin) + ":" + std::to_string(line) +
                                  ": duplicate idx '" + t.idx + "'");
        }
        if (expect_labeled && !t.categories) {
            throw ValidationError(std::string(origin) + ":" + std::to_string(line) +
                                  ": thread '" + t.idx + "' has no categories but the file was loaded as labeled");
        }
        ts.threads.push_back(std::move(t));
    }

    if (ts.threads.empty()) {
        ts.labeled = expect_labeled;
    } else {
        ts.labeled = std::all_of(ts.threads.begin(), ts.threads.end(),
                                 [](const Thread& t) { return t.categories.has_value(); });
    }
    return ts;
}

ThreadSet load_threads(const std::string& path, bool expect_labeled, Split split,
                       const LabelSpace* labels) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open thread file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_threads(buf.str(), expect_labeled, split, labels, path);
}

std::string serialize_threads(const ThreadSet& ts) {
    std::string out;
    for (const Thread& t : ts.threads) {
        json obj;
        obj["idx"] = t.idx;
        obj["text"] = t.text;
        obj["reply"] = t.reply;
        if (t.categories) obj["categories"] = *t.categories;
        if (t.mp4) obj["mp4"] = *t.mp4;
        out += obj.dump();
        out += '\n';
    }
    return out;
}

void save_threads(const ThreadSet& ts, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot write thread file: " + path);
    out << serialize_threads(ts);
}

LabelSpace build_label_space(const ThreadSet& train) {
    if (!train.labeled) throw ValidationError("label space needs a labeled thread set");
    std::set<std::string> names;
    for (const Thread& t : train.threads) {
        for (const auto& c : *t.categories) names.insert(c);
    }
    if (names.empty()) throw ValidationError("no labels observed: cannot build a label space");
    return LabelSpace::from_names({names.begin(), names.end()});
}

std::vector<std::size_t> category_distribution(const ThreadSet& ts, const LabelSpace& ls) {
    if (!ts.labeled) throw ValidationError("category distribution needs a labeled thread set");
    std::vector<std::size_t> counts(ls.size(), 0);
    for (const Thread& t : ts.threads) {
        for (const auto& c : *t.categories) ++counts[ls.index_of(c)];
    }
    return counts;
}

CooccurrenceTable cooccurrence(const ThreadSet& ts, const LabelSpace& ls) {
    if (!ts.labeled) throw ValidationError("co-occurrence needs a labeled thread set");
    CooccurrenceTable table(ls.size());
    for (const Thread& t : ts.threads) {
        std::vector<std::size_t> ids;
        ids.reserve(t.categories->size());
        for (const auto& c : *t.categories) ids.push_back(ls.index_of(c));
        for (std::size_t a = 0; a < ids.size(); ++a) {
            ++table.at(ids[a], ids[a]);
            for (std::size_t b = a + 1; b < ids.size(); ++b) {
                ++table.at(ids[a], ids[b]);
                ++table.at(ids[b], ids[a]);
            }
        }
    }
    return table;
}

namespace {

// Quotes a CSV field only when it needs it.
std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
        if (c == '"') q += '"';
        q += c;
    }
    q += '"';
    return q;
}

} // namespace

void write_distribution_csv(const std::string& path, const LabelSpace& ls,
                            const std::vector<std::size_t>& counts) {
    if (counts.size() != ls.size()) throw ValidationError("distribution size mismatch");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot write csv: " + path);
    out << "category,count\n";
    for (std::size_t i = 0; i < ls.size(); ++i) {
        out << csv_field(ls.name(i)) << ',' << counts[i] << '\n';
    }
}

std::vector<std::size_t> read_distribution_csv(const std::string& path, const LabelSpace& ls) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open csv: " + path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty distribution csv: " + path);
    std::vector<std::size_t> counts(ls.size(), 0);
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::size_t comma = line.rfind(',');
        if (comma == std::string::npos) {
            throw ParseError(path + ":" + std::to_string(lineno) + ": expected 'category,count'");
        }
        std::string name = line.substr(0, comma);
        if (name.size() >= 2 && name.front() == '"' && name.back() == '"') {
            std::string unquoted;
            for (std::size_t i = 1; i + 1 < name.size(); ++i) {
                if (name[i] == '"' && i + 2 < name.size() && name[i + 1] == '"') ++i;
                unquoted += name[i];
            }
            name = std::move(unquoted);
        }
        counts[ls.index_of(name)] = std::stoull(line.substr(comma + 1));
    }
    return counts;
}

void write_cooccurrence_csv(const std::string& path, const LabelSpace& ls,
                            const CooccurrenceTable& table) {
    if (table.dim() != ls.size()) throw ValidationError("co-occurrence size mismatch");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot write csv: " + path);
    out << "category";
    for (std::size_t j = 0; j < ls.size(); ++j) out << ',' << csv_field(ls.name(j));
    out << '\n';
    for (std::size_t i = 0; i < ls.size(); ++i) {
        out << csv_field(ls.name(i));
        for (std::size_t j = 0; j < ls.size(); ++j) out << ',' << table.at(i, j);
        out << '\n';
    }
}

} // namespace gifcat
