#include "gifcat/prediction.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "gifcat/error.hpp"

namespace gifcat {

void PredictionMatrix::validate() const {
    if (scores.size() != idx.size() * names.size()) {
        throw ValidationError("prediction matrix shape mismatch");
    }
    for (double s : scores) {
        if (!std::isfinite(s)) throw ValidationError("non-finite score in prediction matrix");
        if (s < 0.0) throw ValidationError("negative score in prediction matrix");
        if (kind == ScoreKind::probability && s > 1.0) {
            throw ValidationError("probability score above 1");
        }
    }
}

void PredictionMatrix::check_alignment(const ThreadSet& ts) const {
    if (ts.threads.size() != idx.size()) {
        throw ValidationError("prediction matrix has " + std::to_string(idx.size()) +
                              " rows for " + std::to_string(ts.threads.size()) + " threads");
    }
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (ts.threads[i].idx != idx[i]) {
            throw ValidationError("prediction row " + std::to_string(i) + " is for idx '" +
                                  idx[i] + "' but thread order has '" + ts.threads[i].idx + "'");
        }
    }
}

namespace {

std::string format_score(double v) {
    char buf[40];
    // 12 significant digits; plenty to reproduce the ranking and above the
    // 9-digit floor the file format promises.
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    fields.push_back(std::move(cur));
    return fields;
}

} // namespace

void write_scores_csv(const std::string& path, const PredictionMatrix& m) {
    m.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot write scores file: " + path);
    out << "idx";
    for (const auto& n : m.names) out << ',' << n;
    out << '\n';
    for (std::size_t r = 0; r < m.rows(); ++r) {
        out << m.idx[r];
        for (std::size_t c = 0; c < m.cols(); ++c) out << ',' << format_score(m.at(r, c));
        out << '\n';
    }
}

PredictionMatrix read_scores_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open scores file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty scores file: " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> header = split_csv_line(line);
    if (header.size() < 2 || header[0] != "idx") {
        throw ParseError(path + ": expected header 'idx,<category>,...'");
    }
    PredictionMatrix m;
    m.names.assign(header.begin() + 1, header.end());
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> fields = split_csv_line(line);
        if (fields.size() != header.size()) {
            throw ParseError(path + ":" + std::to_string(lineno) + ": expected " +
                             std::to_string(header.size()) + " fields, got " +
                             std::to_string(fields.size()));
        }
        m.idx.push_back(fields[0]);
        for (std::size_t c = 1; c < fields.size(); ++c) {
            try {
                m.scores.push_back(std::stod(fields[c]));
            } catch (const std::exception&) {
                throw ParseError(path + ":" + std::to_string(lineno) + ": bad score '" +
                                 fields[c] + "'");
            }
        }
    }
    m.kind = ScoreKind::probability;
    m.validate();
    return m;
}

void write_submission(
    const std::string& path, const std::vector<std::string>& idx_order,
    const std::unordered_map<std::string, std::vector<std::string>>& predictions) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot write submission file: " + path);
    for (const std::string& idx : idx_order) {
        auto it = predictions.find(idx);
        if (it == predictions.end()) {
            throw ValidationError("no prediction for idx '" + idx + "'");
        }
        nlohmann::ordered_json obj;
        obj["idx"] = idx;
        obj["categories"] = it->second;
        out << obj.dump() << '\n';
    }
}

std::unordered_map<std::string, std::vector<std::string>> read_submission(
    const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open submission file: " + path);
    std::unordered_map<std::string, std::vector<std::string>> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError(path + ":" + std::to_string(lineno) + ": malformed JSON: " +
                             e.what());
        }
        if (!obj.contains("idx") || !obj.contains("categories")) {
            throw ValidationError(path + ":" + std::to_string(lineno) +
                                  ": expected keys idx and categories");
        }
        const std::string idx = obj["idx"].get<std::string>();
        if (!out.emplace(idx, obj["categories"].get<std::vector<std::string>>()).second) {
            throw ValidationError(path + ":" + std::to_string(lineno) + ": duplicate idx '" +
                                  idx + "'");
        }
    }
    return out;
}

} // namespace gifcat
