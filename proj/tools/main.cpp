// gifcat: two-turn tweet-thread reaction-category pipeline.
//
// Subcommands: preprocess, coverage, stats, train, predict, ensemble,
// evaluate, pipeline. Exit codes: 0 success, 1 operational error, 2 usage.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gifcat/bpe.hpp"
#include "gifcat/ensemble.hpp"
#include "gifcat/error.hpp"
#include "gifcat/metrics.hpp"
#include "gifcat/model.hpp"
#include "gifcat/normalize.hpp"
#include "gifcat/prediction.hpp"
#include "gifcat/threads.hpp"

namespace fs = std::filesystem;
using namespace gifcat;

namespace {

std::string format_fixed(double v, int places) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", places, v);
    return buf;
}

void write_report_json(const std::string& path, const NormalizationReport& r) {
    nlohmann::ordered_json doc;
    doc["punctuation"] = r.punctuation;
    doc["contractions"] = r.contractions;
    doc["symbols"] = r.symbols;
    doc["emoji"] = r.emoji;
    doc["slang"] = r.slang;
    doc["unmapped_emoji"] = r.unmapped_emoji;
    doc["input_chars"] = r.input_chars;
    doc["output_chars"] = r.output_chars;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot write report: " + path);
    out << doc.dump(2) << '\n';
}

std::vector<double> parse_weights(const std::string& csv) {
    std::vector<double> weights;
    std::size_t start = 0;
    while (start <= csv.size()) {
        std::size_t comma = csv.find(',', start);
        if (comma == std::string::npos) comma = csv.size();
        const std::string field = csv.substr(start, comma - start);
        if (!field.empty()) {
            try {
                weights.push_back(std::stod(field));
            } catch (const std::exception&) {
                throw ValidationError("bad weight '" + field + "'");
            }
        }
        start = comma + 1;
    }
    if (weights.empty()) throw ValidationError("no weights given");
    return weights;
}

std::vector<std::string> split_csv_list(const std::string& csv) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= csv.size()) {
        std::size_t comma = csv.find(',', start);
        if (comma == std::string::npos) comma = csv.size();
        const std::string field = csv.substr(start, comma - start);
        if (!field.empty()) out.push_back(field);
        start = comma + 1;
    }
    return out;
}

// ---------------------------------------------------------------------------
// preprocess

struct PreprocessOpts {
    std::string in, out, rules_dir, report;
    std::string split = "train";
    bool labeled = false;
};

void run_preprocess(const PreprocessOpts& o) {
    const RuleSet rules = RuleSet::load_dir(o.rules_dir);
    ThreadSet ts = load_threads(o.in, o.labeled, split_from_name(o.split));
    const NormalizationReport report = normalize_threads(ts, rules);
    save_threads(ts, o.out);
    if (!o.report.empty()) write_report_json(o.report, report);
    std::cout << "normalized " << ts.size() << " threads -> " << o.out << "\n";
}

// ---------------------------------------------------------------------------
// coverage

struct CoverageOpts {
    std::string in, vocab, merges, field = "text", split = "train";
    std::string out, oov, rules_dir;
    std::size_t top = 20;
    int steps = -1;  // <0: leave text untouched
};

void run_coverage(const CoverageOpts& o) {
    const SubwordVocab vocab = SubwordVocab::load(o.vocab, o.merges);
    ThreadSet ts = load_threads(o.in, false, split_from_name(o.split));
    const ThreadField field = field_from_name(o.field);
    if (o.steps >= 0) {
        if (o.rules_dir.empty()) {
            throw ValidationError("--steps needs --rules-dir");
        }
        const RuleSet rules = RuleSet::load_dir(o.rules_dir);
        for (Thread& t : ts.threads) {
            std::string& value = field == ThreadField::text ? t.text : t.reply;
            value = normalize_prefix(value, rules, static_cast<std::size_t>(o.steps));
        }
    }
    const CoverageStat stat = coverage(ts, field, vocab);
    const std::string row = std::string(split_name(stat.split)) + "," +
                            std::string(field_name(stat.field)) + "," +
                            std::to_string(stat.covered_words) + "," +
                            std::to_string(stat.total_words) + "," +
                            format_fixed(stat.percentage, 3);
    std::cout << "split,field,covered,total,percentage\n" << row << "\n";
    if (stat.empty_corpus) std::cerr << "warning: no words in the measured field\n";
    if (!o.out.empty()) {
        std::ofstream f(o.out, std::ios::binary);
        if (!f) throw ParseError("cannot write csv: " + o.out);
        f << "split,field,covered,total,percentage\n" << row << "\n";
    }
    if (!o.oov.empty()) {
        std::ofstream f(o.oov, std::ios::binary);
        if (!f) throw ParseError("cannot write csv: " + o.oov);
        f << "word,count\n";
        for (const OovEntry& e : oov_report(ts, field, vocab, o.top)) {
            // words keep their punctuation, so commas and quotes can occur
            if (e.word.find_first_of(",\"\n") == std::string::npos) {
                f << e.word;
            } else {
                f << '"';
                for (char ch : e.word) {
                    if (ch == '"') f << '"';
                    f << ch;
                }
                f << '"';
            }
            f << ',' << e.count << '\n';
        }
    }
}

// ---------------------------------------------------------------------------
// stats

struct StatsOpts {
    std::string in, labels, distribution, cooc;
};

void run_stats(const StatsOpts& o) {
    const ThreadSet ts = load_threads(o.in, true);
    const LabelSpace ls = build_label_space(ts);
    if (!o.labels.empty()) ls.save(o.labels);
    if (!o.distribution.empty()) {
        write_distribution_csv(o.distribution, ls, category_distribution(ts, ls));
    }
    if (!o.cooc.empty()) {
        write_cooccurrence_csv(o.cooc, ls, cooccurrence(ts, ls));
    }
    std::cout << ls.size() << " categories across " << ts.size() << " threads\n";
}

// ---------------------------------------------------------------------------
// train

struct TrainOpts {
    std::string in, labels, vocab, merges, out;
    std::string family = "A";
    std::uint64_t seed = 0;
    std::size_t epochs = 4;
    std::size_t batch_size = 16;
    double lr = 1e-2;
    std::size_t dim = std::size_t{1} << 18;
    double warmup_ratio = 0.06;
};

void run_train(const TrainOpts& o) {
    const SubwordVocab vocab = SubwordVocab::load(o.vocab, o.merges);
    const ThreadSet ts = load_threads(o.in, true);
    LabelSpace ls;
    if (!o.labels.empty() && fs::exists(o.labels)) {
        ls = LabelSpace::load(o.labels);
    } else {
        ls = build_label_space(ts);
        if (!o.labels.empty()) ls.save(o.labels);
    }
    const FeatureConfig fc = FeatureConfig::for_family(family_from_name(o.family), o.dim);
    TrainConfig tc;
    tc.learning_rate = o.lr;
    tc.batch_size = o.batch_size;
    tc.epochs = o.epochs;
    tc.warmup_ratio = o.warmup_ratio;
    tc.seed = o.seed;
    const TrainResult result = train(ts, ls, vocab, fc, tc);
    result.params.save(o.out);
    std::cout << "family " << o.family << " seed " << o.seed << " losses:";
    for (double l : result.epoch_loss) std::cout << ' ' << format_fixed(l, 6);
    std::cout << "\nmodel -> " << o.out << "\n";
}

// ---------------------------------------------------------------------------
// predict

struct PredictOpts {
    std::string model, in, labels, vocab, merges, out;
    std::string split = "dev";
};

void run_predict(const PredictOpts& o) {
    const SubwordVocab vocab = SubwordVocab::load(o.vocab, o.merges);
    const ModelParams model = ModelParams::load(o.model);
    const LabelSpace ls = LabelSpace::load(o.labels);
    const ThreadSet ts = load_threads(o.in, false, split_from_name(o.split));
    const PredictionMatrix scores = predict_scores(model, ts, vocab, ls);
    write_scores_csv(o.out, scores);
    std::cout << "scores for " << scores.rows() << " threads -> " << o.out << "\n";
}

// ---------------------------------------------------------------------------
// ensemble

struct EnsembleOpts {
    std::string manifest, out = "submission.jsonl";
    double power = 1.8;
    std::string weights;   // comma list; empty -> manifest weights
    bool grid = false;
    std::string gold;      // labeled validation threads, required for --grid
    std::string priors;    // distribution csv for tie-breaking
};

struct LoadedEnsemble {
    std::vector<PredictionMatrix> family_means;
    std::vector<double> manifest_weights;
    LabelSpace labels;
};

LoadedEnsemble load_family_means(const std::string& manifest_path) {
    const RunManifest manifest = RunManifest::load(manifest_path);
    LoadedEnsemble out;
    for (const ManifestFamily& family : manifest.families) {
        std::vector<PredictionMatrix> runs;
        runs.reserve(family.run_paths.size());
        for (const std::string& path : family.run_paths) {
            runs.push_back(read_scores_csv(path));
        }
        out.family_means.push_back(average_runs(runs));
        out.manifest_weights.push_back(family.weight);
    }
    out.labels = LabelSpace::from_names(out.family_means.front().names);
    return out;
}

void run_ensemble(const EnsembleOpts& o) {
    LoadedEnsemble loaded = load_family_means(o.manifest);
    std::vector<std::size_t> prior(loaded.labels.size(), 0);
    if (!o.priors.empty()) prior = read_distribution_csv(o.priors, loaded.labels);

    EnsembleConfig cfg;
    cfg.power = o.power;
    cfg.weights = o.weights.empty() ? loaded.manifest_weights : parse_weights(o.weights);

    if (o.grid) {
        if (o.gold.empty()) throw ValidationError("--grid needs --gold <labeled threads>");
        const ThreadSet gold = load_threads(o.gold, true, Split::dev);
        const GridSearchResult best =
            grid_search(loaded.family_means, gold, loaded.labels, prior, default_power_grid(),
                        default_weight_grid(loaded.family_means.size()));
        cfg = best.config;
        std::cout << "grid best: power " << cfg.power << " weights";
        for (double w : cfg.weights) std::cout << ' ' << w;
        std::cout << " MR@6 " << format_fixed(best.score, 4) << "\n";
    }

    const PredictionMatrix fused = power_weighted_sum(loaded.family_means, cfg);
    const auto picks = top_k(fused, kRecallK, loaded.labels, prior);
    write_submission(o.out, fused.idx, picks);
    std::cout << "submission for " << fused.rows() << " threads -> " << o.out << "\n";
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateOpts {
    std::string pred, gold, per_thread;
};

void run_evaluate(const EvaluateOpts& o) {
    const auto preds = read_submission(o.pred);
    const ThreadSet gold = load_threads(o.gold, true, Split::dev);
    const EvalResult result = mean_recall_at_6(preds, gold);
    if (!o.per_thread.empty()) {
        std::ofstream f(o.per_thread, std::ios::binary);
        if (!f) throw ParseError("cannot write csv: " + o.per_thread);
        f << "idx,recall\n";
        for (std::size_t i = 0; i < gold.threads.size(); ++i) {
            f << gold.threads[i].idx << ',' << format_fixed(result.per_thread[i], 6) << '\n';
        }
    }
    std::cout << format_fixed(result.mean, 4) << "\n";
}

// ---------------------------------------------------------------------------
// pipeline

// Flat key = value file, '#' comments. Flags override file values.
struct PipelineConfig {
    std::map<std::string, std::string> kv;

    static PipelineConfig load(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw ParseError("cannot open config: " + path);
        PipelineConfig cfg;
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            const std::size_t hash = line.find('#');
            if (hash != std::string::npos) line.resize(hash);
            const std::size_t eq = line.find('=');
            if (eq == std::string::npos) {
                if (line.find_first_not_of(" \t") != std::string::npos) {
                    throw ParseError(path + ":" + std::to_string(lineno) +
                                     ": expected 'key = value'");
                }
                continue;
            }
            auto trim = [](std::string s) {
                const std::size_t a = s.find_first_not_of(" \t");
                if (a == std::string::npos) return std::string();
                const std::size_t b = s.find_last_not_of(" \t");
                return s.substr(a, b - a + 1);
            };
            const std::string key = trim(line.substr(0, eq));
            if (key.empty()) {
                throw ParseError(path + ":" + std::to_string(lineno) + ": empty key");
            }
            cfg.kv[key] = trim(line.substr(eq + 1));
        }
        return cfg;
    }

    const std::string& require(const std::string& key) const {
        auto it = kv.find(key);
        if (it == kv.end()) throw ValidationError("config is missing required key '" + key + "'");
        return it->second;
    }
    std::string get(const std::string& key, const std::string& fallback) const {
        auto it = kv.find(key);
        return it == kv.end() ? fallback : it->second;
    }
    double get_double(const std::string& key, double fallback) const {
        auto it = kv.find(key);
        return it == kv.end() ? fallback : std::stod(it->second);
    }
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const {
        auto it = kv.find(key);
        return it == kv.end() ? fallback : std::stoull(it->second);
    }
};

struct PipelineOpts {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
};

void run_pipeline(const PipelineOpts& o) {
    std::string config_path = o.config;
    if (config_path.empty()) {
        if (const char* env = std::getenv("GIFCAT_CONFIG")) config_path = env;
    }
    if (config_path.empty()) {
        throw ValidationError("no config: pass --config or set GIFCAT_CONFIG");
    }
    const PipelineConfig cfg = PipelineConfig::load(config_path);

    const std::uint64_t seed = o.seed ? *o.seed : cfg.get_u64("seed", 0);
    const fs::path out_dir = o.out_dir.empty() ? fs::path(cfg.require("out_dir"))
                                               : fs::path(o.out_dir);
    fs::create_directories(out_dir);
    fs::create_directories(out_dir / "models");
    fs::create_directories(out_dir / "scores");

    const RuleSet rules = RuleSet::load_dir(cfg.require("rules_dir"));
    const SubwordVocab vocab = SubwordVocab::load(cfg.require("vocab"), cfg.require("merges"));

    ThreadSet train_set = load_threads(cfg.require("train"), true, Split::train);
    ThreadSet val_set = load_threads(cfg.require("val"), false, Split::dev);

    NormalizationReport report = normalize_threads(train_set, rules);
    report += normalize_threads(val_set, rules);
    save_threads(train_set, (out_dir / "train_normalized.jsonl").string());
    save_threads(val_set, (out_dir / "val_normalized.jsonl").string());
    write_report_json((out_dir / "normalization_report.json").string(), report);

    const LabelSpace ls = build_label_space(train_set);
    ls.save((out_dir / "labels.txt").string());
    const std::vector<std::size_t> prior = category_distribution(train_set, ls);
    write_distribution_csv((out_dir / "distribution.csv").string(), ls, prior);

    const std::vector<std::string> family_names = split_csv_list(cfg.get("families", "A,B,C"));
    if (family_names.empty()) throw ValidationError("config lists no families");

    const std::size_t runs_per_family =
        static_cast<std::size_t>(cfg.get_u64("runs_per_family", 5));
    const std::size_t dim = static_cast<std::size_t>(
        cfg.get_u64("dim", std::uint64_t{1} << 18));

    TrainConfig tc;
    tc.learning_rate = cfg.get_double("lr", 1e-2);
    tc.batch_size = static_cast<std::size_t>(cfg.get_u64("batch_size", 16));
    tc.epochs = static_cast<std::size_t>(cfg.get_u64("epochs", 4));
    tc.warmup_ratio = cfg.get_double("warmup_ratio", 0.06);

    std::vector<PredictionMatrix> family_means;
    std::size_t run_index = 0;
    for (const std::string& family : family_names) {
        const FeatureConfig fc = FeatureConfig::for_family(family_from_name(family), dim);
        std::vector<PredictionMatrix> runs;
        for (std::size_t r = 0; r < runs_per_family; ++r, ++run_index) {
            tc.seed = seed + run_index;
            const TrainResult result = train(train_set, ls, vocab, fc, tc);
            const std::string tag = family + "_r" + std::to_string(r);
            result.params.save((out_dir / "models" / (tag + ".bin")).string());
            PredictionMatrix scores = predict_scores(result.params, val_set, vocab, ls);
            write_scores_csv((out_dir / "scores" / (tag + ".csv")).string(), scores);
            runs.push_back(std::move(scores));
        }
        PredictionMatrix mean = average_runs(runs);
        write_scores_csv((out_dir / "scores" / (family + "_mean.csv")).string(), mean);
        family_means.push_back(std::move(mean));
    }

    EnsembleConfig ens;
    ens.power = cfg.get_double("power", 1.8);
    const std::string weights_csv = cfg.get("weights", "");
    if (!weights_csv.empty()) {
        ens.weights = parse_weights(weights_csv);
    } else {
        ens.weights.assign(family_means.size(), 1.0);
    }

    if (cfg.get("grid", "false") == "true") {
        if (!val_set.labeled) {
            throw ValidationError("grid search needs a labeled validation file");
        }
        const GridSearchResult best =
            grid_search(family_means, val_set, ls, prior, default_power_grid(),
                        default_weight_grid(family_means.size()));
        ens = best.config;
        std::cout << "grid best: power " << ens.power << " weights";
        for (double w : ens.weights) std::cout << ' ' << w;
        std::cout << "\n";
    }

    const PredictionMatrix fused = power_weighted_sum(family_means, ens);
    const auto picks = top_k(fused, kRecallK, ls, prior);
    const std::string submission_path = (out_dir / "submission.jsonl").string();
    write_submission(submission_path, fused.idx, picks);
    std::cout << "submission -> " << submission_path << "\n";

    if (val_set.labeled) {
        const EvalResult result = mean_recall_at_6(picks, val_set);
        std::ofstream metrics((out_dir / "metrics.txt").string(), std::ios::binary);
        metrics << format_fixed(result.mean, 4) << "\n";
        std::cout << "MR@6 " << format_fixed(result.mean, 4) << "\n";
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"two-turn tweet reaction-category pipeline"};
    app.require_subcommand(1);

    PreprocessOpts pre;
    auto* cmd_pre = app.add_subcommand("preprocess", "normalize thread text and reply");
    cmd_pre->add_option("--in", pre.in, "thread file (JSON-lines or array)")->required();
    cmd_pre->add_option("--out", pre.out, "normalized JSON-lines output")->required();
    cmd_pre->add_option("--rules-dir", pre.rules_dir, "directory with the five rule TSVs")
        ->required();
    cmd_pre->add_option("--report", pre.report, "JSON report of per-step counts");
    cmd_pre->add_option("--split", pre.split, "train|dev|test");
    cmd_pre->add_flag("--labeled", pre.labeled, "require categories on every thread");

    CoverageOpts cov;
    auto* cmd_cov = app.add_subcommand("coverage", "subword coverage and OOV report");
    cmd_cov->add_option("--in", cov.in)->required();
    cmd_cov->add_option("--vocab", cov.vocab, "vocab JSON (token -> id)")->required();
    cmd_cov->add_option("--merges", cov.merges, "ranked merge rules")->required();
    cmd_cov->add_option("--field", cov.field, "text|reply");
    cmd_cov->add_option("--split", cov.split, "train|dev|test");
    cmd_cov->add_option("--out", cov.out, "coverage CSV");
    cmd_cov->add_option("--oov", cov.oov, "OOV CSV (word,count)");
    cmd_cov->add_option("--top", cov.top, "OOV entries to keep");
    cmd_cov->add_option("--steps", cov.steps, "apply the first K normalization steps first");
    cmd_cov->add_option("--rules-dir", cov.rules_dir, "rule TSVs (needed with --steps)");

    StatsOpts st;
    auto* cmd_st = app.add_subcommand("stats", "label space, distribution, co-occurrence");
    cmd_st->add_option("--in", st.in, "labeled thread file")->required();
    cmd_st->add_option("--labels", st.labels, "write the label-space sidecar here");
    cmd_st->add_option("--distribution", st.distribution, "category,count CSV");
    cmd_st->add_option("--cooccurrence", st.cooc, "square co-occurrence CSV");

    TrainOpts tr;
    auto* cmd_tr = app.add_subcommand("train", "train one classifier run");
    cmd_tr->add_option("--in", tr.in, "labeled thread file")->required();
    cmd_tr->add_option("--out", tr.out, "model file")->required();
    cmd_tr->add_option("--vocab", tr.vocab)->required();
    cmd_tr->add_option("--merges", tr.merges)->required();
    cmd_tr->add_option("--labels", tr.labels, "label sidecar (loaded if present, else written)");
    cmd_tr->add_option("--family", tr.family, "A|B|C");
    cmd_tr->add_option("--seed", tr.seed);
    cmd_tr->add_option("--epochs", tr.epochs);
    cmd_tr->add_option("--batch-size", tr.batch_size);
    cmd_tr->add_option("--lr", tr.lr);
    cmd_tr->add_option("--dim", tr.dim, "hashed feature dimension (power of two)");
    cmd_tr->add_option("--warmup-ratio", tr.warmup_ratio);

    PredictOpts pr;
    auto* cmd_pr = app.add_subcommand("predict", "score threads with a trained model");
    cmd_pr->add_option("--model", pr.model)->required();
    cmd_pr->add_option("--in", pr.in)->required();
    cmd_pr->add_option("--labels", pr.labels, "label sidecar")->required();
    cmd_pr->add_option("--vocab", pr.vocab)->required();
    cmd_pr->add_option("--merges", pr.merges)->required();
    cmd_pr->add_option("--out", pr.out, "scores CSV")->required();
    cmd_pr->add_option("--split", pr.split, "train|dev|test");

    EnsembleOpts en;
    auto* cmd_en = app.add_subcommand("ensemble", "combine prediction runs");
    cmd_en->add_option("--manifest", en.manifest, "run manifest JSON")->required();
    cmd_en->add_option("--out", en.out, "submission JSON-lines");
    cmd_en->add_option("--power", en.power, "exponent N");
    cmd_en->add_option("--weights", en.weights, "comma list, one per family");
    cmd_en->add_flag("--grid", en.grid, "search (N, weights) on a labeled set");
    cmd_en->add_option("--gold", en.gold, "labeled validation threads for --grid");
    cmd_en->add_option("--priors", en.priors, "distribution CSV for tie-breaking");

    EvaluateOpts ev;
    auto* cmd_ev = app.add_subcommand("evaluate", "mean recall at 6");
    cmd_ev->add_option("--pred", ev.pred, "submission JSON-lines")->required();
    cmd_ev->add_option("--gold", ev.gold, "labeled thread file")->required();
    cmd_ev->add_option("--per-thread", ev.per_thread, "per-thread recall CSV");

    PipelineOpts pi;
    auto* cmd_pi = app.add_subcommand(
        "pipeline", "preprocess, train per family, average, fuse, pick top 6, evaluate");
    cmd_pi->add_option("--config", pi.config, "key = value config file");
    std::uint64_t pipeline_seed = 0;
    auto* seed_opt = cmd_pi->add_option("--seed", pipeline_seed, "overrides the config seed");
    cmd_pi->add_option("--out-dir", pi.out_dir, "overrides the config out_dir");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (cmd_pre->parsed()) run_preprocess(pre);
        if (cmd_cov->parsed()) run_coverage(cov);
        if (cmd_st->parsed()) run_stats(st);
        if (cmd_tr->parsed()) run_train(tr);
        if (cmd_pr->parsed()) run_predict(pr);
        if (cmd_en->parsed()) run_ensemble(en);
        if (cmd_ev->parsed()) run_evaluate(ev);
        if (cmd_pi->parsed()) {
            if (seed_opt->count() > 0) pi.seed = pipeline_seed;
            run_pipeline(pi);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
