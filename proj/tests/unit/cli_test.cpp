#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "gifcat/prediction.hpp"
#include "gifcat/threads.hpp"
#include "support/tempdir.hpp"

using namespace gifcat;

namespace {

// Runs the CLI binary; returns its exit code and captures stdout into a file.
int run_cli(const std::string& args, const std::string& stdout_path = "/dev/null") {
    const std::string cmd =
        std::string(GIFCAT_CLI_PATH) + " " + args + " > " + stdout_path + " 2>/dev/null";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

} // namespace

TEST_CASE("evaluate prints the mean with four places and exits 0") {
    testsup::TempDir dir;
    ThreadSet gold;
    gold.labeled = true;
    gold.threads = {{"t1", "", "", std::vector<std::string>{"agree"}, {}},
                    {"t2", "", "", std::vector<std::string>{"hug", "omg"}, {}}};
    save_threads(gold, dir.file("gold.jsonl"));
    std::unordered_map<std::string, std::vector<std::string>> preds;
    preds["t1"] = {"agree", "b", "c", "d", "e", "f"};
    preds["t2"] = {"hug", "omg", "c", "d", "e", "f"};
    write_submission(dir.file("pred.jsonl"), {"t1", "t2"}, preds);

    const int code = run_cli("evaluate --pred " + dir.file("pred.jsonl") + " --gold " +
                                 dir.file("gold.jsonl"),
                             dir.file("stdout.txt"));
    CHECK(code == 0);
    CHECK(slurp(dir.file("stdout.txt")) == "1.0000\n");
}

TEST_CASE("evaluate exits 1 on an idx mismatch") {
    testsup::TempDir dir;
    ThreadSet gold;
    gold.labeled = true;
    gold.threads = {{"t1", "", "", std::vector<std::string>{"agree"}, {}}};
    save_threads(gold, dir.file("gold.jsonl"));
    std::unordered_map<std::string, std::vector<std::string>> preds;
    preds["other"] = {"agree", "b", "c", "d", "e", "f"};
    write_submission(dir.file("pred.jsonl"), {"other"}, preds);
    CHECK(run_cli("evaluate --pred " + dir.file("pred.jsonl") + " --gold " +
                  dir.file("gold.jsonl")) == 1);
}

TEST_CASE("usage problems exit 2") {
    CHECK(run_cli("no-such-subcommand") == 2);
    CHECK(run_cli("evaluate --bogus-flag x") == 2);
    CHECK(run_cli("") == 2);  // a subcommand is required
}

TEST_CASE("ensemble emits exactly six categories per idx") {
    testsup::TempDir dir;
    // three single-run families over eight categories
    const std::vector<std::string> names = {"agree", "awww", "hug",       "no",
                                            "omg",   "oops", "thank_you", "yes"};
    for (int f = 0; f < 3; ++f) {
        PredictionMatrix m;
        m.names = names;
        for (int t = 0; t < 4; ++t) m.idx.push_back("t" + std::to_string(t));
        for (std::size_t i = 0; i < m.idx.size() * names.size(); ++i) {
            m.scores.push_back(((i * 37 + static_cast<std::size_t>(f) * 11) % 100) / 100.0);
        }
        write_scores_csv(dir.file("f" + std::to_string(f) + ".csv"), m);
    }
    {
        std::ofstream manifest(dir.file("manifest.json"));
        manifest << R"({"families":[
            {"name":"A","runs":["f0.csv"]},
            {"name":"B","runs":["f1.csv"]},
            {"name":"C","runs":["f2.csv"]}]})";
    }
    const int code = run_cli("ensemble --manifest " + dir.file("manifest.json") +
                             " --power 1.8 --weights 3.0,1.8,0.8 --out " +
                             dir.file("sub.jsonl"));
    CHECK(code == 0);
    const auto sub = read_submission(dir.file("sub.jsonl"));
    CHECK(sub.size() == 4);
    for (const auto& [idx, cats] : sub) {
        CHECK(cats.size() == 6);
        CHECK(std::set<std::string>(cats.begin(), cats.end()).size() == 6);
    }
}
