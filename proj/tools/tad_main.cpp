/*
    Licensed under the Apache License, Version 2.0 (the "License");
    you may not use this file except in compliance with the License.
    You may obtain a copy of the License at

        https://www.apache.org/licenses/LICENSE-2.0

    Unless required by applicable law or agreed to in writing, software
    distributed under the License is distributed on an "AS IS" BASIS,
    WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
    See the License for the specific language governing permissions and
    limitations under the License.
*/

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tad/pipeline.hpp"
#include "tad/refilter.hpp"

namespace {

using nlohmann::json;
using namespace tad;

struct Globals {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> config;
    std::optional<std::string> store;
};

PipelineConfig make_config(const Globals& g) {
    json j = json::object();
    fs::path base;
    if (g.config) {
        const fs::path p(*g.config);
        if (!fs::exists(p)) throw ConfigError("config file not found: " + p.string());
        try {
            j = json::parse(read_file(p));
        } catch (const json::parse_error& e) {
            throw ConfigError("config " + p.string() + ": " + e.what());
        }
        base = p.parent_path();
    }
    if (g.seed) j["seed"] = *g.seed;
    return PipelineConfig::from_json(j, base);
}

void print(const json& j) { std::cout << j.dump(2, ' ', false, json::error_handler_t::replace) << "\n"; }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"tad: drift-aware, time-aware dataset toolkit"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--seed", g.seed, "root seed (default 20200125)");
    app.add_option("--config", g.config, "pipeline config JSON");
    app.add_option("--store", g.store, "store root (default $TAD_STORE)");

    auto* ingest = app.add_subcommand("ingest", "parse and filter a JSONL stream into the store");
    std::string input;
    bool lenient = false;
    ingest->add_option("input", input, "JSONL file")->required();
    ingest->add_flag("--lenient", lenient, "quarantine malformed JSON lines instead of failing");

    auto* refilter_cmd = app.add_subcommand("refilter", "reapply a newer filter config to every window");
    std::string filter_path;
    refilter_cmd->add_option("--filter", filter_path, "filter config JSON")->required();

    auto* window = app.add_subcommand("window", "partition the store into windows");
    std::string mode = "fixed";
    std::optional<double> threshold;
    window->add_option("mode", mode, "fixed | adaptive")->check(CLI::IsMember({"fixed", "adaptive"}));
    window->add_option("--threshold", threshold, "adaptive overlap threshold");

    auto* extend = app.add_subcommand("extend", "fit the density model and extend a window");
    std::vector<std::string> extend_windows;
    bool extend_all = false;
    extend->add_option("--window", extend_windows, "window id (repeatable)");
    extend->add_flag("--all", extend_all, "every window in the store");

    auto* oracle = app.add_subcommand("oracle", "oracle candidate selection and annotation");
    oracle->require_subcommand(1);
    std::string oracle_window;
    auto* o_export = oracle->add_subcommand("export", "select candidates and write the annotation batch");
    o_export->add_option("--window", oracle_window)->required();
    auto* o_import = oracle->add_subcommand("import", "import annotation CSVs");
    std::vector<std::string> annotation_files;
    o_import->add_option("--window", oracle_window)->required();
    o_import->add_option("files", annotation_files, "annotation CSV files")->required();
    auto* o_resolve = oracle->add_subcommand("resolve", "full-agreement filter and balanced cut");
    std::optional<std::size_t> target;
    bool balance = false, no_balance = false;
    o_resolve->add_option("--window", oracle_window)->required();
    o_resolve->add_option("--target", target, "oracle size");
    o_resolve->add_flag("--balance", balance, "balance classes");
    o_resolve->add_flag("--no-balance", no_balance, "plain seeded cut");

    auto* label = app.add_subcommand("label", "aggregate expert votes for a window");
    std::string label_window, method;
    std::vector<std::string> vote_files;
    label->add_option("--window", label_window)->required();
    label->add_option("--method", method, "majority | weighted | em")->check(CLI::IsMember({"majority", "weighted", "em"}));
    label->add_option("--votes", vote_files, "long-form expert vote CSV (repeatable)");

    auto* simulate = app.add_subcommand("simulate", "generate a synthetic drifting stream");
    std::string sim_out = ".";
    std::optional<int> sim_windows, sim_samples;
    std::optional<double> sim_rho;
    simulate->add_option("--out", sim_out, "output directory");
    simulate->add_option("--windows", sim_windows);
    simulate->add_option("--samples", sim_samples, "records per window");
    simulate->add_option("--novel-fraction", sim_rho);

    auto* evaluate = app.add_subcommand("evaluate", "update schemes on a synthetic stream, or cross-corpus");
    std::vector<std::string> schemes, corpus_args;
    std::optional<std::string> eval_out, classifier;
    evaluate->add_option("--scheme", schemes, "static | slow | fast | ceiling (repeatable)");
    evaluate->add_option("--corpus", corpus_args, "name=dir with train.jsonl and test.jsonl (repeatable)");
    evaluate->add_option("--classifier", classifier, "centroid | centroid+social | centroid+social+lf");
    evaluate->add_option("--out", eval_out, "output directory (default <store>/reports, else .)");

    auto* report = app.add_subcommand("report", "collate window reports into CSVs");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        PipelineConfig cfg = make_config(g);
        auto open_store = [&] { return WindowStore::open(resolve_store_root(g.store)); };

        if (ingest->parsed()) {
            const fs::path root = resolve_store_root(g.store);
            WindowStore store = WindowStore::create(root, cfg.filter());
            print(run_ingest(store, input, lenient));
        } else if (refilter_cmd->parsed()) {
            WindowStore store = open_store();
            json out = refilter(store, FilterConfig::load(filter_path)).to_json();
            out["command"] = "refilter";
            print(out);
        } else if (window->parsed()) {
            WindowStore store = open_store();
            if (threshold) {
                cfg.window.overlap_threshold = *threshold;
                cfg.window.validate();
            }
            print(run_window(store, cfg, mode == "fixed" ? WindowSpec::Mode::fixed : WindowSpec::Mode::adaptive));
        } else if (extend->parsed()) {
            WindowStore store = open_store();
            if (extend_all) {
                for (const auto& w : store.windows()) extend_windows.push_back(w.window_id);
            }
            if (extend_windows.empty()) throw ConfigError("extend needs --window or --all");
            json out = json::array();
            for (const auto& id : extend_windows) out.push_back(run_extend(store, cfg, id));
            print(out.size() == 1 ? out[0] : json{{"command", "extend"}, {"windows", out}});
        } else if (o_export->parsed()) {
            WindowStore store = open_store();
            print(run_oracle_export(store, cfg, oracle_window));
        } else if (o_import->parsed()) {
            WindowStore store = open_store();
            std::vector<fs::path> files(annotation_files.begin(), annotation_files.end());
            print(run_oracle_import(store, oracle_window, files));
        } else if (o_resolve->parsed()) {
            WindowStore store = open_store();
            if (target) cfg.oracle_target = *target;
            if (balance && no_balance) throw ConfigError("--balance and --no-balance are exclusive");
            if (balance) cfg.oracle_balance = true;
            if (no_balance) cfg.oracle_balance = false;
            print(run_oracle_resolve(store, cfg, oracle_window));
        } else if (label->parsed()) {
            WindowStore store = open_store();
            std::vector<fs::path> files(vote_files.begin(), vote_files.end());
            print(run_label(store, cfg, label_window, method.empty() ? cfg.aggregation : method, files));
        } else if (simulate->parsed()) {
            if (sim_windows) cfg.drift.windows = *sim_windows;
            if (sim_samples) cfg.drift.samples = *sim_samples;
            if (sim_rho) cfg.drift.novel_fraction = *sim_rho;
            cfg.drift.validate();
            print(run_simulate(cfg, sim_out));
        } else if (evaluate->parsed()) {
            if (classifier) cfg.classifier = parse_classifier_kind(*classifier);
            fs::path out = ".";
            if (eval_out) out = *eval_out;
            else if (g.store || std::getenv("TAD_STORE")) out = resolve_store_root(g.store) / "reports";
            if (!corpus_args.empty()) {
                std::vector<std::pair<std::string, fs::path>> corpora;
                for (const auto& a : corpus_args) {
                    const auto eq = a.find('=');
                    if (eq == std::string::npos || eq == 0) throw ConfigError("--corpus expects name=dir, got '" + a + "'");
                    corpora.emplace_back(a.substr(0, eq), a.substr(eq + 1));
                }
                print(run_evaluate_corpora(cfg, corpora, out));
            } else {
                if (!schemes.empty()) {
                    for (const auto& s : schemes) UpdateScheme::parse(s);
                    cfg.schemes = schemes;
                }
                print(run_evaluate_schemes(cfg, out));
            }
        } else if (report->parsed()) {
            WindowStore store = open_store();
            print(run_report(store));
        }
    } catch (const tad::Error& e) {
        std::cerr << "tad: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "tad: internal error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
