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

#include "tad/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "tad/csv.hpp"
#include "tad/density.hpp"
#include "tad/sampling.hpp"

namespace tad {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Config

namespace {

const std::set<std::string> kTopKeys = {"seed",     "filter",     "lexicons", "window",     "embedder",
                                        "semantic_mask", "sampling", "aggregation", "drift", "evaluation"};

fs::path resolve(const fs::path& base, const std::string& p) {
    fs::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be an object");
    for (const auto& [k, v] : j.items()) {
        if (!allowed.count(k)) throw ConfigError("unknown key '" + k + "' in " + where);
    }
}

std::string mode_name(WindowSpec::Mode m) { return m == WindowSpec::Mode::fixed ? "fixed" : "adaptive"; }

}  // namespace

PipelineConfig PipelineConfig::from_json(const json& j, const fs::path& base_dir) {
    PipelineConfig c;
    check_keys(j, kTopKeys, "config");
    try {
        c.seed = j.value("seed", c.seed);
        if (j.contains("filter") && !j["filter"].is_null()) c.filter_path = resolve(base_dir, j["filter"].get<std::string>());
        if (j.contains("lexicons") && !j["lexicons"].is_null()) c.lexicon_dir = resolve(base_dir, j["lexicons"].get<std::string>());
        if (j.contains("window")) {
            const json& w = j["window"];
            check_keys(w, {"mode", "overlap_threshold", "min_fit_samples", "k_grid"}, "window");
            const std::string mode = w.value("mode", std::string("fixed"));
            if (mode == "fixed") c.window.mode = WindowSpec::Mode::fixed;
            else if (mode == "adaptive") c.window.mode = WindowSpec::Mode::adaptive;
            else throw ConfigError("unknown window mode '" + mode + "'");
            c.window.overlap_threshold = w.value("overlap_threshold", c.window.overlap_threshold);
            c.window.min_fit_samples = w.value("min_fit_samples", c.window.min_fit_samples);
            c.window.k_grid = w.value("k_grid", c.window.k_grid);
        }
        if (j.contains("embedder")) c.embedder = EmbedderDescriptor::from_json(j["embedder"]);
        c.semantic_mask = j.value("semantic_mask", c.semantic_mask);
        if (j.contains("sampling")) {
            const json& s = j["sampling"];
            check_keys(s, {"candidate_count", "target", "balance", "annotators"}, "sampling");
            c.candidate_count = s.value("candidate_count", c.candidate_count);
            c.oracle_target = s.value("target", c.oracle_target);
            c.oracle_balance = s.value("balance", c.oracle_balance);
            c.annotators = s.value("annotators", c.annotators);
        }
        c.aggregation = j.value("aggregation", c.aggregation);
        if (j.contains("drift")) c.drift = DriftStreamConfig::from_json(j["drift"]);
        if (j.contains("evaluation")) {
            const json& e = j["evaluation"];
            check_keys(e, {"schemes", "classifier", "similarity_groups"}, "evaluation");
            c.schemes = e.value("schemes", c.schemes);
            if (e.contains("classifier")) c.classifier = parse_classifier_kind(e["classifier"].get<std::string>());
            c.similarity_groups = e.value("similarity_groups", c.similarity_groups);
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    c.window.seed = c.seed_for("window");
    c.drift.seed = c.seed;
    c.validate();
    return c;
}

PipelineConfig PipelineConfig::load(const fs::path& path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw ConfigError("config " + path.string() + ": " + e.what());
    } catch (const IoError&) {
        throw ConfigError("config file not found: " + path.string());
    }
    return from_json(j, path.parent_path());
}

json PipelineConfig::to_json() const {
    return {{"seed", seed},
            {"filter", filter_path ? json(filter_path->string()) : json(nullptr)},
            {"lexicons", lexicon_dir ? json(lexicon_dir->string()) : json(nullptr)},
            {"window",
             {{"mode", mode_name(window.mode)},
              {"overlap_threshold", window.overlap_threshold},
              {"min_fit_samples", window.min_fit_samples},
              {"k_grid", window.k_grid}}},
            {"embedder", embedder.to_json()},
            {"semantic_mask", semantic_mask},
            {"sampling",
             {{"candidate_count", candidate_count},
              {"target", oracle_target},
              {"balance", oracle_balance},
              {"annotators", annotators}}},
            {"aggregation", aggregation},
            {"drift", drift.to_json()},
            {"evaluation",
             {{"schemes", schemes}, {"classifier", to_string(classifier)}, {"similarity_groups", similarity_groups}}}};
}

std::string PipelineConfig::hash() const { return hex64(hash64(to_json().dump(), 0)); }

void PipelineConfig::validate() const {
    window.validate();
    drift.validate();
    if (filter_path && !fs::exists(*filter_path)) throw ConfigError("filter file not found: " + filter_path->string());
    if (lexicon_dir) {
        for (const char* f : {"swear.txt", "second_person.txt", "adverbs.txt", "sentiment.tsv"}) {
            if (!fs::exists(*lexicon_dir / f)) throw ConfigError("lexicon file not found: " + (*lexicon_dir / f).string());
        }
    }
    if (window.k_grid.empty() || !std::is_sorted(window.k_grid.begin(), window.k_grid.end()) || window.k_grid.front() < 1) {
        throw ConfigError("k_grid must be non-empty, ascending and positive");
    }
    if (candidate_count == 0) throw ConfigError("candidate_count must be positive");
    if (annotators == 0) throw ConfigError("annotators must be positive");
    if (aggregation != "majority" && aggregation != "weighted" && aggregation != "em") {
        throw ConfigError("aggregation must be majority, weighted or em");
    }
    for (const auto& s : schemes) UpdateScheme::parse(s);
}

FilterConfig PipelineConfig::filter() const { return filter_path ? FilterConfig::load(*filter_path) : FilterConfig::builtin(); }

Lexicons PipelineConfig::lexicons() const {
    if (!lexicon_dir) return Lexicons::builtin();
    const fs::path& d = *lexicon_dir;
    return Lexicons::parse(read_file(d / "swear.txt"), read_file(d / "second_person.txt"), read_file(d / "adverbs.txt"),
                           read_file(d / "sentiment.tsv"));
}

EmbedderDescriptor pipeline_embedder(const PipelineConfig& cfg, const FilterConfig& filter, bool masked) {
    EmbedderDescriptor d = cfg.embedder;
    if (masked && cfg.semantic_mask) {
        d.mask = MaskPolicy::from_filter(filter);
        d.mask.enabled = true;
    } else {
        d.mask = MaskPolicy{};
    }
    return d;
}

// ---------------------------------------------------------------------------
// Store steps

namespace {

std::unordered_set<std::string> as_set(const std::vector<std::string>& v) { return {v.begin(), v.end()}; }

json window_summary(const Window& w) {
    return {{"window_id", w.window_id},
            {"start", format_rfc3339(w.start)},
            {"end", format_rfc3339(w.end)},
            {"filtered", w.filtered_ids.size()},
            {"unfiltered", w.unfiltered_ids.size()},
            {"extended", w.extended_ids.size()}};
}

CenterMatrix rows_of(const PointMatrix& all, const std::vector<std::size_t>& rows) {
    CenterMatrix out(static_cast<Eigen::Index>(rows.size()), all.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = all.row(static_cast<Eigen::Index>(rows[i])).cast<double>();
    return out;
}

struct Extension {
    ClusterModel model;
    std::vector<std::string> extended;
};

Extension extend_with(const PointMatrix& emb, const std::vector<std::size_t>& f_rows, const std::vector<std::size_t>& u_rows,
                      const std::vector<std::string>& u_ids, const std::vector<int>& grid, std::uint64_t seed) {
    Extension e;
    e.model = fit_density(rows_of(emb, f_rows), grid, seed);
    e.extended = extend_window(e.model, rows_of(emb, u_rows), u_ids);
    return e;
}

ClusterModel load_model(const WindowStore& store, const std::string& id) {
    const fs::path p = store.window_dir(id) / "model.json";
    if (!fs::exists(p)) throw StoreError("window " + id + " has no model; run extend first");
    return ClusterModel::from_json(json::parse(read_file(p)));
}

PointMatrix load_vectors(const WindowStore& store, const std::string& id, std::size_t expect_rows) {
    const fs::path p = store.window_dir(id) / "vectors.bin";
    if (!fs::exists(p)) throw StoreError("window " + id + " has no vectors; run extend first");
    std::ifstream in(p, std::ios::binary);
    PointMatrix v = read_vectors(in);
    if (static_cast<std::size_t>(v.rows()) != expect_rows) throw StoreError("window " + id + ": vectors.bin row count disagrees with records");
    return v;
}

OracleSelection load_selection(const WindowStore& store, const std::string& id) {
    const fs::path p = store.window_dir(id) / "oracle" / "selection.json";
    if (!fs::exists(p)) throw StoreError("window " + id + " has no oracle selection; run oracle export first");
    return OracleSelection::from_json(json::parse(read_file(p)));
}

std::vector<AnnotationRecord> load_annotations(const WindowStore& store, const std::string& id) {
    const fs::path p = store.window_dir(id) / "oracle" / "annotations.jsonl";
    std::vector<AnnotationRecord> out;
    if (!fs::exists(p)) return out;
    std::istringstream in(read_file(p));
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) out.push_back(annotation_from_json(json::parse(line)));
    }
    return out;
}

}  // namespace

json run_ingest(WindowStore& store, const fs::path& input, bool lenient) {
    if (!fs::exists(input)) throw IoError("input not found: " + input.string());
    ReadResult rr = read_records_file(input, lenient);

    std::vector<DocumentRecord> all = store.records();
    std::unordered_map<std::string, std::size_t> pos;
    for (std::size_t i = 0; i < all.size(); ++i) pos.emplace(all[i].id, i);

    std::size_t added = 0, duplicates = 0;
    std::vector<RejectedLine> rejects = rr.rejects;
    // Line numbers are lost after parsing; recover them for duplicate rejects.
    std::vector<std::size_t> line_of;
    {
        std::ifstream in(input);
        std::string line;
        std::size_t no = 0;
        while (std::getline(in, line)) {
            ++no;
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            if (std::any_of(rr.rejects.begin(), rr.rejects.end(), [&](const auto& r) { return r.line_no == no; })) continue;
            try {
                parse_record(line, no);
                line_of.push_back(no);
            } catch (const Error&) {
            }
        }
    }
    for (std::size_t i = 0; i < rr.records.size(); ++i) {
        DocumentRecord& r = rr.records[i];
        auto it = pos.find(r.id);
        if (it == pos.end()) {
            pos.emplace(r.id, all.size());
            all.push_back(std::move(r));
            ++added;
        } else if (all[it->second] == r) {
            ++duplicates;
        } else {
            const std::size_t no = i < line_of.size() ? line_of[i] : 0;
            rejects.push_back({no, "duplicate id '" + r.id + "' with different content", to_jsonl(r)});
        }
    }
    store.write_records(all);
    store.append_rejects(rejects);

    // Records already filtered stay filtered even if the config narrowed.
    const FilterPartition fresh = filter_stream(all, store.filter());
    const auto before = as_set(store.partition().filtered);
    const auto hit = as_set(fresh.filtered);
    FilterPartition part;
    for (const auto& r : all) (hit.count(r.id) || before.count(r.id) ? part.filtered : part.unfiltered).push_back(r.id);
    store.write_partition(part);

    return {{"command", "ingest"},
            {"input", input.string()},
            {"added", added},
            {"duplicates", duplicates},
            {"rejected", rejects.size()},
            {"total", all.size()},
            {"filtered", part.filtered.size()},
            {"unfiltered", part.unfiltered.size()},
            {"config_version", store.filter().version}};
}

json run_window(WindowStore& store, const PipelineConfig& cfg, WindowSpec::Mode mode) {
    const std::vector<DocumentRecord> records = store.records();
    if (records.empty()) throw StoreError("store has no records; run ingest first");
    const auto filtered = as_set(store.partition().filtered);
    json out = {{"command", "window"}, {"mode", mode_name(mode)}};
    std::vector<Window> windows;
    if (mode == WindowSpec::Mode::fixed) {
        windows = assign_fixed_windows(records, filtered);
    } else {
        WindowSpec spec = cfg.window;
        spec.mode = mode;
        const auto embedder = make_embedder(pipeline_embedder(cfg, store.filter(), true));
        AdaptiveResult res = detect_adaptive_windows(records, filtered, spec, *embedder);
        json days = json::array();
        for (const auto& d : res.days) {
            days.push_back({{"day", format_rfc3339(d.day)},
                            {"samples", d.samples},
                            {"overlap", d.overlap ? json(*d.overlap) : json(nullptr)},
                            {"boundary", d.boundary}});
        }
        out["days"] = days;
        out["overlap_threshold"] = spec.overlap_threshold;
        windows = std::move(res.windows);
    }
    store.replace_windows(windows, records);
    json list = json::array();
    for (const auto& entry : store.windows()) list.push_back(window_summary(store.manifest(entry.window_id).window));
    out["windows"] = list;
    return out;
}

json run_extend(WindowStore& store, const PipelineConfig& cfg, const std::string& id) {
    WindowManifest m = store.manifest(id);
    const std::vector<DocumentRecord> records = store.window_records(id);
    std::vector<std::string> texts;
    std::unordered_map<std::string, std::size_t> row;
    for (std::size_t i = 0; i < records.size(); ++i) {
        texts.push_back(records[i].text);
        row.emplace(records[i].id, i);
    }
    std::vector<std::size_t> f_rows, u_rows;
    for (const auto& fid : m.window.filtered_ids) f_rows.push_back(row.at(fid));
    for (const auto& uid : m.window.unfiltered_ids) u_rows.push_back(row.at(uid));
    if (f_rows.empty()) throw EmptyWindow("window " + id + " has no filtered records");

    const std::uint64_t seed = cfg.seed_for("density:" + id);
    const EmbedderDescriptor masked = pipeline_embedder(cfg, store.filter(), true);
    const EmbedderDescriptor plain = pipeline_embedder(cfg, store.filter(), false);
    const PointMatrix emb = make_embedder(masked)->embed(texts);
    Extension ext = extend_with(emb, f_rows, u_rows, m.window.unfiltered_ids, cfg.window.k_grid, seed);
    std::size_t baseline = ext.extended.size();
    if (!(masked == plain)) {
        const PointMatrix emb0 = make_embedder(plain)->embed(texts);
        baseline = extend_with(emb0, f_rows, u_rows, m.window.unfiltered_ids, cfg.window.k_grid, seed).extended.size();
    }
    DensityReport report = extension_metrics(id, f_rows.size(), ext.extended.size(), baseline);
    report.k = ext.model.k;

    const fs::path dir = store.window_dir(id);
    const std::string model_text = json_text(ext.model.to_json());
    atomic_write(dir / "vectors.bin", serialize_vectors(emb));
    atomic_write(dir / "model.json", model_text);
    std::string tsv = "record_id\tcluster\n";
    for (std::size_t i = 0; i < m.window.filtered_ids.size(); ++i) {
        tsv += m.window.filtered_ids[i] + "\t" + std::to_string(ext.model.assignments[i]) + "\n";
    }
    atomic_write(dir / "assignments.tsv", tsv);
    json rj = report.to_json();
    rj["config_hash"] = cfg.hash();
    atomic_write(dir / "reports" / "density.json", json_text(rj));

    m.window.extended_ids = ext.extended;
    m.window.model_ref = "model.json@" + hex64(hash64(model_text, 0));
    m.embedder = masked;
    m.config_version = store.filter().version;
    store.write_manifest(m);

    json out = report.to_json();
    out["command"] = "extend";
    out["model_ref"] = *m.window.model_ref;
    out["inertia_sweep"] = ext.model.to_json()["inertia_sweep"];
    return out;
}

json run_oracle_export(WindowStore& store, const PipelineConfig& cfg, const std::string& id) {
    const WindowManifest m = store.manifest(id);
    const std::vector<DocumentRecord> records = store.window_records(id);
    const PointMatrix vectors = load_vectors(store, id, records.size());
    const ClusterModel model = load_model(store, id);

    std::unordered_map<std::string, std::size_t> row;
    std::unordered_map<std::string, const DocumentRecord*> by_id;
    for (std::size_t i = 0; i < records.size(); ++i) {
        row.emplace(records[i].id, i);
        by_id.emplace(records[i].id, &records[i]);
    }
    // Pool: filtered plus extended, in window order.
    const auto in_pool = [&](const std::string& rid) {
        return std::find(m.window.filtered_ids.begin(), m.window.filtered_ids.end(), rid) != m.window.filtered_ids.end() ||
               std::binary_search(m.window.extended_ids.begin(), m.window.extended_ids.end(), rid);
    };
    std::vector<std::string> ids;
    std::vector<std::size_t> rows;
    for (const auto& r : records) {
        if (in_pool(r.id)) {
            ids.push_back(r.id);
            rows.push_back(row.at(r.id));
        }
    }
    const OracleSelection sel = select_representatives(id, ids, rows_of(vectors, rows), model, cfg.candidate_count,
                                                       cfg.seed_for("oracle:" + id));
    const fs::path dir = store.window_dir(id) / "oracle";
    atomic_write(dir / "selection.json", json_text(sel.to_json()));
    atomic_write(dir / "annotation_batch.csv", export_annotation_batch(sel, by_id));
    return {{"command", "oracle export"},
            {"window_id", id},
            {"pool", ids.size()},
            {"requested", sel.requested},
            {"selected", sel.candidate_ids.size()},
            {"short_window", sel.short_window},
            {"clusters", sel.bin_plan.size()},
            {"batch", (dir / "annotation_batch.csv").string()}};
}

json run_oracle_import(WindowStore& store, const std::string& id, const std::vector<fs::path>& files) {
    const OracleSelection sel = load_selection(store, id);
    std::vector<std::string> texts;
    for (const auto& f : files) texts.push_back(read_file(f));
    const std::vector<AnnotationRecord> incoming = import_annotations(texts);

    const std::unordered_set<std::string> candidates(sel.candidate_ids.begin(), sel.candidate_ids.end());
    for (const auto& a : incoming) {
        if (!candidates.count(a.record_id)) throw StoreError("annotation for " + a.record_id + " which is not an oracle candidate");
    }

    // Merge with earlier imports under the same latest-wins rule.
    std::map<std::pair<std::string, std::string>, AnnotationRecord> merged;
    const std::vector<AnnotationRecord> existing = load_annotations(store, id);
    for (const auto* batch : {&existing, &incoming}) {
        for (const auto& a : *batch) {
            auto key = std::make_pair(a.record_id, a.annotator_id);
            auto it = merged.find(key);
            if (it == merged.end() || a.annotated_at > it->second.annotated_at) {
                merged[key] = a;
            } else if (a.annotated_at == it->second.annotated_at && a.label != it->second.label) {
                throw ConflictError("annotator " + a.annotator_id + " gave two labels for " + a.record_id + " at " +
                                    format_rfc3339(a.annotated_at));
            }
        }
    }
    std::string text;
    std::set<std::string> annotated;
    for (const auto& [key, a] : merged) {
        text += to_json(a).dump() + "\n";
        annotated.insert(a.record_id);
    }
    atomic_write(store.window_dir(id) / "oracle" / "annotations.jsonl", text);
    return {{"command", "oracle import"},
            {"window_id", id},
            {"imported", incoming.size()},
            {"annotations", merged.size()},
            {"annotated_records", annotated.size()}};
}

json run_oracle_resolve(WindowStore& store, const PipelineConfig& cfg, const std::string& id) {
    load_selection(store, id);
    const std::vector<AnnotationRecord> annotations = load_annotations(store, id);
    if (annotations.empty()) throw StoreError("window " + id + " has no annotations; run oracle import first");
    const AgreementReport rep = resolve_agreement(annotations, cfg.oracle_target, cfg.oracle_balance,
                                                  cfg.seed_for("agreement:" + id), cfg.annotators);
    const json j = rep.to_json();
    atomic_write(store.window_dir(id) / "oracle" / "agreement.json", json_text(j));
    json out = j;
    out["command"] = "oracle resolve";
    out["window_id"] = id;
    out.erase("labels");
    out["accepted"] = rep.accepted_ids.size();
    out["final"] = rep.final_oracle_ids.size();
    return out;
}

json run_label(WindowStore& store, const PipelineConfig& cfg, const std::string& id, const std::string& method,
               const std::vector<fs::path>& vote_files) {
    const WindowManifest m = store.manifest(id);
    const std::vector<DocumentRecord> records = store.window_records(id);
    const auto pool = as_set(m.window.filtered_ids);
    const auto extended = as_set(m.window.extended_ids);

    ExpertLabelMatrix mat;
    std::vector<const DocumentRecord*> rows;
    for (const auto& r : records) {
        if (pool.count(r.id) || extended.count(r.id)) {
            mat.record_ids.push_back(r.id);
            rows.push_back(&r);
        }
    }
    if (rows.empty()) throw EmptyWindow("window " + id + " has nothing to label");
    mat.expert_ids = kLexiconExpertIds;

    std::vector<ExpertLabelMatrix> external;
    for (const auto& f : vote_files) external.push_back(ExpertLabelMatrix::from_csv(read_file(f)));
    for (const auto& e : external) {
        for (const auto& x : e.expert_ids) {
            if (std::find(mat.expert_ids.begin(), mat.expert_ids.end(), x) == mat.expert_ids.end()) {
                mat.expert_ids.push_back(x);
            }
        }
    }
    mat.votes = VoteMatrix::Zero(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(mat.expert_ids.size()));
    const Lexicons lex = cfg.lexicons();
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const LexiconVotes lv = lexicon_experts(rows[i]->text, lex);
        const auto r = static_cast<Eigen::Index>(i);
        mat.votes(r, 0) = lv.swear;
        mat.votes(r, 1) = lv.second_person;
        mat.votes(r, 2) = lv.adverb;
    }
    std::unordered_map<std::string, Eigen::Index> rec_row, exp_col;
    for (std::size_t i = 0; i < mat.record_ids.size(); ++i) rec_row[mat.record_ids[i]] = static_cast<Eigen::Index>(i);
    for (std::size_t i = 0; i < mat.expert_ids.size(); ++i) exp_col[mat.expert_ids[i]] = static_cast<Eigen::Index>(i);
    std::size_t ignored = 0;
    for (const auto& e : external) {
        for (std::size_t r = 0; r < e.record_ids.size(); ++r) {
            auto it = rec_row.find(e.record_ids[r]);
            if (it == rec_row.end()) {
                ++ignored;
                continue;
            }
            for (std::size_t c = 0; c < e.expert_ids.size(); ++c) {
                const auto v = e.votes(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
                if (v != kAbstain) mat.votes(it->second, exp_col.at(e.expert_ids[c])) = v;
            }
        }
    }

    std::vector<AggregatedLabel> labels;
    json detail = json::object();
    if (method == "majority") {
        labels = majority_vote(mat);
    } else if (method == "weighted") {
        const fs::path ap = store.window_dir(id) / "oracle" / "agreement.json";
        if (!fs::exists(ap)) throw ConfigError("weighted aggregation needs a resolved oracle; run oracle resolve first");
        const json aj = json::parse(read_file(ap));
        std::map<std::string, Label> oracle;
        for (const auto& rid : aj.at("final_oracle_ids")) {
            const std::string s = rid.get<std::string>();
            oracle[s] = *parse_label(aj.at("labels").at(s).get<std::string>());
        }
        const auto weights = calibrate_weights(mat, oracle);
        labels = weighted_vote(mat, weights);
        json w = json::array();
        for (const auto& x : weights) w.push_back({{"expert_id", x.expert_id}, {"accuracy", x.accuracy}, {"support", x.support}});
        detail["weights"] = w;
    } else if (method == "em") {
        EmOptions opt;
        opt.seed = cfg.seed_for("em:" + id);
        const EmResult res = em_latent_labels(mat, opt);
        labels = res.labels;
        json w = json::array();
        for (const auto& x : res.weights) w.push_back({{"expert_id", x.expert_id}, {"accuracy", x.accuracy}, {"support", x.support}});
        detail["weights"] = w;
        detail["iterations"] = res.iterations;
        detail["converged"] = res.converged;
        detail["fallback_to_majority"] = res.fallback_to_majority;
        detail["prior_fake"] = res.prior_fake;
    } else {
        throw ConfigError("unknown aggregation method '" + method + "'");
    }

    std::string text;
    std::size_t fake = 0, real = 0, unlabeled = 0;
    for (const auto& l : labels) {
        text += l.to_json().dump() + "\n";
        if (!l.label) ++unlabeled;
        else (*l.label == Label::fake ? fake : real)++;
    }
    const fs::path dir = store.window_dir(id);
    atomic_write(dir / "labels.jsonl", text);
    json summary = {{"window_id", id},
                    {"method", method},
                    {"records", labels.size()},
                    {"experts", mat.expert_ids},
                    {"fake", fake},
                    {"real", real},
                    {"unlabeled", unlabeled},
                    {"ignored_votes", ignored}};
    summary.update(detail);
    atomic_write(dir / "reports" / "labels.json", json_text(summary));
    summary["command"] = "label";
    return summary;
}

// ---------------------------------------------------------------------------
// Simulation and evaluation

json run_simulate(const PipelineConfig& cfg, const fs::path& out_dir) {
    const DriftStream stream = generate_drift_stream(cfg.drift);
    std::string text;
    json windows = json::array();
    std::size_t n = 0;
    for (const auto& w : stream.windows) {
        for (const auto& r : w.records) text += to_jsonl(r) + "\n";
        windows.push_back({{"window_id", w.window_id}, {"records", w.records.size()}});
        n += w.records.size();
    }
    const fs::path out = out_dir / "stream.jsonl";
    atomic_write(out, text);
    return {{"command", "simulate"},
            {"output", out.string()},
            {"records", n},
            {"windows", windows},
            {"persistent_signal_share", persistent_signal_share(stream)},
            {"drift", cfg.drift.to_json()}};
}

json run_evaluate_schemes(const PipelineConfig& cfg, const fs::path& out_dir) {
    const DriftStream stream = generate_drift_stream(cfg.drift);
    RefreshHarness harness(stream, pipeline_embedder(cfg, FilterConfig::builtin(), false), cfg.seed);
    json schemes = json::object();
    std::string plot;
    bool first = true;
    const int W = static_cast<int>(stream.windows.size());
    for (const auto& name : cfg.schemes) {
        const EvalReport rep = harness.run(UpdateScheme::parse(name), cfg.classifier);
        atomic_write(out_dir / ("eval_" + name + ".csv"), rep.to_csv());
        plot += rep.to_plot_tsv(first);
        first = false;
        std::vector<double> acc;
        for (const auto& w : rep.windows) acc.push_back(w.accuracy);
        schemes[name] = {{"mean", rep.mean()},
                         {"first3", rep.mean(0, std::min(2, W - 1))},
                         {"last3", rep.mean(std::max(0, W - 3), W - 1)},
                         {"accuracy", acc},
                         {"config_hash", rep.config_hash}};
    }
    atomic_write(out_dir / "eval_plot.tsv", plot);
    return {{"command", "evaluate"},
            {"classifier", to_string(cfg.classifier)},
            {"persistent_signal_share", persistent_signal_share(stream)},
            {"schemes", schemes},
            {"output", out_dir.string()}};
}

json run_evaluate_corpora(const PipelineConfig& cfg, const std::vector<std::pair<std::string, fs::path>>& corpora,
                          const fs::path& out_dir) {
    std::vector<NamedCorpus> loaded;
    for (const auto& [name, dir] : corpora) {
        if (!fs::is_directory(dir)) throw IoError("corpus directory not found: " + dir.string());
        loaded.push_back(load_corpus(name, dir));
    }
    const CrossCorpusResult res =
        cross_corpus_eval(loaded, cfg.similarity_groups, cfg.classifier, pipeline_embedder(cfg, FilterConfig::builtin(), false));
    atomic_write(out_dir / "cross_matrix.csv", res.matrix_csv());
    atomic_write(out_dir / "cross_summary.csv", res.summary_csv());
    json summary = json::array();
    for (const auto& s : res.summary) {
        summary.push_back({{"corpus", s.name},
                           {"same", s.same},
                           {"cross", s.cross ? json(*s.cross) : json(nullptr)},
                           {"similar", s.similar ? json(*s.similar) : json(nullptr)}});
    }
    return {{"command", "evaluate"},
            {"corpora", res.names},
            {"accuracy", res.accuracy},
            {"summary", summary},
            {"warnings", res.warnings},
            {"output", out_dir.string()}};
}

json run_report(WindowStore& store) {
    const fs::path reports = store.root() / "reports";
    std::string density;
    csv::append_row(density, {"window_id", "filtered", "extended", "extended_unmasked", "extension_pct", "lift_pct", "k"});
    std::string labels;
    csv::append_row(labels, {"window_id", "method", "records", "fake", "real", "unlabeled"});
    std::size_t n_density = 0, n_labels = 0;
    auto num = [](const json& v) {
        if (v.is_null()) return std::string();
        if (v.is_number_float()) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.6f", v.get<double>());
            return std::string(buf);
        }
        return v.dump();
    };
    for (const auto& w : store.windows()) {
        const fs::path d = store.window_dir(w.window_id) / "reports";
        if (fs::exists(d / "density.json")) {
            const json j = json::parse(read_file(d / "density.json"));
            csv::append_row(density, {w.window_id, num(j.at("filtered")), num(j.at("extended")),
                                      num(j.at("extended_unmasked")), num(j.at("extension_pct")), num(j.at("lift_pct")),
                                      num(j.at("k"))});
            ++n_density;
        }
        if (fs::exists(d / "labels.json")) {
            const json j = json::parse(read_file(d / "labels.json"));
            csv::append_row(labels, {w.window_id, j.at("method").get<std::string>(), num(j.at("records")), num(j.at("fake")),
                                     num(j.at("real")), num(j.at("unlabeled"))});
            ++n_labels;
        }
    }
    atomic_write(reports / "density.csv", density);
    atomic_write(reports / "labels.csv", labels);

    // Concatenate evaluation CSVs written by `evaluate --out <store>/reports`.
    std::vector<fs::path> evals;
    if (fs::exists(reports)) {
        for (const auto& e : fs::directory_iterator(reports)) {
            const std::string name = e.path().filename().string();
            if (name.rfind("eval_", 0) == 0 && e.path().extension() == ".csv") evals.push_back(e.path());
        }
    }
    std::sort(evals.begin(), evals.end());
    std::string evaluation;
    std::size_t eval_rows = 0;
    for (const auto& p : evals) {
        const auto rows = csv::parse(read_file(p));
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (i == 0 && !evaluation.empty()) continue;
            csv::append_row(evaluation, rows[i]);
            if (i > 0) ++eval_rows;
        }
    }
    if (!evals.empty()) atomic_write(reports / "evaluation.csv", evaluation);
    return {{"command", "report"},
            {"windows", store.windows().size()},
            {"density_rows", n_density},
            {"label_rows", n_labels},
            {"evaluation_rows", eval_rows},
            {"output", reports.string()}};
}

}  // namespace tad
