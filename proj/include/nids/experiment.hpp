#pragma once

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "nids/cic.hpp"
#include "nids/error.hpp"
#include "nids/eval.hpp"
#include "nids/flow.hpp"
#include "nids/gradcheck.hpp"
#include "nids/ingest.hpp"
#include "nids/iscx.hpp"
#include "nids/models.hpp"
#include "nids/preprocess.hpp"
#include "nids/serialize.hpp"
#include "nids/split.hpp"
#include "nids/synthetic.hpp"

namespace nids {

inline constexpr const char* toolkit_version = "0.1.0";

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int threshold_failure = 1;
inline constexpr int input_error = 2;
}  // namespace exit_code

class IoError : public Error {
public:
    using Error::Error;
};

enum class DatasetKind { synthetic, iscx_xml, cic_csv };

inline DatasetKind parse_dataset_kind(std::string_view s) {
    if (s == "synthetic") return DatasetKind::synthetic;
    if (s == "iscx-xml" || s == "iscx") return DatasetKind::iscx_xml;
    if (s == "cic-csv" || s == "cic") return DatasetKind::cic_csv;
    throw ConfigError("unknown dataset kind '" + std::string(s) + "' (expected synthetic|iscx-xml|cic-csv)");
}

inline std::string to_string(DatasetKind k) {
    switch (k) {
        case DatasetKind::synthetic: return "synthetic";
        case DatasetKind::iscx_xml: return "iscx-xml";
        case DatasetKind::cic_csv: return "cic-csv";
    }
    return "synthetic";
}

enum class ModelKind { dnn, autoencoder };

inline ModelKind parse_model_kind(std::string_view s) {
    if (s == "dnn") return ModelKind::dnn;
    if (s == "autoencoder") return ModelKind::autoencoder;
    throw ConfigError("unknown model '" + std::string(s) + "' (expected dnn|autoencoder)");
}

inline std::string to_string(ModelKind k) { return k == ModelKind::dnn ? "dnn" : "autoencoder"; }

// Where data comes from: exactly one of a synthetic generator config or an
// input file of the given kind. An optional second file gives a by-file
// holdout instead of a random split.
struct DataSource {
    DatasetKind kind = DatasetKind::synthetic;
    std::string input;
    std::string test_input;
    SyntheticConfig synthetic;
    LabelMap labels;
    bool drop_rows_with_non_finite = false;

    void validate() const {
        if (kind == DatasetKind::synthetic) {
            if (!input.empty()) throw ConfigError("synthetic dataset does not take an input path");
            nids::validate(synthetic);
        } else if (input.empty()) {
            throw ConfigError("dataset " + to_string(kind) + " needs an input path");
        }
    }
};

struct ExperimentConfig {
    DataSource data;
    ModelKind model = ModelKind::dnn;
    TrainConfig train;
    double test_fraction = 0.2;
    // Embed only source/destination address and port.
    bool address_port_only = false;
    std::string output_dir;
    // Optional gates; a run that misses one exits with status 1.
    std::optional<double> require_tpr;
    std::optional<double> require_fpr;

    void validate() const {
        data.validate();
        train.validate();
        if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ConfigError("test_fraction must lie in (0,1)");
        if (model == ModelKind::autoencoder && train.ip_mode != IpMode::drop) {
            throw ConfigError("autoencoder does not use IP addresses: ip_mode must be 'drop', got '" +
                              to_string(train.ip_mode) + "'");
        }
    }

    EncodeOptions encode_options() const {
        EncodeOptions o;
        o.ip_mode = train.ip_mode;
        if (model == ModelKind::autoencoder) {
            o.categorical_mode = CategoricalMode::onehot;
            o.categorical_features = {"Protocol"};
        } else if (address_port_only) {
            o.categorical_features = {"SrcIP", "DstIP", "SrcPort", "DstPort"};
        }
        return o;
    }
};

inline std::string default_output_root() {
    if (const char* env = std::getenv("NIDS_OUTPUT_ROOT"); env && *env) return env;
    return "runs";
}

// ---------------------------------------------------------------------------
// I/O helpers

namespace detail {

inline void write_file(const std::filesystem::path& path, const std::string& content) {
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write '" + path.string() + "'");
    f << content;
    if (!f) throw IoError("error writing '" + path.string() + "'");
}

inline std::ifstream open_input(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open input '" + path + "'");
    return f;
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline std::string scores_tsv(const std::vector<double>& labels, const std::vector<double>& scores) {
    std::string s = "index\tlabel\tscore\n";
    for (std::size_t i = 0; i < scores.size(); ++i) {
        s += std::to_string(i) + "\t" + std::to_string(static_cast<int>(labels[i])) + "\t" +
             detail::format_real(scores[i]) + "\n";
    }
    return s;
}

inline std::string confusion_tsv(const ConfusionMatrix& m) {
    const auto pct = m.percent();
    std::string s = "true\\predicted\tbenign\tmalicious\tbenign_pct\tmalicious_pct\n";
    s += "benign\t" + std::to_string(m.tn) + "\t" + std::to_string(m.fp) + "\t" + format_fixed(pct[0][0], 2) + "\t" +
         format_fixed(pct[0][1], 2) + "\n";
    s += "malicious\t" + std::to_string(m.fn) + "\t" + std::to_string(m.tp) + "\t" + format_fixed(pct[1][0], 2) +
         "\t" + format_fixed(pct[1][1], 2) + "\n";
    return s;
}

// Two-column threshold/rate series, one file per rate.
inline void write_series(const std::filesystem::path& dir, const ThresholdCurve& curve) {
    std::string tpr = "threshold\ttpr\n", fpr = "threshold\tfpr\n";
    for (const auto& p : curve) {
        tpr += detail::format_real(p.threshold) + "\t" + detail::format_real(p.tpr) + "\n";
        fpr += detail::format_real(p.threshold) + "\t" + detail::format_real(p.fpr) + "\n";
    }
    write_file(dir / "tpr_series.tsv", tpr);
    write_file(dir / "fpr_series.tsv", fpr);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Data loading

inline IngestResult ingest_file(DatasetKind kind, const std::string& path, const DataSource& src) {
    auto in = detail::open_input(path);
    const std::string name = std::filesystem::path(path).filename().string();
    if (kind == DatasetKind::iscx_xml) {
        IscxOptions o;
        o.labels = src.labels;
        o.source_name = name;
        return parse_iscx_xml(in, o);
    }
    CicOptions o;
    o.labels = src.labels;
    o.drop_rows_with_non_finite = src.drop_rows_with_non_finite;
    o.source_name = name;
    return parse_cic_csv(in, o);
}

inline IngestResult synthetic_ingest(const SyntheticConfig& c) {
    IngestResult r;
    r.dataset = generate_synthetic(c);
    r.report.source = "synthetic";
    r.report.rows_read = r.report.rows_kept = r.dataset.size();
    r.report.malicious = r.dataset.count(Label::Malicious);
    r.report.benign = r.dataset.size() - r.report.malicious;
    return r;
}

inline IngestResult load_primary(const DataSource& src) {
    if (src.kind == DatasetKind::synthetic) return synthetic_ingest(src.synthetic);
    return ingest_file(src.kind, src.input, src);
}

struct PreparedData {
    IngestResult primary;
    std::optional<IngestResult> holdout;
    Split split;
};

// Random stratified split of the primary data, or primary/holdout when a
// test file is given.
inline PreparedData prepare_data(const ExperimentConfig& cfg) {
    PreparedData p;
    p.primary = load_primary(cfg.data);
    if (!cfg.data.test_input.empty()) {
        p.holdout = ingest_file(cfg.data.kind, cfg.data.test_input, cfg.data);
        p.split.train = p.primary.dataset;
        p.split.test = p.holdout->dataset;
    } else {
        p.split = split_stratified(p.primary.dataset, cfg.test_fraction, cfg.train.seed);
    }
    if (p.split.train.records.empty()) throw ConfigError("no training records after ingestion");
    return p;
}

inline nlohmann::json data_source_json(const DataSource& d) {
    nlohmann::json j{{"kind", to_string(d.kind)}};
    if (d.kind == DatasetKind::synthetic) {
        const auto& s = d.synthetic;
        j["synthetic"] = {{"n_flows", s.n_flows},         {"malicious_fraction", s.malicious_fraction},
                          {"seed", s.seed},               {"separation", s.separation},
                          {"src_ips", s.src_ips},         {"dst_ips", s.dst_ips},
                          {"src_ports", s.src_ports},     {"dst_ports", s.dst_ports},
                          {"attacker_ips", s.attacker_ips}, {"ip_enrichment", s.ip_enrichment}};
    } else {
        j["input"] = d.input;
        if (!d.test_input.empty()) j["test_input"] = d.test_input;
        j["drop_rows_with_non_finite"] = d.drop_rows_with_non_finite;
    }
    j["benign_labels"] = d.labels.benign;
    return j;
}

inline nlohmann::json config_json(const ExperimentConfig& c) {
    nlohmann::json j{{"data", data_source_json(c.data)},
                     {"model", to_string(c.model)},
                     {"train", train_config_to_json(c.train)},
                     {"test_fraction", c.test_fraction},
                     {"address_port_only", c.address_port_only},
                     {"split", c.data.test_input.empty() ? "stratified" : "holdout-file"}};
    if (c.require_tpr) j["require_tpr"] = *c.require_tpr;
    if (c.require_fpr) j["require_fpr"] = *c.require_fpr;
    return j;
}

inline nlohmann::json history_json(const TrainHistory& h) {
    return nlohmann::json{{"loss", h.loss}, {"held_out_loss", h.held_out_loss}, {"steps", h.steps}};
}

// ---------------------------------------------------------------------------
// Training and scoring

struct TrainedRun {
    ModelFile file;
    TrainHistory history;
    std::vector<std::string> notes;
    std::vector<double> test_labels;
    std::vector<double> test_scores;
    ConfusionMatrix confusion;
    double train_seconds = 0.0;
};

// Scores a dataset with a trained model: DNN probabilities or autoencoder
// reconstruction errors.
inline std::vector<double> score(ModelFile& f, const LabeledDataset& data, std::vector<double>* labels = nullptr) {
    if (auto* m = std::get_if<DnnModel>(&f.model)) {
        const auto enc = encode_dataset(data, m->schema, m->options);
        if (labels) *labels = enc.labels;
        return predict_dnn(*m, enc);
    }
    auto& a = std::get<AutoencoderModel>(f.model);
    const auto enc = encode_dataset(data, a.schema, a.options);
    if (labels) *labels = enc.labels;
    return reconstruction_error(a, enc);
}

inline TrainedRun train_and_score(const ExperimentConfig& cfg, const Split& split) {
    TrainedRun run;
    const auto t0 = std::chrono::steady_clock::now();
    const EncodeOptions eo = cfg.encode_options();
    run.file.train = cfg.train;
    run.file.provenance_digest = dataset_digest(split.train);
    if (cfg.model == ModelKind::dnn) {
        const auto schema = fit_schema(split.train, eo, &run.notes);
        DnnModel m = build_dnn(schema, eo, cfg.train.seed, {{64, 64, 64}, cfg.train.dropout});
        const auto enc_train = encode_dataset(split.train, schema, eo);
        const auto enc_test = encode_dataset(split.test, schema, eo);
        run.history = train_dnn(m, enc_train, cfg.train, &enc_test);
        run.test_labels = enc_test.labels;
        run.test_scores = predict_dnn(m, enc_test);
        run.file.model = std::move(m);
    } else {
        const auto benign = filter_label(split.train, Label::Benign);
        if (benign.records.empty()) throw ConfigError("autoencoder: training split has no benign records");
        const auto schema = fit_schema(benign, eo, &run.notes);
        AutoencoderModel m = build_autoencoder(schema, eo, cfg.train.seed, {{140, 35, 16, 16, 35}, cfg.train.l1_lambda});
        const auto enc_train = encode_dataset(benign, schema, eo);
        const auto held = encode_dataset(filter_label(split.test, Label::Benign), schema, eo);
        run.history = train_autoencoder(m, enc_train, cfg.train, &held);
        const auto enc_test = encode_dataset(split.test, schema, eo);
        run.test_labels = enc_test.labels;
        run.test_scores = reconstruction_error(m, enc_test);
        run.file.model = std::move(m);
    }
    if (!run.test_scores.empty()) run.confusion = confusion(run.test_labels, run.test_scores, cfg.train.threshold);
    run.confusion.threshold = cfg.train.threshold;
    run.train_seconds = detail::seconds_since(t0);
    return run;
}

inline bool gates_pass(const ExperimentConfig& cfg, const ConfusionMatrix& m, std::ostream& out) {
    bool ok = true;
    if (cfg.require_tpr && m.tpr() < *cfg.require_tpr) {
        out << "FAIL: TPR " << m.tpr() << " below required " << *cfg.require_tpr << "\n";
        ok = false;
    }
    if (cfg.require_fpr && m.fpr() > *cfg.require_fpr) {
        out << "FAIL: FPR " << m.fpr() << " above allowed " << *cfg.require_fpr << "\n";
        ok = false;
    }
    return ok;
}

inline std::string output_dir_for(const ExperimentConfig& cfg, const char* command) {
    return cfg.output_dir.empty() ? (std::filesystem::path(default_output_root()) / command).string() : cfg.output_dir;
}

// ---------------------------------------------------------------------------
// Commands. Each returns a process exit status and reports on `out`.

// Maps library exceptions onto exit statuses.
inline int guarded(std::ostream& err, const std::function<int()>& body) {
    try {
        return body();
    } catch (const ParseError& e) {
        err << "parse error: " << e.what() << "\n";
    } catch (const SchemaError& e) {
        err << "schema error: " << e.what() << "\n";
    } catch (const IoError& e) {
        err << "i/o error: " << e.what() << "\n";
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
    }
    return exit_code::input_error;
}

struct IngestCommand {
    DataSource data;
    std::string output_dir;  // report.json goes here when set
    std::string export_csv;  // canonical CSV export when set
};

inline int cmd_ingest(const IngestCommand& c, std::ostream& out) {
    c.data.validate();
    const auto r = load_primary(c.data);
    nlohmann::json j = r.report;
    std::vector<std::string> notes;
    if (!r.dataset.records.empty()) {
        nlohmann::json feats = nlohmann::json::array();
        const auto schema = fit_schema(r.dataset, EncodeOptions{}, &notes);
        for (const auto* f : schema.of_kind(FeatureKind::Categorical)) {
            feats.push_back({{"name", f->name},
                             {"cardinality", f->vocabulary.cardinality()},
                             {"embedding_dims", f->embedding_dims}});
        }
        j["categorical_features"] = std::move(feats);
        j["continuous_features"] = r.dataset.schema.names(FeatureKind::Continuous);
    }
    j["notes"] = notes;
    out << "source: " << r.report.source << "\n"
        << "rows read: " << r.report.rows_read << ", kept: " << r.report.rows_kept
        << ", dropped: " << r.report.total_dropped() << "\n";
    for (const auto& [reason, n] : r.report.rows_dropped) out << "  dropped " << n << " rows (" << reason << ")\n";
    for (const auto& col : r.report.columns_dropped) out << "  dropped column " << col.name << " (" << col.reason << ")\n";
    out << "labels: benign " << r.report.benign << ", malicious " << r.report.malicious << "\n";
    out << "features: " << r.dataset.schema.names(FeatureKind::Categorical).size() << " categorical, "
        << r.dataset.schema.names(FeatureKind::Continuous).size() << " continuous\n";
    for (const auto& n : notes) out << "note: " << n << "\n";
    if (!c.output_dir.empty()) detail::write_file(std::filesystem::path(c.output_dir) / "ingest_report.json", j.dump(2) + "\n");
    if (!c.export_csv.empty()) {
        std::ostringstream csv;
        write_canonical_csv(r.dataset, csv);
        detail::write_file(c.export_csv, csv.str());
    }
    return exit_code::ok;
}

inline int cmd_synth(const SyntheticConfig& s, const std::string& path, std::ostream& out) {
    const auto ds = generate_synthetic(s);
    std::ostringstream csv;
    write_canonical_csv(ds, csv);
    detail::write_file(path, csv.str());
    out << "wrote " << ds.size() << " flows (" << ds.count(Label::Malicious) << " malicious) to " << path << "\n";
    return exit_code::ok;
}

inline int cmd_train(const ExperimentConfig& cfg, std::ostream& out) {
    cfg.validate();
    const auto t0 = std::chrono::steady_clock::now();
    const auto data = prepare_data(cfg);
    const double ingest_s = detail::seconds_since(t0);
    auto run = train_and_score(cfg, data.split);
    const std::filesystem::path dir = output_dir_for(cfg, "train");

    nlohmann::json eval{{"split", "test"}, {"rows", run.test_scores.size()}, {"confusion", run.confusion}};
    if (cfg.model == ModelKind::autoencoder && !run.test_scores.empty()) {
        const auto curve = sweep(run.test_labels, run.test_scores, score_thresholds(run.test_scores));
        detail::write_file(dir / "sweep.tsv", curve_tsv(curve));
        detail::write_series(dir, curve);
    }
    nlohmann::json manifest{{"toolkit_version", toolkit_version},
                            {"command", "train"},
                            {"config", config_json(cfg)},
                            {"ingest", data.primary.report},
                            {"history", history_json(run.history)},
                            {"evaluation", eval},
                            {"notes", run.notes},
                            {"provenance_digest", run.file.provenance_digest},
                            {"timings_seconds", {{"ingest", ingest_s}, {"train_and_score", run.train_seconds}}}};
    if (data.holdout) manifest["holdout_ingest"] = data.holdout->report;

    detail::write_file(dir / "model.json", save_model(run.file));
    detail::write_file(dir / "manifest.json", manifest.dump(2) + "\n");
    detail::write_file(dir / "confusion.tsv", detail::confusion_tsv(run.confusion));
    detail::write_file(dir / "scores.tsv", detail::scores_tsv(run.test_labels, run.test_scores));
    std::string loss = "epoch\tloss\theld_out_loss\n";
    for (std::size_t e = 0; e < run.history.loss.size(); ++e) {
        loss += std::to_string(e + 1) + "\t" + detail::format_real(run.history.loss[e]) + "\t" +
                (e < run.history.held_out_loss.size() ? detail::format_real(run.history.held_out_loss[e]) : "") + "\n";
    }
    detail::write_file(dir / "loss.tsv", loss);

    for (const auto& n : run.notes) out << "note: " << n << "\n";
    out << to_string(cfg.model) << " trained on " << data.split.train.size() << " flows, tested on "
        << data.split.test.size() << "\n";
    out << "final training loss " << (run.history.loss.empty() ? 0.0 : run.history.loss.back()) << "\n";
    out << "test @ threshold " << cfg.train.threshold << ": TP " << run.confusion.tp << " FP " << run.confusion.fp
        << " TN " << run.confusion.tn << " FN " << run.confusion.fn << " TPR " << run.confusion.tpr() << " FPR "
        << run.confusion.fpr() << "\n";
    out << "wrote " << (dir / "model.json").string() << " and " << (dir / "manifest.json").string() << "\n";
    return gates_pass(cfg, run.confusion, out) ? exit_code::ok : exit_code::threshold_failure;
}

struct EvalCommand {
    std::string model_path;
    ExperimentConfig data;  // data source, output_dir and gates are used
    std::optional<double> threshold;
    std::vector<double> thresholds;  // sweep points; empty = every distinct score
};

inline int cmd_eval(const EvalCommand& c, std::ostream& out) {
    c.data.data.validate();
    auto in = detail::open_input(c.model_path);
    ModelFile f = load_model(in);
    const auto r = load_primary(c.data.data);
    std::vector<double> labels;
    const auto scores = score(f, r.dataset, &labels);  // throws on schema mismatch before any output
    if (scores.empty()) throw ConfigError("evaluation dataset is empty");
    const double threshold = c.threshold.value_or(f.train.threshold);
    const auto m = confusion(labels, scores, threshold);
    const auto ts = c.thresholds.empty() ? score_thresholds(scores) : c.thresholds;
    const auto curve = sweep(labels, scores, ts);

    const std::filesystem::path dir = output_dir_for(c.data, "eval");
    nlohmann::json report{{"toolkit_version", toolkit_version},
                          {"command", "eval"},
                          {"model", c.model_path},
                          {"model_kind", f.kind()},
                          {"data", data_source_json(c.data.data)},
                          {"ingest", r.report},
                          {"confusion", m},
                          {"sweep_points", curve.size()}};
    detail::write_file(dir / "eval.json", report.dump(2) + "\n");
    detail::write_file(dir / "confusion.tsv", detail::confusion_tsv(m));
    detail::write_file(dir / "sweep.tsv", curve_tsv(curve));
    detail::write_series(dir, curve);
    detail::write_file(dir / "scores.tsv", detail::scores_tsv(labels, scores));

    out << f.kind() << " on " << scores.size() << " flows @ threshold " << threshold << ": TP " << m.tp << " FP "
        << m.fp << " TN " << m.tn << " FN " << m.fn << " TPR " << m.tpr() << " FPR " << m.fpr() << " FNR " << m.fnr()
        << "\n";
    out << "wrote " << (dir / "eval.json").string() << "\n";
    return gates_pass(c.data, m, out) ? exit_code::ok : exit_code::threshold_failure;
}

struct AblationResult {
    std::vector<NamedRun> runs;
    std::vector<ComparisonRow> table;
};

// DNN with full, first-three-octet and no IP addresses over one shared split.
inline AblationResult run_ablation(const ExperimentConfig& base, const Split& split) {
    AblationResult res;
    for (IpMode mode : {IpMode::full, IpMode::first3, IpMode::drop}) {
        ExperimentConfig cfg = base;
        cfg.model = ModelKind::dnn;
        cfg.train.ip_mode = mode;
        auto run = train_and_score(cfg, split);
        res.runs.push_back({"DNN ip_mode=" + to_string(mode), run.confusion});
    }
    res.table = compare_report(res.runs);
    return res;
}

inline int cmd_ablation(const ExperimentConfig& base, std::ostream& out) {
    if (base.model != ModelKind::dnn) throw ConfigError("ablation runs the DNN only");
    base.validate();
    const auto data = prepare_data(base);
    const auto res = run_ablation(base, data.split);
    const std::filesystem::path dir = output_dir_for(base, "ablation");
    nlohmann::json runs = nlohmann::json::array();
    for (const auto& r : res.runs) runs.push_back({{"name", r.name}, {"confusion", r.matrix}});
    nlohmann::json j{{"toolkit_version", toolkit_version},
                     {"command", "ablation"},
                     {"config", config_json(base)},
                     {"ingest", data.primary.report},
                     {"test_rows", data.split.test.size()},
                     {"runs", runs},
                     {"table", res.table}};
    detail::write_file(dir / "ablation.json", j.dump(2) + "\n");
    detail::write_file(dir / "ablation.tsv", comparison_tsv(res.table));
    out << comparison_tsv(res.table);
    bool ok = true;
    for (const auto& r : res.runs) ok = gates_pass(base, r.matrix, out) && ok;
    return ok ? exit_code::ok : exit_code::threshold_failure;
}

inline int cmd_gradcheck(const std::string& kind, double corrupt, std::ostream& out) {
    std::vector<std::string> kinds;
    if (kind == "all") {
        kinds = gradcheck::kinds();
    } else {
        kinds = {kind};
    }
    GradCheckOptions opt;
    opt.corrupt = corrupt;
    bool ok = true;
    for (const auto& k : kinds) {
        const auto r = gradcheck::run(k, opt);
        const bool pass = r.max_relative_error <= gradcheck::tolerance && r.checked > 0;
        ok = ok && pass;
        out << (pass ? "PASS " : "FAIL ") << k << " max_rel_error=" << r.max_relative_error << " checked=" << r.checked
            << " skipped=" << r.skipped << " worst=" << r.worst << "\n";
    }
    return ok ? exit_code::ok : exit_code::threshold_failure;
}

}  // namespace nids
