// nids: ingest flow data, train and evaluate the DNN / autoencoder detectors.

#include <algorithm>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nids/experiment.hpp"

namespace {

struct DataFlags {
    std::string dataset = "synthetic";
    std::string input;
    std::string test_input;
    std::vector<std::string> benign_labels{"Normal", "BENIGN"};
    bool drop_non_finite_rows = false;
    nids::SyntheticConfig synth;
    std::optional<std::uint64_t> synth_seed;
};

void add_synth_flags(CLI::App* app, DataFlags& d) {
    app->add_option("--n-flows", d.synth.n_flows, "synthetic: number of flows")->capture_default_str();
    app->add_option("--malicious-fraction", d.synth.malicious_fraction, "synthetic: fraction of malicious flows")
        ->capture_default_str();
    app->add_option("--synth-seed", d.synth_seed, "synthetic: generator seed (default: --seed)");
    app->add_option("--separation", d.synth.separation, "synthetic: class separation of continuous features")
        ->capture_default_str();
    app->add_option("--src-ips", d.synth.src_ips, "synthetic: benign source hosts")->capture_default_str();
    app->add_option("--dst-ips", d.synth.dst_ips, "synthetic: destination hosts")->capture_default_str();
    app->add_option("--src-ports", d.synth.src_ports, "synthetic: ephemeral source ports")->capture_default_str();
    app->add_option("--dst-ports", d.synth.dst_ports, "synthetic: destination ports")->capture_default_str();
    app->add_option("--attacker-ips", d.synth.attacker_ips, "synthetic: attacker hosts")->capture_default_str();
    app->add_option("--ip-enrichment", d.synth.ip_enrichment,
                    "synthetic: probability a malicious flow comes from an attacker host")
        ->capture_default_str();
}

void add_data_flags(CLI::App* app, DataFlags& d, bool holdout) {
    app->add_option("--dataset", d.dataset, "synthetic | iscx-xml | cic-csv")->capture_default_str();
    app->add_option("--input", d.input, "input file for iscx-xml / cic-csv");
    if (holdout) app->add_option("--test-input", d.test_input, "separate test file (by-file holdout)");
    app->add_option("--benign-label", d.benign_labels, "raw labels mapped to benign")->capture_default_str();
    app->add_flag("--drop-non-finite-rows", d.drop_non_finite_rows,
                  "cic-csv: drop rows with Infinity/NaN instead of dropping the column");
    add_synth_flags(app, d);
}

nids::DataSource to_source(const DataFlags& d, std::uint64_t seed) {
    nids::DataSource s;
    s.kind = nids::parse_dataset_kind(d.dataset);
    s.input = d.input;
    s.test_input = d.test_input;
    s.labels.benign = d.benign_labels;
    s.drop_rows_with_non_finite = d.drop_non_finite_rows;
    s.synthetic = d.synth;
    s.synthetic.seed = d.synth_seed.value_or(seed);
    return s;
}

struct TrainFlags {
    DataFlags data;
    std::string model = "dnn";
    std::string ip_mode;
    nids::TrainConfig train;
    std::optional<double> threshold;
    double test_fraction = 0.2;
    bool address_port_only = false;
    std::string out;
    std::optional<double> require_tpr;
    std::optional<double> require_fpr;
};

void add_train_flags(CLI::App* app, TrainFlags& t) {
    add_data_flags(app, t.data, true);
    app->add_option("--model", t.model, "dnn | autoencoder")->capture_default_str();
    app->add_option("--ip-mode", t.ip_mode, "full | first3 | drop (default: full for dnn, drop for autoencoder)");
    app->add_option("--epochs", t.train.epochs)->capture_default_str();
    app->add_option("--batch-size", t.train.batch_size)->capture_default_str();
    app->add_option("--seed", t.train.seed, "seed for split, init, shuffling and dropout")->capture_default_str();
    app->add_option("--learning-rate", t.train.learning_rate)->capture_default_str();
    app->add_option("--rho", t.train.rho, "RMSProp decay")->capture_default_str();
    app->add_option("--epsilon", t.train.epsilon, "RMSProp epsilon")->capture_default_str();
    app->add_option("--dropout", t.train.dropout, "dnn dropout rate")->capture_default_str();
    app->add_option("--l1-lambda", t.train.l1_lambda, "autoencoder activity penalty")->capture_default_str();
    app->add_option("--threshold", t.threshold, "decision threshold (default: 0.5 dnn, 0.03 autoencoder)");
    app->add_option("--test-fraction", t.test_fraction, "stratified test split fraction")->capture_default_str();
    app->add_flag("--address-port-only", t.address_port_only,
                  "dnn: embed only SrcIP, DstIP, SrcPort, DstPort");
    app->add_option("--out", t.out, "output directory (default: $NIDS_OUTPUT_ROOT/<command>)");
    app->add_option("--require-tpr", t.require_tpr, "exit 1 if test TPR is below this");
    app->add_option("--require-fpr", t.require_fpr, "exit 1 if test FPR is above this");
}

nids::ExperimentConfig to_config(const TrainFlags& t) {
    nids::ExperimentConfig c;
    c.model = nids::parse_model_kind(t.model);
    c.train = t.train;
    const bool ae = c.model == nids::ModelKind::autoencoder;
    c.train.ip_mode = t.ip_mode.empty() ? (ae ? nids::IpMode::drop : nids::IpMode::full) : nids::parse_ip_mode(t.ip_mode);
    c.train.threshold = t.threshold.value_or(ae ? 0.03 : 0.5);
    c.data = to_source(t.data, t.train.seed);
    c.test_fraction = t.test_fraction;
    c.address_port_only = t.address_port_only;
    c.output_dir = t.out;
    c.require_tpr = t.require_tpr;
    c.require_fpr = t.require_fpr;
    return c;
}

// CLI11 only reads config files attached to the top-level app, so a
// subcommand's --config is expanded here into "--key=value" arguments placed
// right after the subcommand. Keys also given on the command line are skipped.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
    if (args.empty()) return args;
    std::string path;
    for (std::size_t i = 1; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
        if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
    }
    if (path.empty()) return args;
    auto given = [&](const std::string& name) {
        return std::any_of(args.begin() + 1, args.end(), [&](const std::string& a) {
            return a == "--" + name || a.rfind("--" + name + "=", 0) == 0;
        });
    };
    std::vector<std::string> out{args[0]};
    for (const auto& item : CLI::ConfigINI().from_file(path)) {
        if (item.name == "++" || item.name == "--") continue;
        if (!item.parents.empty() && item.parents != std::vector<std::string>{args[0]}) continue;
        if (given(item.name)) continue;
        for (const auto& v : item.inputs) out.push_back("--" + item.name + "=" + v);
    }
    out.insert(out.end(), args.begin() + 1, args.end());
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Flow-based network intrusion detection: DNN with entity embeddings and autoencoder"};
    app.require_subcommand(1);
    app.set_version_flag("--version", nids::toolkit_version);
    std::string config_path;

    // ingest
    auto* ingest = app.add_subcommand("ingest", "parse an ISCX XML / CIC CSV file and report what was kept");
    ingest->add_option("--config", config_path, "INI file with flag names as keys");
    DataFlags ingest_data;
    std::string ingest_out, export_csv;
    add_data_flags(ingest, ingest_data, false);
    ingest->add_option("--out", ingest_out, "directory for ingest_report.json");
    ingest->add_option("--export-csv", export_csv, "write parsed flows as canonical CSV");

    // train
    auto* train = app.add_subcommand("train", "train a model, write model.json, manifest.json and test results");
    train->add_option("--config", config_path, "INI file with flag names as keys");
    TrainFlags train_flags;
    add_train_flags(train, train_flags);

    // eval
    auto* eval = app.add_subcommand("eval", "score a dataset with a saved model");
    eval->add_option("--config", config_path, "INI file with flag names as keys");
    DataFlags eval_data;
    std::string model_file, eval_out;
    std::optional<double> eval_threshold, eval_tpr, eval_fpr;
    std::vector<double> thresholds;
    std::uint64_t eval_seed = 1;
    eval->add_option("--model-file", model_file, "model.json written by train")->required();
    add_data_flags(eval, eval_data, false);
    eval->add_option("--seed", eval_seed, "synthetic generator seed when --synth-seed is not given")
        ->capture_default_str();
    eval->add_option("--threshold", eval_threshold, "decision threshold (default: the model's)");
    eval->add_option("--thresholds", thresholds, "sweep thresholds, ascending (default: every distinct score)");
    eval->add_option("--out", eval_out, "output directory (default: $NIDS_OUTPUT_ROOT/eval)");
    eval->add_option("--require-tpr", eval_tpr, "exit 1 if TPR is below this");
    eval->add_option("--require-fpr", eval_fpr, "exit 1 if FPR is above this");

    // ablation
    auto* ablation = app.add_subcommand("ablation", "DNN with full, first3 and no IP addresses on one split");
    ablation->add_option("--config", config_path, "INI file with flag names as keys");
    TrainFlags ablation_flags;
    add_train_flags(ablation, ablation_flags);

    // gradcheck
    auto* gradcheck = app.add_subcommand("gradcheck", "compare analytic gradients with finite differences");
    gradcheck->add_option("--config", config_path, "INI file with flag names as keys");
    std::string kind = "all";
    double corrupt = 0.0;
    gradcheck->add_option("--kind", kind, "all | " + [] {
        std::string s;
        for (const auto& k : nids::gradcheck::kinds()) s += (s.empty() ? "" : " | ") + k;
        return s;
    }())->capture_default_str();
    gradcheck->add_option("--corrupt", corrupt, "scale analytic gradients by (1 + corrupt); negative control")
        ->capture_default_str();

    // synth
    auto* synth = app.add_subcommand("synth", "write a synthetic labelled flow dataset as CSV");
    synth->add_option("--config", config_path, "INI file with flag names as keys");
    DataFlags synth_data;
    std::string synth_out = "synthetic.csv";
    add_synth_flags(synth, synth_data);
    synth->add_option("--output", synth_out, "CSV path")->capture_default_str();

    try {
        std::vector<std::string> args(argv + 1, argv + argc);
        args = expand_config(args);
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : nids::exit_code::input_error;
    }

    auto& out = std::cout;
    auto& err = std::cerr;
    if (*ingest) {
        return nids::guarded(err, [&] {
            nids::IngestCommand c;
            c.data = to_source(ingest_data, 1);
            c.output_dir = ingest_out;
            c.export_csv = export_csv;
            return nids::cmd_ingest(c, out);
        });
    }
    if (*train) return nids::guarded(err, [&] { return nids::cmd_train(to_config(train_flags), out); });
    if (*ablation) return nids::guarded(err, [&] { return nids::cmd_ablation(to_config(ablation_flags), out); });
    if (*eval) {
        return nids::guarded(err, [&] {
            nids::EvalCommand c;
            c.model_path = model_file;
            c.data.data = to_source(eval_data, eval_seed);
            c.data.output_dir = eval_out;
            c.data.require_tpr = eval_tpr;
            c.data.require_fpr = eval_fpr;
            c.threshold = eval_threshold;
            c.thresholds = thresholds;
            return nids::cmd_eval(c, out);
        });
    }
    if (*gradcheck) return nids::guarded(err, [&] { return nids::cmd_gradcheck(kind, corrupt, out); });
    if (*synth) {
        return nids::guarded(err, [&] {
            auto s = synth_data.synth;
            s.seed = synth_data.synth_seed.value_or(s.seed);
            nids::validate(s);
            return nids::cmd_synth(s, synth_out, out);
        });
    }
    return nids::exit_code::input_error;
}
