// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "nids/experiment.hpp"

using namespace nids;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

std::string data_path(const std::string& name) { return std::string(NIDS_TEST_DATA) + "/" + name; }

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

fs::path scratch(const std::string& name) {
    auto p = fs::temp_directory_path() / ("nids_acceptance_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

double seconds(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
    bool pass;
    std::string detail;
};

int failures = 0;

void report(int id, const std::string& title, const std::function<Outcome()>& body) {
    Outcome o;
    const auto t0 = Clock::now();
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << " (" << title << "): " << o.detail << " ["
              << format_fixed(seconds(t0), 1) << " s]" << std::endl;
}

std::string fmt(double v) { return format_fixed(v, 4); }

// 1 ------------------------------------------------------------------------
Outcome gradients() {
    const auto t0 = Clock::now();
    double worst = 0.0;
    std::string worst_kind;
    bool ok = true;
    for (const auto& k : gradcheck::kinds()) {
        const auto r = gradcheck::run(k);
        if (r.checked == 0 || !(r.max_relative_error <= gradcheck::tolerance)) ok = false;
        if (worst_kind.empty() || r.max_relative_error > worst) {
            worst = r.max_relative_error;
            worst_kind = k;
        }
    }
    const double t = seconds(t0);
    ok = ok && t < 10.0;
    std::ostringstream s;
    s << gradcheck::kinds().size() << " kinds, max relative error " << worst << " (" << worst_kind << "), " << fmt(t)
      << " s";
    return {ok, s.str()};
}

// 2 ------------------------------------------------------------------------
Outcome embedding_rule() {
    const bool rows = embedding_dims(17002) == 12 && embedding_dims(19112) == 12 && embedding_dims(64638) == 16;
    const bool dst = embedding_dims(53791) == 16;
    const auto note = published_dims_conflict("DstPort", 53791);
    const bool documented = note && note->find("15") != std::string::npos && note->find("16") != std::string::npos;
    std::ostringstream s;
    s << "SrcIP " << embedding_dims(17002) << ", DstIP " << embedding_dims(19112) << ", SrcPort "
      << embedding_dims(64638) << ", DstPort " << embedding_dims(53791) << " (" << (note ? *note : "no note") << ")";
    return {rows && dst && documented, s.str()};
}

// 3 ------------------------------------------------------------------------
std::string random_ip(Rng& rng, int octets) {
    std::string s;
    for (int i = 0; i < octets; ++i) {
        if (i) s += '.';
        s += std::to_string(rng.below(256));
    }
    return s;
}

Outcome preprocessing_properties() {
    constexpr int cases = 10000;
    Rng rng(2024);
    int fail_scale = 0, fail_onehot = 0, fail_ip = 0;
    for (int i = 0; i < cases; ++i) {
        // min-max: range, monotonicity, degenerate feature
        const double a = rng.uniform(-1e6, 1e6), b = a + std::pow(10.0, rng.uniform(-6.0, 6.0));
        const double x = rng.uniform(a - (b - a), b + (b - a)), y = rng.uniform(a - (b - a), b + (b - a));
        const double sx = scale_value(x, a, b), sy = scale_value(y, a, b);
        const bool range = sx >= 0.0 && sx <= 1.0 && sy >= 0.0 && sy <= 1.0;
        const bool mono = x <= y ? sx <= sy : sx >= sy;
        const bool ends = scale_value(a, a, b) == 0.0 && scale_value(b, a, b) == 1.0;
        const bool degenerate = scale_value(x, a, a) == 0.0;
        if (!(range && mono && ends && degenerate)) ++fail_scale;

        // one-hot: exactly one 1, at the vocabulary index
        std::vector<std::string> values;
        const std::size_t card = 1 + rng.below(50);
        for (std::size_t k = 0; k < card; ++k) values.push_back("v" + std::to_string(rng.below(1000)));
        const auto vocab = Vocabulary::from_values(values);
        const std::string probe = rng.bernoulli(0.8) ? values[rng.below(values.size())] : "unseen";
        const auto v = one_hot(vocab, probe);
        const auto ones = std::count(v.begin(), v.end(), 1.0), zeros = std::count(v.begin(), v.end(), 0.0);
        if (!(v.size() == vocab.cardinality() + 1 && ones == 1 && ones + zeros == static_cast<long>(v.size()) &&
              v[vocab.encode(probe)] == 1.0)) {
            ++fail_onehot;
        }

        // truncation: identity at 4 octets, idempotent, prefix of the input
        const auto ip = random_ip(rng, 4);
        const auto t3 = truncate_ip(ip, 3);
        const bool ident = truncate_ip(ip, 4) == ip;
        const bool idem = truncate_ip(t3, 3) == t3;
        const bool prefix = ip.rfind(t3 + ".", 0) == 0 && std::count(t3.begin(), t3.end(), '.') == 2;
        if (!(ident && idem && prefix)) ++fail_ip;
    }
    std::ostringstream s;
    s << cases << " cases each; failures: min-max " << fail_scale << ", one-hot " << fail_onehot << ", ip truncation "
      << fail_ip;
    return {fail_scale + fail_onehot + fail_ip == 0, s.str()};
}

// 4 ------------------------------------------------------------------------
Outcome supervised() {
    const auto t0 = Clock::now();
    ExperimentConfig cfg;  // 20000 flows, 10% malicious, separation 4, seed 1
    cfg.train.epochs = 10;
    cfg.train.ip_mode = IpMode::full;
    const auto data = generate_synthetic(cfg.data.synthetic);
    const auto split = split_stratified(data, 0.2, cfg.train.seed);
    const auto run = train_and_score(cfg, split);
    const double t = seconds(t0);
    const auto& m = run.confusion;
    std::ostringstream s;
    s << "test " << split.test.size() << " flows, TPR " << fmt(m.tpr()) << ", FPR " << fmt(m.fpr()) << ", "
      << format_fixed(t, 1) << " s";
    return {m.tpr() >= 0.95 && m.fpr() <= 0.05 && t <= 300.0, s.str()};
}

// 5 ------------------------------------------------------------------------
Outcome ablation() {
    ExperimentConfig cfg;
    cfg.data.synthetic.separation = 0.5;
    cfg.train.epochs = 10;
    const auto data = generate_synthetic(cfg.data.synthetic);
    const auto split = split_stratified(data, 0.2, cfg.train.seed);
    const auto res = run_ablation(cfg, split);
    const double full = res.runs[0].matrix.tpr(), first3 = res.runs[1].matrix.tpr(), drop = res.runs[2].matrix.tpr();
    const double d3 = full - first3, dd = full - drop;
    std::ostringstream s;
    s << "TPR full " << fmt(full) << ", first3 " << fmt(first3) << ", drop " << fmt(drop) << "; |full-first3| "
      << fmt(std::abs(d3)) << ", drop margin " << fmt(dd);
    return {std::abs(d3) <= 0.02 && dd > d3, s.str()};
}

// 6 ------------------------------------------------------------------------
Outcome anomaly() {
    SyntheticConfig sc;
    sc.n_flows = 20500;
    sc.malicious_fraction = 500.0 / 20500.0;
    const auto data = generate_synthetic(sc);
    const auto benign = filter_label(data, Label::Benign);
    const auto malicious = filter_label(data, Label::Malicious);
    if (benign.size() != 20000 || malicious.size() != 500) return {false, "unexpected synthetic class counts"};

    Split split;
    split.train = benign.with_records({benign.records.begin(), benign.records.begin() + 15000});
    std::vector<FlowRecord> test(benign.records.begin() + 15000, benign.records.end());
    test.insert(test.end(), malicious.records.begin(), malicious.records.end());
    split.test = benign.with_records(std::move(test));

    ExperimentConfig cfg;
    cfg.model = ModelKind::autoencoder;
    cfg.train.ip_mode = IpMode::drop;
    cfg.train.threshold = 0.03;
    cfg.validate();
    const auto run = train_and_score(cfg, split);

    double sum_b = 0, sum_m = 0;
    for (std::size_t i = 0; i < run.test_scores.size(); ++i) (run.test_labels[i] != 0.0 ? sum_m : sum_b) += run.test_scores[i];
    const double mean_b = sum_b / 5000.0, mean_m = sum_m / 500.0;
    const auto curve = sweep(run.test_labels, run.test_scores, score_thresholds(run.test_scores));
    const CurvePoint* best = nullptr;
    for (const auto& p : curve) {
        if (p.fpr <= 0.01 && (!best || p.tpr > best->tpr)) best = &p;
    }
    std::ostringstream s;
    s << "mean error benign " << mean_b << ", anomalous " << mean_m << " (ratio " << format_fixed(mean_m / mean_b, 2)
      << "); best TPR at FPR<=0.01: " << (best ? fmt(best->tpr) + " @ threshold " + std::to_string(best->threshold) : "none")
      << "; @0.03 FP " << run.confusion.fp << " FN " << run.confusion.fn;
    return {mean_m >= 2.0 * mean_b && best && best->tpr >= 0.2, s.str()};
}

// 7 ------------------------------------------------------------------------
Outcome determinism() {
    std::ostringstream sink;
    bool identical = true;
    for (auto kind : {ModelKind::dnn, ModelKind::autoencoder}) {
        std::string first;
        for (int rep = 0; rep < 2; ++rep) {
            ExperimentConfig cfg;
            cfg.model = kind;
            cfg.data.synthetic.n_flows = 5000;
            cfg.train.epochs = 3;
            if (kind == ModelKind::autoencoder) {
                cfg.train.ip_mode = IpMode::drop;
                cfg.train.threshold = 0.03;
            }
            const auto dir = scratch("det_" + to_string(kind) + std::to_string(rep));
            cfg.output_dir = dir.string();
            cmd_train(cfg, sink);
            const auto text = slurp(dir / "model.json");
            if (rep == 0) first = text;
            else identical = identical && !text.empty() && text == first;
        }
    }

    bool round_trip = true;
    const auto data = generate_synthetic(SyntheticConfig{});
    const auto split = split_stratified(data, 0.2, 1);
    const auto probe = split.test.with_records({split.test.records.begin(), split.test.records.begin() + 1000});
    for (auto kind : {ModelKind::dnn, ModelKind::autoencoder}) {
        ExperimentConfig cfg;
        cfg.model = kind;
        cfg.train.epochs = 2;
        if (kind == ModelKind::autoencoder) cfg.train.ip_mode = IpMode::drop;
        auto run = train_and_score(cfg, split);
        const auto before = score(run.file, probe);
        auto loaded = load_model(save_model(run.file));
        const auto after = score(loaded, probe);
        round_trip = round_trip && before.size() == 1000 && after == before;
    }
    return {identical && round_trip, std::string("byte-identical model files: ") + (identical ? "yes" : "no") +
                                         ", 1000-row round-trip bit-exact: " + (round_trip ? "yes" : "no")};
}

// 8 ------------------------------------------------------------------------
template <class Parse>
bool parses_to(const std::string& file, Parse parse, std::size_t kept, std::size_t malicious) {
    std::ifstream in(data_path(file), std::ios::binary);
    const auto r = parse(in);
    return r.report.rows_kept == kept && r.report.malicious == malicious && r.report.balanced();
}

// Returns the number of inputs that escaped as something other than a dataset
// or a structured error.
template <class Parse>
std::size_t fuzz(const std::string& seed_text, Parse parse, double budget, std::size_t& runs, Rng& rng) {
    const auto t0 = Clock::now();
    std::size_t bad = 0;
    const std::string alphabet = "<>/=\"', \n\r\t.:-0123456789abcxyzINFinfNaN\xef\xbb\xbf";
    while (seconds(t0) < budget) {
        std::string s;
        const auto mode = rng.below(4);
        if (mode == 0) {
            const auto n = rng.below(512);
            for (std::size_t i = 0; i < n; ++i) s += static_cast<char>(rng.below(256));
        } else {
            s = seed_text;
            const auto edits = 1 + rng.below(mode == 3 ? 40 : 6);
            for (std::size_t e = 0; e < edits && !s.empty(); ++e) {
                const auto pos = rng.below(s.size());
                switch (rng.below(5)) {
                    case 0: s[pos] = static_cast<char>(rng.below(256)); break;
                    case 1: s.erase(pos, 1 + rng.below(16)); break;
                    case 2: s.insert(pos, 1, alphabet[rng.below(alphabet.size())]); break;
                    case 3: s.insert(pos, s.substr(rng.below(s.size()), rng.below(64))); break;
                    default: s.resize(pos); break;
                }
            }
        }
        ++runs;
        try {
            std::istringstream in(s);
            const auto r = parse(in);
            if (!r.report.balanced() || r.dataset.size() != r.report.rows_kept) ++bad;
        } catch (const Error&) {
        } catch (...) {
            ++bad;
        }
    }
    return bad;
}

Outcome parsers() {
    auto xml = [](std::istream& in) { return parse_iscx_xml(in); };
    auto csv = [](std::istream& in) { return parse_cic_csv(in); };
    bool fixtures = parses_to("iscx_three_flows.xml", xml, 3, 1) && parses_to("iscx_missing_port.xml", xml, 2, 1) &&
                    parses_to("iscx_empty.xml", xml, 0, 0) && parses_to("cic_five_rows.csv", csv, 5, 2);
    try {
        std::ifstream in(data_path("iscx_malformed.xml"), std::ios::binary);
        parse_iscx_xml(in);
        fixtures = false;
    } catch (const ParseError&) {
    }

    double budget = 30.0;
    if (const char* env = std::getenv("NIDS_FUZZ_SECONDS")) budget = std::atof(env);
    Rng rng(8);
    std::size_t xml_runs = 0, csv_runs = 0;
    const auto xml_bad = fuzz(slurp(data_path("iscx_three_flows.xml")), xml, budget, xml_runs, rng);
    const auto csv_bad = fuzz(slurp(data_path("cic_five_rows.csv")), csv, budget, csv_runs, rng);
    std::ostringstream s;
    s << "fixtures " << (fixtures ? "ok" : "failed") << "; fuzz " << format_fixed(budget, 0) << " s per parser: xml "
      << xml_runs << " inputs, " << xml_bad << " unstructured; csv " << csv_runs << " inputs, " << csv_bad
      << " unstructured";
    return {fixtures && xml_bad == 0 && csv_bad == 0 && xml_runs > 0 && csv_runs > 0, s.str()};
}

}  // namespace

int main() {
    report(1, "gradient correctness", gradients);
    report(2, "embedding size rule", embedding_rule);
    report(3, "preprocessing properties", preprocessing_properties);
    report(4, "supervised synthetic experiment", supervised);
    report(5, "IP ablation", ablation);
    report(6, "anomaly detection experiment", anomaly);
    report(7, "determinism and persistence", determinism);
    report(8, "parser robustness", parsers);
    std::cout << (failures ? "FAILED: " + std::to_string(failures) + " of 8 criteria" : "all 8 criteria passed")
              << std::endl;
    return failures ? 1 : 0;
}
