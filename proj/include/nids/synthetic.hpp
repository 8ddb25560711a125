#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "nids/error.hpp"
#include "nids/flow.hpp"
#include "nids/rng.hpp"

namespace nids {

// Parameters of the synthetic labeled-flow generator.
//
// Continuous statistics come from a two-factor model plus bounded per-feature
// noise. Malicious flows are shifted by `separation` along a fixed direction.
// Once separation exceeds 3.0 the classes are linearly separable in the first
// feature.
//
// A fraction `ip_enrichment` of malicious flows originate from a small pool
// of attacker hosts in two dedicated /24 subnets; all other flows use benign
// host addresses. Ports, destination addresses and protocol carry no signal.
struct SyntheticConfig {
    std::size_t n_flows = 20000;
    double malicious_fraction = 0.1;
    std::uint64_t seed = 1;
    double separation = 4.0;
    std::size_t src_ips = 400;
    std::size_t dst_ips = 60;
    std::size_t src_ports = 2000;
    std::size_t dst_ports = 24;
    std::size_t attacker_ips = 12;
    double ip_enrichment = 0.7;
};

inline const FieldLayout& synthetic_layout() {
    static const FieldLayout layout{
        {"SrcIP", "DstIP", "SrcPort", "DstPort", "Protocol"},
        {"Duration", "TotalSrcBytes", "TotalDstBytes", "TotalSrcPkts", "TotalDstPkts", "MeanPktLen", "FlowRate",
         "IdleMean"}};
    return layout;
}

inline std::size_t synthetic_malicious_count(const SyntheticConfig& c) {
    return static_cast<std::size_t>(std::llround(static_cast<double>(c.n_flows) * c.malicious_fraction));
}

inline void validate(const SyntheticConfig& c) {
    if (c.n_flows == 0) throw ConfigError("synthetic n_flows must be positive");
    if (!(c.malicious_fraction > 0.0 && c.malicious_fraction < 1.0)) {
        throw ConfigError("synthetic malicious_fraction must lie in (0,1)");
    }
    const auto mal = synthetic_malicious_count(c);
    if (mal == 0 || mal >= c.n_flows) {
        throw ConfigError("synthetic config must produce at least one flow of each class");
    }
    if (!(c.separation >= 0.0) || !std::isfinite(c.separation)) {
        throw ConfigError("synthetic separation must be finite and non-negative");
    }
    if (c.src_ips == 0 || c.dst_ips == 0 || c.src_ports == 0 || c.dst_ports == 0 || c.attacker_ips == 0) {
        throw ConfigError("synthetic vocabulary sizes must be positive");
    }
    if (!(c.ip_enrichment >= 0.0 && c.ip_enrichment <= 1.0)) {
        throw ConfigError("synthetic ip_enrichment must lie in [0,1]");
    }
}

// Deterministic in config.seed: the same config yields the same records,
// values and order.
inline LabeledDataset generate_synthetic(const SyntheticConfig& config) {
    validate(config);
    constexpr std::size_t k = 8;
    // loadings on the two latent factors, noise half-width, output scale
    static constexpr std::array<double, k> load_a{0.6, 0.8, 0.5, 0.7, 0.4, -0.3, 0.5, -0.6};
    static constexpr std::array<double, k> load_b{0.3, -0.2, 0.6, 0.1, 0.7, 0.6, -0.5, 0.2};
    static constexpr std::array<double, k> shift{1.0, -0.8, 0.9, -1.0, 0.7, 0.9, -0.7, 0.8};
    static constexpr std::array<double, k> scale{30.0, 1200.0, 5000.0, 12.0, 20.0, 400.0, 900.0, 8.0};
    constexpr double noise = 0.6;

    static constexpr std::array<const char*, 24> common_ports{
        "80",   "443",  "53",   "22",   "21",   "25",   "110",  "143",  "123",  "445",  "3389", "8080",
        "993",  "995",  "587",  "3306", "5432", "6379", "1433", "5900", "8443", "139",  "161",  "389"};

    Rng rng(config.seed);
    const std::size_t n_mal = synthetic_malicious_count(config);
    std::vector<Label> labels(config.n_flows, Label::Benign);
    for (std::size_t i = 0; i < n_mal; ++i) labels[i] = Label::Malicious;
    rng.shuffle(labels);

    auto benign_host = [](std::size_t i) {
        return "192.168." + std::to_string(i % 40) + "." + std::to_string(2 + i / 40);
    };
    auto attacker_host = [](std::size_t i) {
        return "172.16." + std::to_string(66 + i % 2) + "." + std::to_string(10 + i / 2);
    };
    auto dst_host = [](std::size_t i) {
        return "10.0." + std::to_string(i / 250) + "." + std::to_string(1 + i % 250);
    };
    auto dst_port = [&](std::size_t i) {
        return i < common_ports.size() ? std::string(common_ports[i]) : std::to_string(8000 + i);
    };

    auto layout = std::make_shared<FieldLayout>(synthetic_layout());
    LabeledDataset ds;
    ds.schema = FeatureSchema::from_layout(*layout);
    ds.provenance.files.push_back("synthetic");
    ds.provenance.seed = config.seed;
    ds.records.reserve(config.n_flows);

    for (std::size_t i = 0; i < config.n_flows; ++i) {
        const bool mal = labels[i] == Label::Malicious;
        const double u1 = rng.uniform(-1.0, 1.0);
        const double u2 = rng.uniform(-1.0, 1.0);
        std::vector<double> cont(k);
        for (std::size_t j = 0; j < k; ++j) {
            double z = load_a[j] * u1 + load_b[j] * u2 + rng.uniform(-noise, noise);
            if (mal) z += config.separation * shift[j];
            cont[j] = scale[j] * std::exp(z);
        }

        std::string src;
        if (mal && rng.bernoulli(config.ip_enrichment)) {
            src = attacker_host(rng.below(config.attacker_ips));
        } else {
            src = benign_host(rng.below(config.src_ips));
        }
        std::string dst = dst_host(rng.below(config.dst_ips));
        std::string sport = std::to_string(1024 + rng.below(config.src_ports));
        std::string dport = dst_port(rng.below(config.dst_ports));
        const double p = rng.uniform();
        std::string proto = p < 0.7 ? "6" : (p < 0.95 ? "17" : "1");

        ds.records.emplace_back(layout,
                                std::vector<std::string>{std::move(src), std::move(dst), std::move(sport),
                                                         std::move(dport), std::move(proto)},
                                std::move(cont), labels[i], "synthetic#" + std::to_string(i));
    }
    return ds;
}

}  // namespace nids
