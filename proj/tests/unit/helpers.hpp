#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "nids/flow.hpp"
#include "nids/rng.hpp"
#include "nids/synthetic.hpp"

namespace testutil {

inline std::string data_path(const std::string& name) { return std::string(NIDS_TEST_DATA) + "/" + name; }

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("nids_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

inline std::string random_ip(nids::Rng& rng) {
    std::string s;
    for (int i = 0; i < 4; ++i) {
        if (i) s += '.';
        s += std::to_string(rng.below(256));
    }
    return s;
}

inline std::string random_token(nids::Rng& rng, std::size_t max_len = 8) {
    static const char alphabet[] = "abcdefghijklmnopqrstuvwxyz0123456789._-";
    std::string s;
    const auto n = 1 + rng.below(max_len);
    for (std::size_t i = 0; i < n; ++i) s += alphabet[rng.below(sizeof(alphabet) - 1)];
    return s;
}

// A double spread over many magnitudes, both signs.
inline double random_real(nids::Rng& rng) {
    const double mag = std::pow(10.0, rng.uniform(-6.0, 6.0));
    return rng.bernoulli(0.5) ? mag : -mag;
}

inline nids::LabeledDataset small_synthetic(std::size_t n, double separation = 4.0, std::uint64_t seed = 3) {
    nids::SyntheticConfig c;
    c.n_flows = n;
    c.separation = separation;
    c.seed = seed;
    return nids::generate_synthetic(c);
}

}  // namespace testutil
