#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "nids/error.hpp"
#include "nids/flow.hpp"
#include "nids/rng.hpp"

namespace nids {

struct Split {
    LabeledDataset train;
    LabeledDataset test;
};

// Stratified random split. Each class contributes round(n_c * test_fraction)
// records to the test side, clamped so both sides keep at least one record of
// every class. Records keep their original relative order on both sides.
inline Split split_stratified(const LabeledDataset& data, double test_fraction, std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ConfigError("test_fraction must lie in (0,1)");

    std::vector<std::size_t> by_class[2];
    for (std::size_t i = 0; i < data.records.size(); ++i) by_class[to_int(data.records[i].label())].push_back(i);
    for (const auto& idx : by_class) {
        if (idx.size() < 2) throw ConfigError("stratified split needs at least 2 records of each class");
    }

    Rng rng(seed);
    std::vector<bool> in_test(data.records.size(), false);
    for (auto& idx : by_class) {
        rng.shuffle(idx);
        const double want = static_cast<double>(idx.size()) * test_fraction;
        auto n = static_cast<std::size_t>(std::llround(want));
        n = std::clamp<std::size_t>(n, 1, idx.size() - 1);
        for (std::size_t j = 0; j < n; ++j) in_test[idx[j]] = true;
    }

    std::vector<FlowRecord> train, test;
    for (std::size_t i = 0; i < data.records.size(); ++i) {
        (in_test[i] ? test : train).push_back(data.records[i]);
    }
    return {data.with_records(std::move(train)), data.with_records(std::move(test))};
}

// Records of one class only, in original order.
inline LabeledDataset filter_label(const LabeledDataset& data, Label label) {
    std::vector<FlowRecord> out;
    for (const auto& r : data.records) {
        if (r.label() == label) out.push_back(r);
    }
    return data.with_records(std::move(out));
}

}  // namespace nids
