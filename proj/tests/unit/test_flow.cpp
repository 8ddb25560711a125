#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <set>

#include "helpers.hpp"
#include "nids/flow.hpp"
#include "nids/iscx.hpp"
#include "nids/serialize.hpp"

using namespace nids;

namespace {

FlowRecord iscx_record(const std::string& skip = "", double total_bytes = 65200.0) {
    std::vector<std::pair<std::string, std::string>> cat{
        {"SrcIP", "192.168.2.107"}, {"DstIP", "198.164.30.2"}, {"SrcPort", "4422"}, {"DstPort", "443"},
        {"AppName", "HTTPWeb"},     {"Direction", "L2R"},      {"Protocol", "tcp_ip"}};
    std::vector<std::pair<std::string, double>> cont{{"Duration", 4.0},       {"TotalSrcBytes", 1200.0},
                                                     {"TotalDstBytes", 64000}, {"TotalBytes", total_bytes},
                                                     {"TotalSrcPkts", 14},     {"TotalDstPkts", 48},
                                                     {"TotalPkts", 62}};
    std::erase_if(cat, [&](const auto& kv) { return kv.first == skip; });
    std::erase_if(cont, [&](const auto& kv) { return kv.first == skip; });
    return FlowRecord::from_fields(cat, cont, Label::Benign, "fixture#1");
}

}  // namespace

TEST(ValidateRecord, AllFourteenIscxFeaturesIsOk) {
    const auto schema = FeatureSchema::from_layout(iscx_layout());
    const auto r = validate_record(iscx_record(), schema);
    EXPECT_TRUE(r.ok()) << r.describe();
}

TEST(ValidateRecord, MissingDstPortIsNamed) {
    const auto schema = FeatureSchema::from_layout(iscx_layout());
    const auto r = validate_record(iscx_record("DstPort"), schema);
    ASSERT_FALSE(r.ok());
    EXPECT_NE(r.describe().find("DstPort"), std::string::npos);
}

TEST(ValidateRecord, NonFiniteTotalBytesIsNamed) {
    const auto schema = FeatureSchema::from_layout(iscx_layout());
    for (double bad : {std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
                       std::numeric_limits<double>::quiet_NaN()}) {
        const auto r = validate_record(iscx_record("", bad), schema);
        ASSERT_FALSE(r.ok());
        EXPECT_NE(r.describe().find("TotalBytes"), std::string::npos);
        EXPECT_EQ(r.violations.size(), 1u);
    }
}

TEST(ValidateRecord, KindMismatchAndUnexpectedFields) {
    auto schema = FeatureSchema({FeatureDescriptor::named("Protocol", FeatureKind::Categorical),
                                 FeatureDescriptor::named("Duration", FeatureKind::Continuous)});
    auto rec = FlowRecord::from_fields({{"Duration", "x"}}, {{"Protocol", 1.0}, {"Extra", 2.0}}, Label::Malicious);
    const auto r = validate_record(rec, schema);
    const auto d = r.describe();
    EXPECT_NE(d.find("'Protocol' should be categorical"), std::string::npos);
    EXPECT_NE(d.find("'Duration' should be continuous"), std::string::npos);
    EXPECT_NE(d.find("unexpected field 'Extra'"), std::string::npos);
}

TEST(ValidateRecord, NameInBothKindsIsViolation) {
    auto rec = FlowRecord::from_fields({{"A", "x"}}, {{"A", 1.0}}, Label::Benign);
    const auto r = validate_record(rec, FeatureSchema{});
    EXPECT_NE(r.describe().find("both categorical and continuous"), std::string::npos);
}

TEST(FlowRecord, ValuesMustMatchLayout) {
    auto layout = std::make_shared<FieldLayout>(FieldLayout{{"A"}, {"B", "C"}});
    EXPECT_THROW(FlowRecord(layout, {"x"}, {1.0}, Label::Benign), SchemaError);
    EXPECT_THROW(FlowRecord(layout, {}, {1.0, 2.0}, Label::Benign), SchemaError);
    const FlowRecord ok(layout, {"x"}, {1.0, 2.0}, Label::Malicious, "t#0");
    EXPECT_EQ(*ok.categorical("A"), "x");
    EXPECT_EQ(*ok.continuous("C"), 2.0);
    EXPECT_EQ(ok.categorical("B"), nullptr);
    EXPECT_FALSE(ok.continuous("A").has_value());
    EXPECT_EQ(ok.source_tag(), "t#0");
}

TEST(LabelMap, BinaryMapping) {
    LabelMap m;
    EXPECT_EQ(m("Normal"), Label::Benign);
    EXPECT_EQ(m("BENIGN"), Label::Benign);
    EXPECT_EQ(m(" BENIGN \r"), Label::Benign);
    EXPECT_EQ(m("DDoS"), Label::Malicious);
    EXPECT_EQ(m("Attack"), Label::Malicious);
    EXPECT_EQ(m("normal"), Label::Malicious);
    m.benign = {"ok"};
    EXPECT_EQ(m("ok"), Label::Benign);
    EXPECT_EQ(m("Normal"), Label::Malicious);
}

TEST(Vocabulary, RoundTripProperty) {
    Rng rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<std::string> values;
        const auto n = 1 + rng.below(60);
        for (std::size_t i = 0; i < n; ++i) values.push_back(testutil::random_token(rng));
        const auto v = Vocabulary::from_values(values);
        std::set<std::size_t> seen;
        for (const auto& s : values) {
            const auto idx = v.encode(s);
            ASSERT_GE(idx, 1u);
            ASSERT_LE(idx, v.cardinality());
            ASSERT_EQ(v.decode(idx), s);
            seen.insert(idx);
        }
        // dense: every index in [1, n] is used
        ASSERT_EQ(seen.size(), v.cardinality());
        ASSERT_EQ(*seen.rbegin(), v.cardinality());
        ASSERT_EQ(v.encode("UNSEEN VALUE"), 0u);
    }
}

TEST(Vocabulary, OrderIndependentAndErrors) {
    const auto a = Vocabulary::from_values(std::vector<std::string>{"udp", "tcp", "icmp", "tcp"});
    const auto b = Vocabulary::from_values(std::vector<std::string>{"icmp", "udp", "tcp"});
    EXPECT_EQ(a, b);
    EXPECT_EQ(a.cardinality(), 3u);
    EXPECT_THROW(a.decode(0), SchemaError);
    EXPECT_THROW(a.decode(4), SchemaError);
    EXPECT_THROW(Vocabulary::from_ordered({"x", "y", "x"}), SchemaError);
}

TEST(FeatureSchema, Invariants) {
    EXPECT_THROW(FeatureSchema({FeatureDescriptor::named("a", FeatureKind::Continuous),
                                FeatureDescriptor::named("a", FeatureKind::Categorical)}),
                 SchemaError);
    auto bad = FeatureDescriptor::named("x", FeatureKind::Continuous);
    bad.x_min = 2.0;
    bad.x_max = 1.0;
    EXPECT_THROW(FeatureSchema({bad}), SchemaError);
}

TEST(FeatureSchema, SerializationRoundTripPreservesOrderAndBounds) {
    Rng rng(5);
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<FeatureDescriptor> fs;
        const auto n = 1 + rng.below(12);
        for (std::size_t i = 0; i < n; ++i) {
            const std::string name = "f" + std::to_string(i) + "_" + testutil::random_token(rng);
            if (rng.bernoulli(0.5)) {
                auto d = FeatureDescriptor::named(name, FeatureKind::Categorical);
                std::vector<std::string> vals;
                for (std::size_t k = 0, m = 1 + rng.below(20); k < m; ++k) vals.push_back(testutil::random_token(rng));
                d.vocabulary = Vocabulary::from_values(vals);
                d.embedding_dims = 1 + rng.below(4);
                if (rng.bernoulli(0.3)) d.ip_octets = 3;
                fs.push_back(std::move(d));
            } else {
                auto d = FeatureDescriptor::named(name, FeatureKind::Continuous);
                const double a = testutil::random_real(rng), b = testutil::random_real(rng);
                d.x_min = std::min(a, b);
                d.x_max = std::max(a, b);
                fs.push_back(std::move(d));
            }
        }
        const FeatureSchema s(fs, true);
        const auto text = schema_to_json(s).dump();
        const auto back = schema_from_json(nlohmann::json::parse(text));
        ASSERT_EQ(back, s);
    }
}
