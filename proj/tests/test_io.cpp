#include "sfda/io.hpp"
#include "sfda/sfda_core.hpp"
#include "sfda/simgen.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>

namespace {

namespace fs = std::filesystem;
using sfda::Matrix;

class TempDir : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("sfda_io_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }
    std::string file(const std::string& name, const std::string& content = {}) {
        const auto path = (dir_ / name).string();
        if (!content.empty()) std::ofstream(path) << content;
        return path;
    }
    fs::path dir_;
};

using Csv = TempDir;
using ModelFile = TempDir;

TEST_F(Csv, HeaderIsDetectedAndSkipped) {
    const auto with = sfda::io::read_dataset(file("a.csv", "label,x1,x2\n1,0.5,2\n2,1e-3,-4\n1,7,8\n"));
    const auto without = sfda::io::read_dataset(file("b.csv", "1,0.5,2\n2,1e-3,-4\n1,7,8\n"));
    EXPECT_TRUE(with.observations == without.observations);
    EXPECT_EQ(with.labels, (std::vector<int>{1, 2, 1}));
    EXPECT_EQ(with.observations(1, 0), 1e-3);
}

TEST_F(Csv, MalformedInputsAreValidationErrors) {
    auto tag_of = [&](const std::string& content) {
        try {
            sfda::io::read_dataset(file("bad.csv", content));
        } catch (const sfda::ValidationError& e) {
            return e.tag();
        }
        return std::string("none");
    };
    EXPECT_EQ(tag_of("1,2,3\n2,4\n"), "csv");
    EXPECT_EQ(tag_of("1,2,3\n2,x,4\n"), "csv");
    EXPECT_EQ(tag_of("label,x\n"), "csv");
    EXPECT_EQ(tag_of("1.5,2\n2,3\n"), "label_range");
    EXPECT_EQ(tag_of("0,2\n1,3\n"), "label_range");
    EXPECT_THROW(sfda::io::read_dataset(file("missing.csv")), sfda::IoError);
}

TEST(FormatDouble, RoundTripsExactly) {
    std::mt19937_64 gen(1);
    std::uniform_int_distribution<std::uint64_t> bits;
    for (int i = 0; i < 10000; ++i) {
        double v;
        const auto b = bits(gen);
        std::memcpy(&v, &b, sizeof v);
        if (!std::isfinite(v)) continue;
        EXPECT_EQ(std::strtod(sfda::io::format_double(v).c_str(), nullptr), v);
    }
    EXPECT_EQ(sfda::io::format_double(0.1), "0.1");
    EXPECT_EQ(sfda::io::format_double(2), "2");
}

TEST_F(Csv, DatasetRoundTrip) {
    std::mt19937_64 gen(2);
    Matrix x(30, 4);
    for (int i = 0; i < 30; ++i) x.row(i) = oracle::random_vector(gen, 4).transpose() * 1e3;
    std::vector<int> labels;
    for (int i = 0; i < 30; ++i) labels.push_back(i % 3 + 1);
    const auto d = sfda::make_dataset(x, labels);
    const auto path = file("d.csv");
    sfda::io::write_dataset(path, d);
    EXPECT_FALSE(fs::exists(path + ".partial"));
    const auto back = sfda::io::read_dataset(path);
    EXPECT_TRUE(back.observations == d.observations);
    EXPECT_EQ(back.labels, d.labels);
}

TEST_F(ModelFile, RoundTripPreservesPredictions) {
    sfda::SimScenario scn;
    scn.model = sfda::SimModel::Sim2;
    scn.p = 120;
    scn.n_total = 10150;
    scn.seed = 3;
    const auto data = sfda::simulate(scn);
    sfda::FitParams f;
    f.penalty = {1, 0.1};
    f.kappa = 0.01;
    const auto m = sfda::fit(data.train, f);
    const auto path = file("m.json");
    sfda::io::save_model(path, m);
    const auto loaded = sfda::io::load_model(path);
    EXPECT_TRUE(loaded.components == m.components);
    EXPECT_TRUE(loaded.discriminant == m.discriminant);
    EXPECT_EQ(loaded.params.kappa, f.kappa);
    EXPECT_EQ(sfda::predict(loaded, data.test.observations), sfda::predict(m, data.test.observations));
}

TEST_F(ModelFile, RejectsForeignOrDamagedDocuments) {
    EXPECT_THROW(sfda::io::load_model(file("a.json", "{\"format\":\"other\",\"version\":1}")), sfda::ValidationError);
    EXPECT_THROW(sfda::io::load_model(file("b.json", "{\"format\":\"sfda-model\",\"version\":2}")), sfda::ValidationError);
    EXPECT_THROW(sfda::io::load_model(file("c.json", "{not json")), sfda::ValidationError);
    EXPECT_THROW(sfda::io::load_model(file("d.json", "{\"format\":\"sfda-model\",\"version\":1,\"p\":3}")),
                 sfda::ValidationError);
}

TEST_F(Csv, RecordsSplitChannelMajor) {
    const auto recs = sfda::io::read_records(file("r.csv", "2,1,2,3,4,5,6\n"), 2);
    ASSERT_EQ(recs.size(), 1u);
    EXPECT_EQ(recs[0].label, 2);
    EXPECT_EQ(recs[0].channels(0, 2), 3);
    EXPECT_EQ(recs[0].channels(1, 0), 4);
    EXPECT_THROW(sfda::io::read_records(file("s.csv", "1,1,2,3\n"), 2), sfda::ValidationError);
}

}  // namespace
