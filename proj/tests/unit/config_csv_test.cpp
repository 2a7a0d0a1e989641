#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "regmem/config.hpp"
#include "regmem/csv.hpp"
#include "regmem/errors.hpp"

using namespace regmem;
namespace fs = std::filesystem;

namespace {

class TempDir : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("regmem_cfg_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string put(const std::string& name, const std::string& text) {
        const fs::path p = dir_ / name;
        std::ofstream(p) << text;
        return p.string();
    }

    fs::path dir_;
};

std::string message_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const std::exception& e) {
        return e.what();
    }
    return {};
}

}  // namespace

TEST(FormatDouble, RoundTripsAndIsShort) {
    for (double x : {0.1, 1.0 / 3.0, 6.25e-3, 1e-300, -2.5, 1584.5}) {
        EXPECT_EQ(parse_double(format_double(x), ""), x);
    }
    EXPECT_EQ(format_double(0.25), "0.25");
    EXPECT_EQ(format_double(-0.0), "0");
    EXPECT_EQ(format_double(std::numeric_limits<double>::infinity()), "inf");
}

TEST(Config, DefaultsValidateAndHashIsStable) {
    ExperimentConfig a, b;
    EXPECT_NO_THROW(a.validate());
    EXPECT_EQ(a.hash(), b.hash());
    EXPECT_EQ(a.canonical(), b.canonical());
    b.set("array.r_seg_row", "2");
    EXPECT_NE(a.hash(), b.hash());
}

TEST(Config, EveryKeyRoundTrips) {
    ExperimentConfig a;
    ExperimentConfig b;
    b.set("l_det", "0.5e-9");
    for (const auto& k : a.keys()) b.set(k, a.get(k));
    EXPECT_EQ(a.canonical(), b.canonical());
}

TEST(Config, OverridesAndTypedValues) {
    ExperimentConfig c;
    c.apply_override("array.n_rows=4");
    c.apply_override(" sweep.peaks = 0.5, -0.5 ");
    c.apply_override("array.ideal_switches=true");
    EXPECT_EQ(c.array.n_rows, 4);
    EXPECT_EQ(c.sweep.peaks, (std::vector<double>{0.5, -0.5}));
    EXPECT_TRUE(c.array.ideal_switches);
    EXPECT_THROW(c.apply_override("array.n_rows"), ConfigError);
    EXPECT_THROW(c.apply_override("array.n_rows=2.5"), ConfigError);
    EXPECT_THROW(c.apply_override("program.policy=random"), ConfigError);
    const std::string m = message_of([&] { c.apply_override("no.such.key=1"); });
    EXPECT_NE(m.find("unknown key 'no.such.key'"), std::string::npos) << m;
}

TEST_F(TempDir, FilesLayerInOrder) {
    const auto a = put("a.conf", "# base\narray.r_seg_row = 5\nsweep.rate = 2\n");
    const auto b = put("b.conf", "\nsweep.rate = 3   # later wins\n");
    ExperimentConfig c;
    c.load_file(a);
    c.load_file(b);
    EXPECT_EQ(c.array.r_seg_row, 5.0);
    EXPECT_EQ(c.sweep.rate, 3.0);
}

TEST_F(TempDir, UnknownKeyNamesTheLine) {
    const auto p = put("bad.conf", "array.n_rows = 2\n\n# note\narray.n_rowz = 3\n");
    ExperimentConfig c;
    const std::string m = message_of([&] { c.load_file(p); });
    EXPECT_NE(m.find("bad.conf:4"), std::string::npos) << m;
    EXPECT_NE(m.find("array.n_rowz"), std::string::npos) << m;
    EXPECT_THROW(c.load_file((dir_ / "missing.conf").string()), ConfigError);
}

TEST_F(TempDir, ShippedDefaultFileMatchesTheBuiltInDefaults) {
    ExperimentConfig c;
    c.load_file(std::string(REGMEM_CONFIG_DIR) + "/default.conf");
    EXPECT_EQ(c.hash(), ExperimentConfig{}.hash());
}

TEST(Config, ValidationCatchesBadValues) {
    ExperimentConfig c;
    c.set("transient.dt_max", "0");
    EXPECT_THROW(c.validate(), ConfigError);
    c = ExperimentConfig{};
    c.set("array.initial", "100");
    EXPECT_THROW(c.validate(), ConfigError);
    c = ExperimentConfig{};
    c.set("array.initial", "2.5");
    EXPECT_EQ(c.initial_states()[0].n_disc, 2.5);
    EXPECT_EQ(c.initial_states().size(), 4u);
}

TEST(Csv, ParsesHeaderCommentsAndBlanks) {
    std::istringstream in("# note\nv0,v1\n\n0.25, 0.1\n0,0\n");
    const auto t = parse_numeric_csv(in, "x.csv");
    EXPECT_EQ(t.header, (std::vector<std::string>{"v0", "v1"}));
    ASSERT_EQ(t.rows.size(), 2u);
    EXPECT_EQ(t.rows[0][1], 0.1);
}

TEST(Csv, BadCellNamesRowAndColumn) {
    std::istringstream in("1,2,3\n4,x,6\n");
    const std::string m = message_of([&] { parse_numeric_csv(in, "w.csv"); });
    EXPECT_NE(m.find("row 2, column 2"), std::string::npos) << m;

    std::istringstream ragged("1,2\n3\n");
    EXPECT_THROW(parse_numeric_csv(ragged, "w.csv"), ParseError);
    std::istringstream empty("a,b\n");
    EXPECT_THROW(parse_numeric_csv(empty, "w.csv"), ParseError);
}

TEST(Csv, RowsAndHeader) {
    std::ostringstream out;
    write_csv_header(out, "regmem sweep", 0xabcULL, {"extra line"});
    write_csv_row(out, std::vector<double>{0.5, -0.0, 1e-6});
    const std::string s = out.str();
    EXPECT_EQ(s.rfind("# ", 0), 0u);
    EXPECT_NE(s.find("0000000000000abc"), std::string::npos);
    EXPECT_NE(s.find("# extra line"), std::string::npos);
    EXPECT_NE(s.find("0.5,0,1e-06\n"), std::string::npos) << s;
    EXPECT_EQ(hex64(255), "00000000000000ff");
}

TEST_F(TempDir, WriteFileRefusesToOverwrite) {
    const std::string p = (dir_ / "out.csv").string();
    write_file(p, "a\n", false);
    EXPECT_THROW(write_file(p, "b\n", false), OutputExists);
    write_file(p, "c\n", true);
    std::ifstream in(p);
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "c");
}
