#include <gtest/gtest.h>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "commands.hpp"
#include "regmem/csv.hpp"
#include "regmem/errors.hpp"

using namespace regmem;
using namespace regmem::cli;
namespace fs = std::filesystem;

namespace {

const std::string kConfigs = REGMEM_CONFIG_DIR;

std::vector<std::string> data_lines(const std::string& csv) {
    std::vector<std::string> out;
    std::istringstream in(csv);
    std::string line;
    while (std::getline(in, line))
        if (!line.empty() && line[0] != '#') out.push_back(line);
    return out;
}

class Scratch : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("regmem_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
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

int exit_code_of(const std::string& args) {
    const std::string cmd = std::string(REGMEM_BIN) + " " + args + " > /dev/null 2>&1";
    const int st = std::system(cmd.c_str());
    return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

}  // namespace

TEST(Sweep, SameCommandSameBytes) {
    RunContext ctx;
    ctx.command_line = "regmem sweep";
    SweepArgs a;
    a.rates = {1e3, 1e4};
    a.v_max = 0.3;
    const std::string one = cmd_sweep(ctx, a);
    EXPECT_EQ(one, cmd_sweep(ctx, a));
    ctx.jobs = 2;
    EXPECT_EQ(one, cmd_sweep(ctx, a));
    const auto rows = data_lines(one);
    ASSERT_GT(rows.size(), 10u);
    EXPECT_EQ(rows[0], "rate,t,v,i,n_disc");
}

TEST(Sweep, SingleRateHasNoRateColumn) {
    RunContext ctx;
    SweepArgs a;
    a.rates = {1e6};
    a.v_max = 0.2;
    const auto rows = data_lines(cmd_sweep(ctx, a));
    EXPECT_EQ(rows[0], "t,v,i,n_disc");
    EXPECT_EQ(rows[1], "0,0,0,20");  // starts from LRS
}

TEST(Vmm, FixtureReadsTheExpectedCodes) {
    RunContext ctx;
    ctx.cfg.load_file(kConfigs + "/parasitic_fixture.conf");
    VmmArgs a;
    a.input_path = kConfigs + "/vmm_input.csv";
    a.fixed_g_path = kConfigs + "/worked_example_g.csv";
    const auto rows = data_lines(cmd_vmm(ctx, a));
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_NE(rows[1].find(",129,134"), std::string::npos) << rows[1];
}

TEST_F(Scratch, VmmZeroInputGivesZeroCodes) {
    RunContext ctx;
    VmmArgs a;
    a.input_path = put("in.csv", "0,0\n0.1,0\n");
    const auto rows = data_lines(cmd_vmm(ctx, a));
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_EQ(rows[1].substr(rows[1].size() - 4), ",0,0");
}

TEST_F(Scratch, VmmRejectsMalformedInput) {
    RunContext ctx;
    VmmArgs a;
    a.input_path = put("in.csv", "0.1,zero\n");
    EXPECT_THROW(cmd_vmm(ctx, a), ParseError);
    a.input_path = put("in3.csv", "0.1,0.1,0.1\n");
    EXPECT_THROW(cmd_vmm(ctx, a), InputError);
    a.input_path = put("hot.csv", "0.5,0.1\n");
    EXPECT_THROW(cmd_vmm(ctx, a), ReadVoltageOutOfRange);
}

TEST_F(Scratch, ProgramSingleCellAndStatesRoundTrip) {
    RunContext ctx;
    ctx.cfg.set("array.ideal_switches", "true");
    ProgramArgs a;
    a.weights_path = put("w.csv", "0.5\n");
    const ProgramOutput out = cmd_program(ctx, a);
    EXPECT_TRUE(out.all_succeeded) << out.summary;
    const auto rows = data_lines(out.report_csv);
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[0], "row,col,weight,g_target,g_initial,g_final,weight_final,rel_error,pulses,status");
    EXPECT_NE(rows[1].find(",ok"), std::string::npos);

    const auto states = put("s.csv", out.states_csv);
    const auto back = read_states(states, 1, 1);
    ASSERT_EQ(back.size(), 1u);
    EXPECT_GT(back[0].n_disc, ctx.cfg.device.n_disc_min);
    EXPECT_THROW(read_states(states, 2, 2), InputError);
}

TEST_F(Scratch, ProgramRejectsBadWeights) {
    RunContext ctx;
    ProgramArgs a;
    a.weights_path = put("w.csv", "0.5,1\n0.2\n");
    EXPECT_THROW(cmd_program(ctx, a), ParseError);
    a.weights_path = put("w2.csv", "1.5\n");
    EXPECT_THROW(cmd_program(ctx, a), WeightOutOfRange);
}

TEST(Pulse, DefaultSequenceSwitchesAndReads) {
    RunContext ctx;
    const std::string csv = cmd_pulse(ctx, {});
    EXPECT_NE(csv.find("# final n_disc"), std::string::npos);
    const auto rows = data_lines(csv);
    EXPECT_EQ(rows[0], "t,event,v_cell,i_cell,n_disc,i_column,i_drive");
    EXPECT_EQ(csv, cmd_pulse(ctx, {}));
}

TEST(Transient, ShortPwmRun) {
    RunContext ctx;
    ctx.cfg.set("drive.periods", "2");
    ctx.cfg.set("drive.width", "0.5e-3");
    const auto rows = data_lines(cmd_transient(ctx));
    EXPECT_EQ(rows[0].substr(0, 2), "t,");
    EXPECT_GT(rows.size(), 4u);
}

TEST(ParallelFor, RunsEveryIndexAndRethrowsTheFirstFailure) {
    std::atomic<int> sum{0};
    parallel_for(100, 4, [&](int i) { sum += i; });
    EXPECT_EQ(sum.load(), 4950);
    try {
        parallel_for(10, 3, [](int i) {
            if (i == 3 || i == 7) throw InvalidArgument("index " + std::to_string(i));
        });
        FAIL();
    } catch (const InvalidArgument& e) {
        EXPECT_STREQ(e.what(), "index 3");
    }
}

TEST(ExitCodes, InputErrorsAndNumericalFailures) {
    EXPECT_EQ(exit_code_of("--version"), 0);
    EXPECT_EQ(exit_code_of("--bogus"), 1);
    EXPECT_EQ(exit_code_of("--set no.such=1 sweep"), 1);
    EXPECT_EQ(exit_code_of("vmm /nonexistent/input.csv"), 1);
    // one Newton iteration and one source step cannot reach a nonlinear operating point
    EXPECT_EQ(exit_code_of("--set solver.max_iterations=1 --set solver.source_steps=1 vmm " +
                           kConfigs + "/vmm_input.csv"),
              2);
}
