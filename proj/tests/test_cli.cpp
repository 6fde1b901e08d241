#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "pakan/data.hpp"

namespace fs = std::filesystem;

namespace {

struct CliRun {
    int code = -1;
    std::string out;
};

CliRun pakan_cli(const std::string& args) {
    const std::string cmd = std::string(PAKAN_CLI_PATH) + " " + args + " 2>&1";
    CliRun r;
    FILE* p = popen(cmd.c_str(), "r");
    if (!p) return r;
    char buf[4096];
    std::size_t n;
    while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
    const int status = pclose(p);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

class Cli : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        dir_ = fs::temp_directory_path() / "pakan_cli_test";
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    static void TearDownTestSuite() { fs::remove_all(dir_); }
    static fs::path dir_;
};
fs::path Cli::dir_;

}  // namespace

TEST_F(Cli, ExitCodes) {
    EXPECT_EQ(pakan_cli("--help").code, 0);
    EXPECT_EQ(pakan_cli("").code, 2);
    EXPECT_EQ(pakan_cli("synth --out " + (dir_ / "x").string() + " --colour red").code, 2);
    EXPECT_EQ(pakan_cli("infer --checkpoint /nonexistent.pktn --sample /nonexistent.pktn --out o.pktn").code, 2);
    EXPECT_EQ(pakan_cli("eval-reduced --dataset /nonexistent --predictor gt").code, 2);
    const CliRun r = pakan_cli("synth --count 1 --out " + (dir_ / "y").string());
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.out.find("error"), std::string::npos);
}

TEST_F(Cli, SynthIsByteIdentical) {
    ASSERT_EQ(pakan_cli("synth --seed 3 --count 4 --out " + (dir_ / "a").string()).code, 0);
    ASSERT_EQ(pakan_cli("synth --seed 3 --count 4 --out " + (dir_ / "b").string()).code, 0);
    std::size_t files = 0;
    for (const auto& e : fs::directory_iterator(dir_ / "a")) {
        EXPECT_EQ(slurp(e.path()), slurp(dir_ / "b" / e.path().filename())) << e.path();
        ++files;
    }
    EXPECT_EQ(files, 5u);  // manifest plus four samples
}

TEST_F(Cli, EvalReducedOnGroundTruth) {
    ASSERT_EQ(pakan_cli("synth --seed 4 --count 8 --out " + (dir_ / "ds").string()).code, 0);
    const CliRun r = pakan_cli("eval-reduced --dataset " + (dir_ / "ds").string() + " --predictor gt");
    ASSERT_EQ(r.code, 0) << r.out;
    std::map<std::string, double> mean;
    std::istringstream is(r.out);
    for (std::string tag, name, value; is >> tag;) {
        if (tag == "#") {
            std::getline(is, name);
            continue;
        }
        is >> name >> value;
        if (tag == "mean") mean[name] = std::stod(value);
    }
    EXPECT_EQ(mean.at("psnr"), 100.0);
    EXPECT_NEAR(mean.at("sam"), 0.0, 1e-6);
    EXPECT_EQ(mean.at("ergas"), 0.0);
    EXPECT_NEAR(mean.at("q2n"), 1.0, 1e-9);
}

TEST_F(Cli, TrainEvalInfer) {
    const std::string ds = (dir_ / "tds").string(), ckpt = (dir_ / "net.pktn").string();
    ASSERT_EQ(pakan_cli("synth --seed 5 --count 6 --out " + ds).code, 0);
    {
        std::ofstream cfg(dir_ / "train.cfg");
        cfg << "epochs = 1\nwidth = 8\ndepth = 1\nbatch_size = 4\n";
    }
    const CliRun tr = pakan_cli("train --config " + (dir_ / "train.cfg").string() + " --dataset " + ds + " --checkpoint " + ckpt);
    ASSERT_EQ(tr.code, 0) << tr.out;
    EXPECT_EQ(tr.out.rfind("epoch\ttrain_l1\tval_l1\tval_sam\tlr\n", 0), 0u) << tr.out;
    EXPECT_TRUE(fs::exists(ckpt + ".manifest"));
    EXPECT_EQ(pakan_cli("train --dataset " + ds + " --momentum 0.9").code, 2);

    const CliRun ev = pakan_cli("eval-full --dataset " + ds + " --checkpoint " + ckpt + " --out " + (dir_ / "full.tsv").string());
    ASSERT_EQ(ev.code, 0) << ev.out;
    EXPECT_EQ(slurp(dir_ / "full.tsv").rfind("# resolution=full\n", 0), 0u);

    const auto m = pakan::read_manifest(ds);
    const std::string sample = (fs::path(ds) / m.rows_for(pakan::Split::test).front().path).string();
    const CliRun inf = pakan_cli("infer --checkpoint " + ckpt + " --sample " + sample + " --out " + (dir_ / "pred.pktn").string() +
                              " --png " + (dir_ / "pred.png").string() + " --residual " + (dir_ / "res.png").string());
    ASSERT_EQ(inf.code, 0) << inf.out;
    const auto pred = pakan::pktn_read(dir_ / "pred.pktn");
    EXPECT_EQ(pakan::find_entry(pred, "pred").dims(), (pakan::Shape{4, 64, 64}));
    EXPECT_EQ(pakan::read_png(dir_ / "pred.png").width, 64u);
    EXPECT_EQ(pakan::read_png(dir_ / "res.png").height, 64u);
}

TEST_F(Cli, GradcheckReportsEveryOperator) {
    const CliRun r = pakan_cli("gradcheck");
    ASSERT_EQ(r.code, 0) << r.out;
    std::size_t lines = 0;
    std::istringstream is(r.out);
    for (std::string line; std::getline(is, line);) {
        EXPECT_NE(line.find("\tok"), std::string::npos) << line;
        ++lines;
    }
    EXPECT_GT(lines, 20u);
}
