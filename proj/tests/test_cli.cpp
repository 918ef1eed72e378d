#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "json.hpp"

namespace fs = std::filesystem;

namespace {

struct CliRun
{
    int code = -1;
    std::string out;
};

CliRun cli(const std::string& args, const fs::path& cwd)
{
    const fs::path log = cwd / "cli_output.txt";
    const std::string cmd = "cd '" + cwd.string() + "' && '" FCAUG_CLI "' " + args + " > '" + log.string() + "' 2>&1";
    const int status = std::system(cmd.c_str());
    CliRun r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream in(log);
    std::stringstream ss;
    ss << in.rdbuf();
    r.out = ss.str();
    return r;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

class Cli : public ::testing::Test
{
protected:
    void SetUp() override
    {
        dir = fs::temp_directory_path() / ("fcaug_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    void TearDown() override { fs::remove_all(dir); }

    fs::path dir;
};

}  // namespace

TEST_F(Cli, HelpAndErrors)
{
    EXPECT_EQ(cli("--help", dir).code, 0);
    EXPECT_NE(cli("", dir).code, 0);
    const CliRun miss = cli("gaze2map --log nope.csv --out g", dir);
    EXPECT_EQ(miss.code, 2);
    EXPECT_NE(miss.out.find("nope.csv"), std::string::npos);
    EXPECT_NE(cli("augment --image x.pgm --mode sideways --out a", dir).code, 0);
}

TEST_F(Cli, Gaze2Map)
{
    std::ofstream(dir / "log.csv") << "# two images\na,0.5,0.5,0\na,0.2,0.3,10\nb,0.7,0.1,0\n";
    const CliRun r = cli("gaze2map --log log.csv --size 128 --out g", dir);
    ASSERT_EQ(r.code, 0) << r.out;
    EXPECT_TRUE(fs::exists(dir / "g" / "a.smap"));
    EXPECT_TRUE(fs::exists(dir / "g" / "b.smap"));
    EXPECT_EQ(slurp(dir / "g" / "a.smap").substr(0, 4), "SMAP");
    EXPECT_EQ(fs::file_size(dir / "g" / "a.smap"), 12u + 4u * 128 * 128);
}

TEST_F(Cli, SynthWritesDataset)
{
    ASSERT_EQ(cli("synth --per-class 20 --size 32 --out d --seed 1", dir).code, 0);
    int images = 0;
    for (const auto& e : fs::directory_iterator(dir / "d" / "images"))
        images += e.path().extension() == ".pgm";
    EXPECT_EQ(images, 100);
    std::ifstream labels(dir / "d" / "labels.csv");
    int lines = 0;
    for (std::string line; std::getline(labels, line);)
        ++lines;
    EXPECT_EQ(lines, 101);
}

TEST_F(Cli, AugmentFocusAndDeterminism)
{
    ASSERT_EQ(cli("synth --per-class 1 --out d --seed 1", dir).code, 0);
    // s00004 is the grade-4 image, with a planted lesion and its gaze map.
    const std::string img = "--image d/images/s00004.pgm --map d/maps/s00004.smap --pairs 10 --seed 2";
    const CliRun focus = cli("augment " + img + " --mode focus --out f", dir);
    ASSERT_EQ(focus.code, 0) << focus.out;
    for (int i = 0; i < 10; ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "pair_%03d.json", i);
        const auto j = nlohmann::json::parse(slurp(dir / "f" / name));
        EXPECT_GT(j["iou_v1"].get<double>(), 0.9);
        EXPECT_GT(j["iou_v2"].get<double>(), 0.9);
        EXPECT_GT(j["crop_iou_v1"].get<double>(), 0.8);
        EXPECT_EQ(j["mode"], "focus");
    }
    ASSERT_EQ(cli("augment " + img + " --mode focus --out f2 --workers 3", dir).code, 0);
    ASSERT_EQ(cli("augment " + img + " --mode default --out d1", dir).code, 0);
    for (const char* f : {"pair_000_v1.pgm", "pair_007_v2.pgm", "pair_009.json"}) {
        EXPECT_EQ(slurp(dir / "f" / f), slurp(dir / "f2" / f)) << f;
        EXPECT_NE(slurp(dir / "f" / f), slurp(dir / "d1" / f)) << f;
    }
}

TEST_F(Cli, PretrainProbeDeterministic)
{
    ASSERT_EQ(cli("synth --per-class 8 --size 32 --out tr --seed 3", dir).code, 0);
    ASSERT_EQ(cli("synth --per-class 4 --size 32 --out te --seed 4", dir).code, 0);
    const std::string args = "pretrain --data tr --epochs 2 --batch-size 16 --seed 5 --mode focus";
    ASSERT_EQ(cli(args + " --out m1", dir).code, 0);
    ASSERT_EQ(cli(args + " --out m2 --workers 3", dir).code, 0);
    EXPECT_EQ(slurp(dir / "m1" / "encoder.fcck"), slurp(dir / "m2" / "encoder.fcck"));
    EXPECT_EQ(slurp(dir / "m1" / "train_log.csv"), slurp(dir / "m2" / "train_log.csv"));

    const CliRun p = cli("probe --checkpoint m1/encoder.fcck --data tr --test te --label-fraction 0.5", dir);
    ASSERT_EQ(p.code, 0) << p.out;
    EXPECT_EQ(p.out.rfind("ACC=", 0), 0u);
    EXPECT_NE(p.out.find(",MAE="), std::string::npos);
    EXPECT_TRUE(fs::exists(dir / "m1" / "probe.json"));
}
