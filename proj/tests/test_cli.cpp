#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "coastcast/cli.hpp"
#include "coastcast/data.hpp"
#include "coastcast/report.hpp"
#include "coastcast/training.hpp"

using namespace coastcast;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
}

const char* kTinyConfig = R"({
  "model": {"kind": "3ddr-unet", "base_filters": 2, "depth": 2, "height": 24, "width": 24,
             "variables": 4, "dropout_rate": 0.0},
  "train": {"epochs": 3, "batch_size": 8, "seed": 5},
  "window": {"lags": 4, "horizon": 2},
  "split": {"mode": "fraction", "train": 0.7, "validation": 0.15}
})";

}  // namespace

TEST_CASE("cli: synth is deterministic per seed and validates") {
    TempDir dir("coastcast_cli_synth");
    const std::string a = dir.file("a.cten");
    const std::string b = dir.file("b.cten");
    CHECK(run_cli({"synth", "--seed", "7", "--steps", "64", "--height", "24", "--width", "24", "--out", a}) == 0);
    CHECK(run_cli({"synth", "--seed", "7", "--steps", "64", "--height", "24", "--width", "24", "--out", b}) == 0);
    CHECK(read_file(a) == read_file(b));  // identical bytes

    GridSeries s = read_container(a);
    s.validate();
    CHECK(s.vars() == 4);
    CHECK(s.steps() == 64);
}

TEST_CASE("cli: train writes best.ckpt and a history row per epoch") {
    TempDir dir("coastcast_cli_train");
    const std::string data = dir.file("d.cten");
    REQUIRE(run_cli({"synth", "--seed", "3", "--steps", "80", "--height", "24", "--width", "24", "--out", data}) == 0);
    const std::string cfg = dir.file("cfg.json");
    write_file(cfg, kTinyConfig);

    const std::string out = dir.file("run");
    CHECK(run_cli({"train", "--config", cfg, "--data", data, "--model", "asymm-inception-res-3ddr-unet",
                   "--out", out}) == 0);
    CHECK(fs::exists(out + "/best.ckpt"));

    const std::string hist = read_file(out + "/history.csv");
    std::size_t rows = 0;
    for (char ch : hist) rows += ch == '\n';
    CHECK(rows == 1 + 3);  // header + one row per epoch

    Checkpoint ck = load_checkpoint(out + "/best.ckpt");
    ModelF m = model_from_checkpoint(ck);
    CHECK(m.config.kind == ModelKind::AsymmInceptionRes3DDR);
    CHECK(m.config.lags == 4);
}

TEST_CASE("cli: unknown model name exits 2 and names the valid models") {
    TempDir dir("coastcast_cli_badmodel");
    const std::string data = dir.file("d.cten");
    REQUIRE(run_cli({"synth", "--steps", "32", "--height", "16", "--width", "16", "--out", data}) == 0);
    CHECK(run_cli({"train", "--data", data, "--model", "unet5", "--out", dir.file("x")}) == 2);
}

TEST_CASE("cli: horizon flag shifts the window targets") {
    TempDir dir("coastcast_cli_hz");
    const std::string data = dir.file("d.cten");
    REQUIRE(run_cli({"synth", "--seed", "3", "--steps", "90", "--height", "24", "--width", "24", "--out", data}) == 0);
    const std::string cfg = dir.file("cfg.json");
    write_file(cfg, kTinyConfig);

    // horizon 6 overrides the config's 2
    const std::string out = dir.file("run");
    CHECK(run_cli({"train", "--config", cfg, "--data", data, "--horizon", "6", "--out", out}) == 0);
    Checkpoint ck = load_checkpoint(out + "/best.ckpt");
    CHECK(ck.meta_json.find("\"horizon\":6") != std::string::npos);

    // window arithmetic: with lags 4 and horizon 6 the target of window i is i+9
    WindowSpec w{4, 6};
    CHECK(window_target_step(0, w) == 9);
}

TEST_CASE("cli: evaluate and predict run against a trained checkpoint") {
    TempDir dir("coastcast_cli_eval");
    const std::string data = dir.file("d.cten");
    REQUIRE(run_cli({"synth", "--seed", "11", "--steps", "96", "--height", "24", "--width", "24", "--out", data}) == 0);
    const std::string cfg = dir.file("cfg.json");
    write_file(cfg, kTinyConfig);
    const std::string run = dir.file("run");
    REQUIRE(run_cli({"train", "--config", cfg, "--data", data, "--out", run}) == 0);

    const std::string ev = dir.file("eval");
    CHECK(run_cli({"evaluate", "--ckpt", run + "/best.ckpt", "--data", data, "--config", cfg, "--out", ev}) == 0);
    const std::string csv = read_file(ev + "/evaluation.csv");
    CHECK(csv.rfind("model,season,horizon_h,variable,mse\n", 0) == 0);
    CHECK(csv.find("ALL") != std::string::npos);

    // identical re-run gives identical bytes
    const std::string ev2 = dir.file("eval2");
    CHECK(run_cli({"evaluate", "--ckpt", run + "/best.ckpt", "--data", data, "--config", cfg, "--out", ev2}) == 0);
    CHECK(csv == read_file(ev2 + "/evaluation.csv"));

    // sea column variant
    const std::string ev3 = dir.file("eval3");
    CHECK(run_cli({"evaluate", "--ckpt", run + "/best.ckpt", "--data", data, "--config", cfg, "--sea-mse",
                   "--out", ev3}) == 0);
    CHECK(read_file(ev3 + "/evaluation.csv").rfind("model,season,horizon_h,variable,mse,sea_mse\n", 0) == 0);

    // predict at a valid timestamp: 16 images + sidecars + raw tensor
    const std::string pr = dir.file("pred");
    CHECK(run_cli({"predict", "--ckpt", run + "/best.ckpt", "--data", data, "--time", "2017-03-02T00:00:00Z",
                   "--out", pr}) == 0);
    std::size_t pgms = 0, jsons = 0;
    for (const auto& e : fs::directory_iterator(pr)) {
        if (e.path().extension() == ".pgm") ++pgms;
        if (e.path().extension() == ".json") ++jsons;
    }
    CHECK(pgms == 16);
    CHECK(jsons == 16);
    REQUIRE(fs::exists(pr + "/prediction.cten"));

    GridSeries pred = read_container(pr + "/prediction.cten");
    CHECK(pred.values.shape == Shape{1, 24, 24, 4});

    // the truth panel reproduces the dataset slice at t+h within quantization
    GridSeries src = read_container(data);
    TensorF truth = read_pgm_with_sidecar(pr + "/SSH_truth");
    const std::size_t t_idx = 24;            // 2017-03-02 00:00
    const std::size_t target = t_idx + 2;    // horizon 2
    double mn = 1e300, mx = -1e300;
    for (std::size_t r = 0; r < 24; ++r)
        for (std::size_t c = 0; c < 24; ++c) {
            const double v = src.is_sea(r, c) ? src.at(target, r, c, 3) : 0.0;
            mn = std::min(mn, v);
            mx = std::max(mx, v);
        }
    const double tol = (mx - mn) / 255.0;
    for (std::size_t r = 0; r < 24; ++r)
        for (std::size_t c = 0; c < 24; ++c) {
            const double v = src.is_sea(r, c) ? src.at(target, r, c, 3) : 0.0;
            CHECK(std::abs(truth[r * 24 + c] - v) <= tol * 0.5 + 1e-9);
        }

    // timestamp outside the series
    CHECK(run_cli({"predict", "--ckpt", run + "/best.ckpt", "--data", data, "--time", "2020-01-01",
                   "--out", dir.file("nope")}) == 3);
}

TEST_CASE("cli: inspect emits stable CSVs with the ratio column") {
    TempDir dir("coastcast_cli_inspect");
    const std::string cfg = dir.file("cfg.json");
    write_file(cfg, R"({"model": {"kind": "3ddr-unet", "base_filters": 2, "depth": 2,
                        "height": 16, "width": 16, "variables": 4}})");
    const std::string a = dir.file("a");
    const std::string b = dir.file("b");
    CHECK(run_cli({"inspect", "--model", "all", "--config", cfg, "--out", a}) == 0);
    CHECK(run_cli({"inspect", "--model", "all", "--config", cfg, "--out", b}) == 0);
    CHECK(read_file(a + "/params.csv") == read_file(b + "/params.csv"));

    const std::string csv = read_file(a + "/params.csv");
    CHECK(csv.rfind("model,params,conv_layers,ratio_vs_base\n", 0) == 0);
    std::size_t rows = 0;
    for (char ch : csv) rows += ch == '\n';
    CHECK(rows == 5);  // header + four models
    CHECK(fs::exists(a + "/summary_3ddr-unet.csv"));
    CHECK(fs::exists(a + "/summary_asymm-inception-res-3ddr-unet.csv"));

    // defaults: the res/base ratio lands in the paper band
    TempDir dir2("coastcast_cli_inspect_default");
    const std::string d = dir2.file("out");
    CHECK(run_cli({"inspect", "--model", "all", "--out", d}) == 0);
    const std::string full = read_file(d + "/params.csv");
    std::istringstream is(full);
    std::string line;
    std::getline(is, line);
    std::getline(is, line);  // 3ddr row
    std::getline(is, line);  // res row
    const double ratio = std::stod(line.substr(line.rfind(',') + 1));
    CHECK(ratio >= 1.4);
    CHECK(ratio <= 1.6);
}

TEST_CASE("cli: missing subcommand and bad flags exit 2") {
    CHECK(run_cli({}) == 2);
    CHECK(run_cli({"frobnicate"}) == 2);
    CHECK(run_cli({"train"}) == 2);  // --data required
}
