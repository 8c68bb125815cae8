// End-to-end tests that spawn the real command-line binary.

#include <doctest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "test_support.hpp"

namespace fs = std::filesystem;
using namespace attacknet;

#ifndef ATTACKNET_CLI_PATH
#error "ATTACKNET_CLI_PATH must be defined by the build"
#endif

namespace {

struct CmdResult {
    int exit_code = -1;
    std::string out;
};

CmdResult run_cli(const std::string& args) {
    const std::string cmd = std::string(ATTACKNET_CLI_PATH) + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    CmdResult r;
    std::array<char, 512> buf;
    while (fgets(buf.data(), buf.size(), pipe)) r.out += buf.data();
    const int status = pclose(pipe);
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

std::string write_config(const std::string& dir, const std::string& extra) {
    const std::string path = dir + "/config.txt";
    std::ofstream os(path);
    os << "input_h=16\ninput_w=16\nphase1_filters=8\nphase2_filters=16\n"
          "dense_width=32\ndropout_conv=0\ndropout_dense=0\n"
          "batch_size=8\nmax_epochs=3\nlr=0.01\nseed=42\ntrain_ratio=0.5\n";
    os << extra;
    return path;
}

bool no_partials(const fs::path& dir) {
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (e.path().string().ends_with(".partial")) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("cli params and flops echo the budget lines") {
    CmdResult p = run_cli("params");
    CHECK(p.exit_code == 0);
    CHECK(p.out.find("params,291042\n") != std::string::npos);
    CHECK(p.out.find("params_M,0.3\n") != std::string::npos);

    CmdResult f = run_cli("flops");
    CHECK(f.exit_code == 0);
    CHECK(f.out.find("flops,22741642\n") != std::string::npos);
    CHECK(f.out.find("mflops,22.7\n") != std::string::npos);
}

TEST_CASE("cli train writes artifacts and is byte reproducible") {
    const std::string work = testutil::temp_dir("cli_train");
    const std::string data = work + "/data";
    testutil::write_synthetic_dataset(data, 10, 16, 16, 31);
    const std::string cfg = write_config(work, "dataset=" + data + "\n");

    CmdResult r1 = run_cli("train --config " + cfg + " --out " + work + "/run1");
    INFO(r1.out);
    REQUIRE(r1.exit_code == 0);
    CHECK(fs::exists(work + "/run1/config.txt"));
    CHECK(fs::exists(work + "/run1/trainlog_data.csv"));
    CHECK(fs::exists(work + "/run1/model_data.atkn"));
    CHECK(fs::exists(work + "/run1/eval_data.csv"));
    CHECK(no_partials(work + "/run1"));
    CHECK(r1.out.find("hter,") != std::string::npos);

    CmdResult r2 = run_cli("train --config " + cfg + " --out " + work + "/run2");
    REQUIRE(r2.exit_code == 0);
    CHECK(slurp(work + "/run1/trainlog_data.csv") == slurp(work + "/run2/trainlog_data.csv"));
    CHECK(slurp(work + "/run1/model_data.atkn") == slurp(work + "/run2/model_data.atkn"));

    SUBCASE("config echo reparses to the identical effective configuration") {
        CmdResult r3 = run_cli("train --config " + work + "/run1/config.txt --out " + work +
                               "/run3");
        REQUIRE(r3.exit_code == 0);
        CHECK(slurp(work + "/run1/trainlog_data.csv") == slurp(work + "/run3/trainlog_data.csv"));
        // Everything except the out= line (overridden per run) must match.
        auto strip_out = [](std::string s) {
            std::istringstream is(s);
            std::string line, kept;
            while (std::getline(is, line))
                if (line.rfind("out=", 0) != 0) kept += line + "\n";
            return kept;
        };
        CHECK(strip_out(slurp(work + "/run1/config.txt")) ==
              strip_out(slurp(work + "/run3/config.txt")));
    }

    SUBCASE("seed override changes the run") {
        CmdResult r4 = run_cli("train --config " + cfg + " --seed 43 --out " + work + "/run4");
        REQUIRE(r4.exit_code == 0);
        CHECK(slurp(work + "/run1/model_data.atkn") != slurp(work + "/run4/model_data.atkn"));
    }
}

TEST_CASE("cli train error paths") {
    const std::string work = testutil::temp_dir("cli_train_err");
    const std::string cfg = write_config(work, "dataset=" + work + "/missing_dir\n");
    CmdResult r = run_cli("train --config " + cfg + " --out " + work + "/out");
    CHECK(r.exit_code != 0);
    CHECK(r.out.find("missing_dir") != std::string::npos);  // message names the path

    const std::string bad = write_config(work, "no_such_key=1\n");
    CmdResult r2 = run_cli("train --config " + bad + " --out " + work + "/out");
    CHECK(r2.exit_code != 0);
    CHECK(r2.out.find("no_such_key") != std::string::npos);
}

TEST_CASE("cli eval rejects a corrupted checkpoint") {
    const std::string work = testutil::temp_dir("cli_eval_err");
    const std::string data = work + "/data";
    testutil::write_synthetic_dataset(data, 4, 16, 16, 5);
    {
        std::ofstream os(work + "/broken.atkn", std::ios::binary);
        os << "not a checkpoint";
    }
    CmdResult r = run_cli("eval --checkpoint " + work + "/broken.atkn --data " + data +
                          " --out " + work + "/out");
    CHECK(r.exit_code != 0);
}

TEST_CASE("cli cross-eval emits the matrix artifacts") {
    const std::string work = testutil::temp_dir("cli_xe");
    testutil::write_synthetic_dataset(work + "/da", 8, 16, 16, 61);
    testutil::write_synthetic_dataset(work + "/db", 8, 16, 16, 62);
    const std::string cfg = write_config(work, "");

    CmdResult r = run_cli("cross-eval --config " + cfg + " --out " + work + "/out " + work +
                          "/da " + work + "/db");
    INFO(r.out);
    REQUIRE(r.exit_code == 0);
    CHECK(fs::exists(work + "/out/matrix.txt"));
    CHECK(fs::exists(work + "/out/model_da.atkn"));
    CHECK(fs::exists(work + "/out/model_db.atkn"));
    CHECK(fs::exists(work + "/out/trainlog_da.csv"));
    CHECK(no_partials(work + "/out"));

    // 2x2 cells x 2 class rows = 8 data rows after the header.
    std::istringstream is(slurp(work + "/out/matrix.csv"));
    std::string line;
    std::getline(is, line);
    CHECK(line == "train,eval,class,precision,recall,f1,far,frr,hter");
    std::size_t rows = 0;
    while (std::getline(is, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 8);
}

TEST_CASE("cli fused requires two roots and writes per-source reports") {
    const std::string work = testutil::temp_dir("cli_fused");
    testutil::write_synthetic_dataset(work + "/da", 8, 16, 16, 71);
    testutil::write_synthetic_dataset(work + "/db", 8, 16, 16, 72);
    const std::string cfg = write_config(work, "");

    CmdResult one = run_cli("fused --config " + cfg + " --out " + work + "/out1 " + work + "/da");
    CHECK(one.exit_code != 0);

    CmdResult r = run_cli("fused --config " + cfg + " --out " + work + "/out " + work + "/da " +
                          work + "/db");
    INFO(r.out);
    REQUIRE(r.exit_code == 0);
    CHECK(fs::exists(work + "/out/trainlog_fused.csv"));
    CHECK(fs::exists(work + "/out/model_fused.atkn"));
    CHECK(fs::exists(work + "/out/eval_da.csv"));
    CHECK(fs::exists(work + "/out/eval_db.csv"));
}

TEST_CASE("cli bench reports consistent latency lines") {
    CmdResult r = run_cli("bench --iterations 20");
    REQUIRE(r.exit_code == 0);
    CHECK(r.out.find("iterations,20\n") != std::string::npos);
    CHECK(r.out.find("mean_ms,") != std::string::npos);
    CHECK(r.out.find("median_ms,") != std::string::npos);
    CHECK(r.out.find("p95_ms,") != std::string::npos);
    // fps = 1000 / mean within rounding
    double mean = -1, fps = -1;
    std::istringstream is(r.out);
    std::string line;
    while (std::getline(is, line)) {
        if (line.rfind("mean_ms,", 0) == 0) mean = std::stod(line.substr(8));
        if (line.rfind("fps,", 0) == 0) fps = std::stod(line.substr(4));
    }
    REQUIRE(mean > 0);
    CHECK(fps == doctest::Approx(1000.0 / mean).epsilon(1e-3));
}

TEST_CASE("cli gradcam writes a decodable overlay deterministically") {
    const std::string work = testutil::temp_dir("cli_gc");
    const std::string data = work + "/data";
    testutil::write_synthetic_dataset(data, 6, 16, 16, 81);
    const std::string cfg = write_config(work, "dataset=" + data + "\n");
    REQUIRE(run_cli("train --config " + cfg + " --out " + work + "/run").exit_code == 0);
    const std::string ckpt = work + "/run/model_data.atkn";
    const std::string img = data + "/bonafide/img_0000.ppm";

    CmdResult r1 = run_cli("gradcam --checkpoint " + ckpt + " --image " + img +
                           " --target attack --out-path " + work + "/gc1.ppm");
    REQUIRE(r1.exit_code == 0);
    CHECK(r1.out.find("argmax_row,") != std::string::npos);
    ImageRecord overlay = decode_image(work + "/gc1.ppm");
    CHECK(overlay.height == 16);
    CHECK(overlay.width == 16);

    CmdResult r2 = run_cli("gradcam --checkpoint " + ckpt + " --image " + img +
                           " --target attack --out-path " + work + "/gc2.ppm");
    REQUIRE(r2.exit_code == 0);
    CHECK(slurp(work + "/gc1.ppm") == slurp(work + "/gc2.ppm"));

    CmdResult bad = run_cli("gradcam --checkpoint " + ckpt + " --image " + img +
                            " --target neither --out-path " + work + "/gc3.ppm");
    CHECK(bad.exit_code != 0);
}
