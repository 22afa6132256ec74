// End-to-end checks of the command-line binary: exit codes, artifact files
// and byte-for-byte reproducibility. The binary path comes from the build
// system via SDSLAB_BIN.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "sdslab/io.hpp"
#include "sdslab/teacher.hpp"
#include "test_util.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

using namespace sdslab;
namespace tt = sdslab::test;

namespace {

// Runs the binary with `args`, redirecting both streams into files under
// `dir`; returns the exit code.
int run_cli(const std::string& args, const std::string& dir) {
    const std::string cmd = std::string("\"") + SDSLAB_BIN + "\" " + args + " > \"" + dir +
                            "/stdout.txt\" 2> \"" + dir + "/stderr.txt\"";
    const int status = std::system(cmd.c_str());
    if (status == -1) return -1;
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string write_config(const std::string& dir, const std::string& text) {
    const std::string path = dir + "/run.cfg";
    std::ofstream f(path, std::ios::binary);
    f << text;
    return path;
}

} // namespace

TEST_CASE("the binary demands a subcommand and offers help") {
    const std::string dir = tt::temp_dir("cli_basic");
    CHECK(run_cli("", dir) == 1);
    CHECK(run_cli("no-such-command", dir) == 1);
    CHECK(run_cli("distill", dir) == 1); // --out is required

    CHECK(run_cli("--help", dir) == 0);
    const std::string help = tt::read_file(dir + "/stdout.txt");
    for (const char* sub : {"teacher-train", "distill", "ablate", "theory-check",
                            "variance-check", "teacher-compare", "render"})
        CHECK(help.find(sub) != std::string::npos);
}

TEST_CASE("a missing config file is reported on stderr with exit code 2") {
    const std::string dir = tt::temp_dir("cli_missing");
    const int code =
        run_cli("distill --config " + dir + "/absent.cfg --out " + dir + "/out", dir);
    CHECK(code == 2);
    const std::string err = tt::read_file(dir + "/stderr.txt");
    CHECK(err.find("absent.cfg") != std::string::npos);
}

TEST_CASE("render writes a readable image and a projection table") {
    const std::string dir = tt::temp_dir("cli_render");
    const std::string cfg = write_config(dir, "[render]\nres = 32\nangles = 4\n");
    REQUIRE(run_cli("render --config " + cfg + " --out " + dir + "/out", dir) == 0);

    const Grid img = read_pgm(dir + "/out/shape.pgm");
    CHECK(img.rows == 32);
    CHECK(img.cols == 32);
    double mass = 0.0;
    for (double v : img.v) mass += v;
    CHECK(mass > 0.0); // the default ellipse is visible

    const std::string proj = tt::read_file(dir + "/out/projections.csv");
    CHECK(proj.substr(0, proj.find('\n')) == "angle,bin,value");
    size_t lines = 0;
    for (char c : proj) lines += c == '\n' ? 1 : 0;
    CHECK(lines == 1 + 4 * 32);
    CHECK(tt::read_file(dir + "/out/resolved.cfg").find("[render]") != std::string::npos);
}

TEST_CASE("teacher-train writes a loadable checkpoint and a training log") {
    const std::string dir = tt::temp_dir("cli_train");
    const std::string cfg = write_config(dir,
                                         "[teacher_train]\n"
                                         "kind = view\n"
                                         "steps = 6\n"
                                         "batch = 8\n"
                                         "hidden = 16\n"
                                         "hidden_layers = 1\n"
                                         "log_every = 2\n"
                                         "[corpus]\n"
                                         "train = 4\n"
                                         "holdout = 2\n"
                                         "[teacher]\n"
                                         "res = 8\n");
    REQUIRE(run_cli("teacher-train --config " + cfg + " --seed 3 --out " + dir + "/out", dir) ==
            0);

    const DenoiserModel model = load_checkpoint(dir + "/out/teacher_view.ckpt");
    CHECK(model.data_dim == 8);
    CHECK(model.cond_kind == CondKind::view);

    const std::string log = tt::read_file(dir + "/out/train_log.csv");
    CHECK(log.substr(0, log.find('\n')) == "step,loss");
    CHECK(log.find("\n0,") != std::string::npos); // first step always logged
    const std::string stdout_text = tt::read_file(dir + "/stdout.txt");
    CHECK(stdout_text.find("holdout eps-mse") != std::string::npos);
}

TEST_CASE("theory-check reruns are byte-identical") {
    const std::string dir = tt::temp_dir("cli_theory");
    const std::string cfg = write_config(dir,
                                         "[theory]\n"
                                         "trials = 20\n"
                                         "train_steps = 50\n"
                                         "batch = 16\n"
                                         "hidden = 16\n"
                                         "hidden_layers = 1\n"
                                         "deltas = 0,1\n"
                                         "t_grid = 100,400,800\n");
    REQUIRE(run_cli("theory-check --config " + cfg + " --seed 7 --out " + dir + "/a", dir) == 0);
    REQUIRE(run_cli("theory-check --config " + cfg + " --seed 7 --out " + dir + "/b", dir) == 0);

    for (const char* name : {"/theory.csv", "/oracle.csv", "/minimal_t.csv", "/summary.csv",
                             "/resolved.cfg"}) {
        const std::string a = tt::read_file(dir + "/a" + name);
        CHECK(a == tt::read_file(dir + "/b" + name));
        CHECK(!a.empty());
    }

    // The exact-oracle sweep sits at the error floor for every cell.
    const std::string oracle = tt::read_file(dir + "/a/oracle.csv");
    std::istringstream lines(oracle);
    std::string line;
    std::getline(lines, line);
    CHECK(line == "delta,t,err");
    while (std::getline(lines, line)) {
        const size_t last = line.rfind(',');
        REQUIRE(last != std::string::npos);
        CHECK(std::stod(line.substr(last + 1)) < 1e-6);
    }
}
