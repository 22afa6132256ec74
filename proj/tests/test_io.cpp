#include "doctest.h"

#include "sdslab/io.hpp"
#include "sdslab/rng.hpp"
#include "test_util.hpp"

#include <cstdio>
#include <fstream>

using namespace sdslab;
namespace tt = sdslab::test;

TEST_CASE("config parses sections, comments and whitespace") {
    const ConfigMap cfg = ConfigMap::parse_text("# header comment\n"
                                                "top = 1\n"
                                                "[run]\n"
                                                "seed = 7   # trailing comment\n"
                                                "  name =  hello world \n"
                                                "\n"
                                                "[shape]\n"
                                                "rx = 0.25\n"
                                                "flag = true\n");
    CHECK(cfg.has("top"));
    CHECK(cfg.get_int("top", 0) == 1);
    CHECK(cfg.get_u64("run.seed", 0) == 7);
    CHECK(cfg.get_string("run.name", "") == "hello world");
    CHECK(cfg.get_double("shape.rx", 0.0) == 0.25);
    CHECK(cfg.get_bool("shape.flag", false));
    CHECK(cfg.get_int("missing", 9) == 9); // defaults pass through
    CHECK_NOTHROW(cfg.reject_unknown_keys());
}

TEST_CASE("config rejects malformed input") {
    CHECK_THROWS_AS(ConfigMap::parse_text("just a line\n"), ConfigError);
    CHECK_THROWS_AS(ConfigMap::parse_text("[open\n"), ConfigError);
    CHECK_THROWS_AS(ConfigMap::parse_text("[]\n"), ConfigError);
    CHECK_THROWS_AS(ConfigMap::parse_text("= 3\n"), ConfigError);
    CHECK_THROWS_AS(ConfigMap::parse_text("a = 1\na = 2\n"), ConfigError);

    const ConfigMap cfg = ConfigMap::parse_text("x = abc\nn = 1.5\nb = yes\n");
    CHECK_THROWS_AS(cfg.get_double("x", 0.0), ConfigError);
    CHECK_THROWS_AS(cfg.get_int("n", 0), ConfigError); // not an integer
    CHECK_THROWS_AS(cfg.get_bool("b", false), ConfigError);
}

TEST_CASE("config names the first unknown key") {
    const ConfigMap cfg = ConfigMap::parse_text("[run]\nknown = 1\nmystery = 2\n");
    (void)cfg.get_int("run.known", 0);
    CHECK_THROWS_WITH_AS(cfg.reject_unknown_keys(),
                         doctest::Contains("run.mystery"), ConfigError);
}

TEST_CASE("config file loader names a missing path") {
    CHECK_THROWS_WITH_AS(ConfigMap::parse_file("/nonexistent/nowhere.cfg"),
                         doctest::Contains("/nonexistent/nowhere.cfg"), std::runtime_error);
    const std::filesystem::path dir = tt::temp_dir("cfg");
    {
        std::ofstream out(dir / "a.cfg");
        out << "[s]\nk = 3\n";
    }
    CHECK(ConfigMap::parse_file((dir / "a.cfg").string()).get_int("s.k", 0) == 3);
}

TEST_CASE("format_double round-trips and stays short") {
    CHECK(format_double(0.1) == "0.1");
    CHECK(format_double(1.0) == "1");
    CHECK(format_double(-2.5) == "-2.5");
    Rng rng(5);
    for (int i = 0; i < 200; ++i) {
        const double v = rng.uniform(-1e3, 1e3);
        CHECK(std::stod(format_double(v)) == v);
    }
}

TEST_CASE("csv writer emits exact bytes and checks column counts") {
    const std::filesystem::path dir = tt::temp_dir("csv");
    const auto path = (dir / "t.csv").string();
    {
        CsvWriter csv(path, {"a", "b"});
        csv.row({CsvWriter::num(1), CsvWriter::num(0.5)});
        csv.row({"x", CsvWriter::num(2.0)});
        csv.close();
    }
    CHECK(tt::read_file(path) == "a,b\n1,0.5\nx,2\n");
    CsvWriter csv(path, {"a", "b"});
    CHECK_THROWS_AS(csv.row({"only-one"}), std::invalid_argument);
}

TEST_CASE("pgm writes clamped 8-bit payloads") {
    const std::filesystem::path dir = tt::temp_dir("pgm");
    const auto path = (dir / "z.pgm").string();

    Grid zero(3, 4, 0.0);
    write_pgm(zero, path);
    const std::string bytes = tt::read_file(path);
    const std::string header = "P5\n4 3\n255\n";
    REQUIRE(bytes.size() == header.size() + 12);
    CHECK(bytes.substr(0, header.size()) == header);
    for (size_t i = header.size(); i < bytes.size(); ++i) CHECK(bytes[i] == '\0');

    Grid ones(1, 2, 1.0);
    ones.at(0, 1) = 2.5; // clamps to 1.0
    write_pgm(ones, path);
    const std::string b2 = tt::read_file(path);
    CHECK(static_cast<unsigned char>(b2[b2.size() - 1]) == 255);
    CHECK(static_cast<unsigned char>(b2[b2.size() - 2]) == 255);
}

TEST_CASE("pgm round-trip stays within the quantization bound") {
    const std::filesystem::path dir = tt::temp_dir("pgm_rt");
    const auto path = (dir / "r.pgm").string();
    Rng rng(11);
    Grid g(9, 7);
    for (double& v : g.v) v = rng.uniform();
    write_pgm(g, path);
    const Grid back = read_pgm(path);
    REQUIRE(back.rows == 9);
    REQUIRE(back.cols == 7);
    for (size_t i = 0; i < g.size(); ++i)
        CHECK(std::fabs(back.v[i] - g.v[i]) <= 1.0 / 510.0 + 1e-12);
}

TEST_CASE("pgm rejects malformed headers") {
    const std::filesystem::path dir = tt::temp_dir("pgm_bad");
    const auto path = (dir / "bad.pgm").string();
    {
        std::ofstream out(path, std::ios::binary);
        out << "P2\n2 2\n255\n....";
    }
    CHECK_THROWS_AS(read_pgm(path), std::runtime_error);
    {
        std::ofstream out(path, std::ios::binary);
        out << "P5\n4 4\n255\nxy"; // truncated payload
    }
    CHECK_THROWS_AS(read_pgm(path), std::runtime_error);
}

TEST_CASE("tensor container round-trips exactly") {
    const std::filesystem::path dir = tt::temp_dir("dtck");
    const auto path = (dir / "t.bin").string();
    std::vector<Tensor> tensors(2);
    tensors[0].name = "weights";
    tensors[0].dims = {2, 3};
    tensors[0].data = {1.0f, -2.0f, 0.5f, 0.0f, 3.25f, -0.125f};
    tensors[1].name = "meta";
    tensors[1].dims = {1};
    tensors[1].data = {42.0f};
    save_tensor_file(tensors, path);

    const auto back = load_tensor_file(path);
    REQUIRE(back.size() == 2);
    CHECK(back[0].name == "weights");
    CHECK(back[0].dims == std::vector<uint32_t>{2, 3});
    CHECK(back[0].data == tensors[0].data);
    CHECK(back[1].data == tensors[1].data);
}

TEST_CASE("tensor container rejects corruption") {
    const std::filesystem::path dir = tt::temp_dir("dtck_bad");
    const auto good = (dir / "good.bin").string();
    std::vector<Tensor> tensors(1);
    tensors[0].name = "p";
    tensors[0].dims = {4};
    tensors[0].data = {1, 2, 3, 4};
    save_tensor_file(tensors, good);

    const std::string bytes = tt::read_file(good);
    const auto bad = (dir / "bad.bin").string();
    {
        std::ofstream out(bad, std::ios::binary);
        out << "XXXX" << bytes.substr(4);
    }
    CHECK_THROWS_WITH_AS(load_tensor_file(bad), doctest::Contains("XXXX"), CorruptCheckpoint);
    {
        std::ofstream out(bad, std::ios::binary);
        out << bytes.substr(0, bytes.size() / 2); // truncate
    }
    CHECK_THROWS_AS(load_tensor_file(bad), CorruptCheckpoint);
    {
        std::ofstream out(bad, std::ios::binary);
        out << bytes << "extra"; // trailing garbage
    }
    CHECK_THROWS_AS(load_tensor_file(bad), CorruptCheckpoint);

    // dims/payload mismatch is refused at save time.
    tensors[0].dims = {5};
    CHECK_THROWS_AS(save_tensor_file(tensors, good), std::invalid_argument);
}
