#pragma once

#include "sdslab/diffusion.hpp"
#include "sdslab/grid.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace sdslab::test {

// Fresh unique directory under the system temp root; left behind on failure
// so artifacts can be inspected.
inline std::string temp_dir(const std::string& tag) {
    static int counter = 0;
    const auto dir = std::filesystem::temp_directory_path() /
                     ("sdslab_test_" + tag + "_" + std::to_string(counter++));
    std::filesystem::create_directories(dir);
    return dir.string();
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline double rel_err(double got, double want) {
    const double scale = std::max(1e-12, std::fabs(want));
    return std::fabs(got - want) / scale;
}

inline double max_rel_err(const Vec& got, const Vec& want) {
    double m = 0.0;
    for (size_t i = 0; i < got.size(); ++i) m = std::max(m, rel_err(got[i], want[i]));
    return m;
}

// Two-step schedule with hand-written coefficients so every expected value
// can be computed by hand: t=1 is (0.95, 0.312), t=2 is (0.8, 0.6).
inline NoiseSchedule hand_schedule() {
    NoiseSchedule s;
    s.T = 2;
    s.alpha = {1.0, 0.95, 0.8};
    s.sigma = {0.0, 0.312, 0.6};
    return s;
}

} // namespace sdslab::test
