#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace sdslab {

using Vec = std::vector<double>;

// Dense row-major 2D array of doubles.
struct Grid {
    int rows = 0;
    int cols = 0;
    Vec v;

    Grid() = default;
    Grid(int r, int c, double fill = 0.0) : rows(r), cols(c), v(static_cast<size_t>(r) * c, fill) {}

    double& at(int r, int c) { return v[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return v[static_cast<size_t>(r) * cols + c]; }

    size_t size() const { return v.size(); }
    bool same_shape(const Grid& o) const { return rows == o.rows && cols == o.cols; }

    static Grid zeros(int r, int c) { return Grid(r, c, 0.0); }
    static Grid constant(int r, int c, double value) { return Grid(r, c, value); }
};

inline bool all_finite(const Vec& x) {
    for (double e : x)
        if (!std::isfinite(e)) return false;
    return true;
}

inline bool all_finite(const Grid& g) { return all_finite(g.v); }

inline void require_same_shape(const Vec& a, const Vec& b, const char* what) {
    if (a.size() != b.size()) throw std::invalid_argument(std::string(what) + ": shape mismatch");
}

inline void require_same_shape(const Grid& a, const Grid& b, const char* what) {
    if (!a.same_shape(b)) throw std::invalid_argument(std::string(what) + ": shape mismatch");
}

inline double dot(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(const Vec& a) { return std::sqrt(dot(a, a)); }

inline void axpy(double alpha, const Vec& x, Vec& y) {
    for (size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

inline void scale(Vec& x, double alpha) {
    for (double& e : x) e *= alpha;
}

inline double mse(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return a.empty() ? 0.0 : s / static_cast<double>(a.size());
}

inline double mse(const Grid& a, const Grid& b) { return mse(a.v, b.v); }

} // namespace sdslab
