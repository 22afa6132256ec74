#include "sdslab/student.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <utility>

namespace sdslab {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr double kPi = 3.14159265358979323846;
} // namespace

double normalize_angle(double a) {
    a = std::fmod(a, kTwoPi);
    if (a < 0) a += kTwoPi;
    return a;
}

ViewPose ViewPose::at(double angle_rad) { return ViewPose{normalize_angle(angle_rad)}; }

double angular_distance(ViewPose a, ViewPose b) {
    const double d = std::fabs(normalize_angle(a.angle) - normalize_angle(b.angle));
    return std::min(d, kTwoPi - d);
}

size_t PyramidField::param_count() const {
    size_t n = 0;
    for (const Grid& g : levels) n += g.v.size();
    return n;
}

PyramidField make_pyramid(const std::vector<int>& resolutions, int render_res, int stage) {
    if (resolutions.empty() || render_res < 1)
        throw std::invalid_argument("make_pyramid: empty pyramid or bad render resolution");
    PyramidField f;
    int prev = 0;
    for (int r : resolutions) {
        if (r <= prev) throw std::invalid_argument("make_pyramid: resolutions must increase");
        f.levels.push_back(Grid::zeros(r, r));
        prev = r;
    }
    f.render_res = render_res;
    f.stage = stage;
    return f;
}

Vec flatten_params(const PyramidField& field) {
    Vec out;
    out.reserve(field.param_count());
    for (const Grid& g : field.levels) out.insert(out.end(), g.v.begin(), g.v.end());
    return out;
}

void assign_params(PyramidField& field, std::span<const double> params) {
    if (params.size() != field.param_count())
        throw std::invalid_argument("assign_params: parameter count mismatch");
    size_t off = 0;
    for (Grid& g : field.levels) {
        std::copy(params.begin() + off, params.begin() + off + g.v.size(), g.v.begin());
        off += g.v.size();
    }
}

Vec flatten_level_grads(const std::vector<Grid>& level_grads) {
    Vec out;
    for (const Grid& g : level_grads) out.insert(out.end(), g.v.begin(), g.v.end());
    return out;
}

Grid resample_bilinear(const Grid& src, int dst_res) {
    if (src.rows != src.cols) throw std::invalid_argument("resample_bilinear: grid not square");
    if (dst_res < 1) throw std::invalid_argument("resample_bilinear: bad resolution");
    const int r = src.rows;
    const double ratio = static_cast<double>(r) / dst_res;
    Grid dst = Grid::zeros(dst_res, dst_res);
    for (int i = 0; i < dst_res; ++i) {
        const double y = std::min(i * ratio, static_cast<double>(r - 1));
        const int y0 = static_cast<int>(y);
        const int y1 = std::min(y0 + 1, r - 1);
        const double fy = y - y0;
        for (int j = 0; j < dst_res; ++j) {
            const double x = std::min(j * ratio, static_cast<double>(r - 1));
            const int x0 = static_cast<int>(x);
            const int x1 = std::min(x0 + 1, r - 1);
            const double fx = x - x0;
            dst.at(i, j) = (1 - fy) * ((1 - fx) * src.at(y0, x0) + fx * src.at(y0, x1)) +
                           fy * ((1 - fx) * src.at(y1, x0) + fx * src.at(y1, x1));
        }
    }
    return dst;
}

Grid resample_bilinear_adjoint(const Grid& grad_dst, int src_res, int dst_res) {
    if (grad_dst.rows != dst_res || grad_dst.cols != dst_res)
        throw std::invalid_argument("resample_bilinear_adjoint: gradient shape mismatch");
    const double ratio = static_cast<double>(src_res) / dst_res;
    Grid out = Grid::zeros(src_res, src_res);
    for (int i = 0; i < dst_res; ++i) {
        const double y = std::min(i * ratio, static_cast<double>(src_res - 1));
        const int y0 = static_cast<int>(y);
        const int y1 = std::min(y0 + 1, src_res - 1);
        const double fy = y - y0;
        for (int j = 0; j < dst_res; ++j) {
            const double x = std::min(j * ratio, static_cast<double>(src_res - 1));
            const int x0 = static_cast<int>(x);
            const int x1 = std::min(x0 + 1, src_res - 1);
            const double fx = x - x0;
            const double g = grad_dst.at(i, j);
            out.at(y0, x0) += (1 - fy) * (1 - fx) * g;
            out.at(y0, x1) += (1 - fy) * fx * g;
            out.at(y1, x0) += fy * (1 - fx) * g;
            out.at(y1, x1) += fy * fx * g;
        }
    }
    return out;
}

Grid field_render(const PyramidField& field, const Vec& mask) {
    if (static_cast<int>(mask.size()) != field.level_count())
        throw std::invalid_argument("field_render: mask length != level count");
    Grid out = Grid::zeros(field.render_res, field.render_res);
    for (int i = 0; i < field.level_count(); ++i) {
        if (mask[i] == 0.0) continue;
        const Grid up = resample_bilinear(field.levels[i], field.render_res);
        axpy(mask[i], up.v, out.v);
    }
    return out;
}

namespace {
// Shared sampling geometry for project / project_adjoint: ray j, sample m at
// angle φ hits (x, y) = center + (j−c)·(cos φ, sin φ) + (m−c)·(−sin φ, cos φ),
// which reduces to column sums at φ = 0.
template <typename Visit>
void for_each_ray_sample(int res, ViewPose pose, Visit&& visit) {
    const double c = 0.5 * (res - 1);
    const double ca = std::cos(pose.angle), sa = std::sin(pose.angle);
    for (int j = 0; j < res; ++j) {
        const double ox = c + (j - c) * ca;
        const double oy = c + (j - c) * sa;
        for (int m = 0; m < res; ++m) {
            const double x = ox - (m - c) * sa;
            const double y = oy + (m - c) * ca;
            const int x0 = static_cast<int>(std::floor(x));
            const int y0 = static_cast<int>(std::floor(y));
            const double fx = x - x0, fy = y - y0;
            // Zero outside support: skip out-of-bounds corners.
            for (int dy = 0; dy <= 1; ++dy) {
                const int yy = y0 + dy;
                if (yy < 0 || yy >= res) continue;
                for (int dx = 0; dx <= 1; ++dx) {
                    const int xx = x0 + dx;
                    if (xx < 0 || xx >= res) continue;
                    const double w = (dx ? fx : 1 - fx) * (dy ? fy : 1 - fy);
                    visit(j, yy, xx, w);
                }
            }
        }
    }
}
} // namespace

Vec project(const Grid& field2d, ViewPose pose) {
    if (field2d.rows != field2d.cols) throw std::invalid_argument("project: grid not square");
    Vec out(field2d.rows, 0.0);
    for_each_ray_sample(field2d.rows, pose, [&](int j, int row, int col, double w) {
        out[j] += w * field2d.at(row, col);
    });
    return out;
}

Grid project_adjoint(const Vec& grad_proj, ViewPose pose, int res) {
    if (static_cast<int>(grad_proj.size()) != res)
        throw std::invalid_argument("project_adjoint: gradient length != resolution");
    Grid out = Grid::zeros(res, res);
    for_each_ray_sample(res, pose, [&](int j, int row, int col, double w) {
        out.at(row, col) += w * grad_proj[j];
    });
    return out;
}

std::vector<Grid> render_grad_to_params(const PyramidField& field, const Grid& field_grad,
                                        const Vec& mask) {
    if (static_cast<int>(mask.size()) != field.level_count())
        throw std::invalid_argument("render_grad_to_params: mask length != level count");
    if (field_grad.rows != field.render_res || field_grad.cols != field.render_res)
        throw std::invalid_argument("render_grad_to_params: field gradient shape mismatch");
    std::vector<Grid> grads;
    grads.reserve(field.levels.size());
    for (int i = 0; i < field.level_count(); ++i) {
        const int r = field.levels[i].rows;
        if (mask[i] == 0.0) {
            grads.push_back(Grid::zeros(r, r));
            continue;
        }
        Grid g = resample_bilinear_adjoint(field_grad, r, field.render_res);
        scale(g.v, mask[i]);
        grads.push_back(std::move(g));
    }
    return grads;
}

PyramidField upgrade_stage(const PyramidField& field, int new_render_res) {
    if (new_render_res <= field.render_res)
        throw std::invalid_argument("upgrade_stage: render resolution must increase");
    PyramidField out = field;
    const int finest = out.levels.back().rows;
    out.levels.push_back(Grid::zeros(finest * 2, finest * 2));
    out.render_res = new_render_res;
    out.stage = 2;
    return out;
}

// ---- iso-contour extraction ---------------------------------------------------

namespace {
using Point = std::array<double, 2>;

struct Segment {
    Point a, b;
};

// Interpolated crossing on the edge between two lattice corners; always
// evaluated from the lower-indexed corner so neighboring cells produce
// bit-identical points on their shared edge.
Point edge_point(double va, double vb, Point pa, Point pb, double iso) {
    double t = (vb == va) ? 0.5 : (iso - va) / (vb - va);
    t = std::clamp(t, 0.0, 1.0);
    return {pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])};
}

std::pair<long long, long long> quantize(const Point& p) {
    return {std::llround(p[0] * 1048576.0), std::llround(p[1] * 1048576.0)};
}
} // namespace

IsoContour extract_contour(const Grid& field2d, double iso) {
    const int rows = field2d.rows, cols = field2d.cols;
    if (rows < 2 || cols < 2) throw std::invalid_argument("extract_contour: grid too small");

    // Marching squares: collect one or two crossing segments per cell.
    std::vector<Segment> segs;
    for (int i = 0; i + 1 < rows; ++i) {
        for (int j = 0; j + 1 < cols; ++j) {
            const double v00 = field2d.at(i, j), v10 = field2d.at(i, j + 1);
            const double v01 = field2d.at(i + 1, j), v11 = field2d.at(i + 1, j + 1);
            const int code = (v00 >= iso ? 1 : 0) | (v10 >= iso ? 2 : 0) | (v11 >= iso ? 4 : 0) |
                             (v01 >= iso ? 8 : 0);
            if (code == 0 || code == 15) continue;

            const Point p00{double(j), double(i)}, p10{double(j + 1), double(i)};
            const Point p01{double(j), double(i + 1)}, p11{double(j + 1), double(i + 1)};
            const Point top = edge_point(v00, v10, p00, p10, iso);
            const Point right = edge_point(v10, v11, p10, p11, iso);
            const Point bottom = edge_point(v01, v11, p01, p11, iso);
            const Point left = edge_point(v00, v01, p00, p01, iso);

            switch (code) {
            case 1: case 14: segs.push_back({top, left}); break;
            case 2: case 13: segs.push_back({top, right}); break;
            case 3: case 12: segs.push_back({left, right}); break;
            case 4: case 11: segs.push_back({right, bottom}); break;
            case 6: case 9: segs.push_back({top, bottom}); break;
            case 7: case 8: segs.push_back({left, bottom}); break;
            case 5: // saddle: resolve by the cell-center average
                if (0.25 * (v00 + v10 + v01 + v11) >= iso) {
                    segs.push_back({top, right});
                    segs.push_back({left, bottom});
                } else {
                    segs.push_back({top, left});
                    segs.push_back({right, bottom});
                }
                break;
            case 10:
                if (0.25 * (v00 + v10 + v01 + v11) >= iso) {
                    segs.push_back({top, left});
                    segs.push_back({right, bottom});
                } else {
                    segs.push_back({top, right});
                    segs.push_back({left, bottom});
                }
                break;
            default: break;
            }
        }
    }
    if (segs.empty()) throw EmptyContour("extract_contour: field never crosses the iso level");

    // Chain segments into loops by matching quantized endpoints; keep the
    // longest closed one. Chains that hit the grid boundary stay open and are
    // discarded.
    std::map<std::pair<long long, long long>, std::vector<size_t>> at_point;
    for (size_t s = 0; s < segs.size(); ++s) {
        at_point[quantize(segs[s].a)].push_back(s);
        at_point[quantize(segs[s].b)].push_back(s);
    }
    std::vector<bool> used(segs.size(), false);
    IsoContour best;
    double best_perimeter = -1.0;

    for (size_t start = 0; start < segs.size(); ++start) {
        if (used[start]) continue;
        used[start] = true;
        std::vector<Point> chain{segs[start].a, segs[start].b};
        const auto start_key = quantize(segs[start].a);
        bool closed = false;
        while (true) {
            const auto cur_key = quantize(chain.back());
            if (cur_key == start_key) {
                closed = true;
                chain.pop_back(); // implicit closing edge; drop the duplicate
                break;
            }
            size_t next = segs.size();
            for (size_t s : at_point[cur_key])
                if (!used[s]) {
                    next = s;
                    break;
                }
            if (next == segs.size()) break; // open chain (hits the boundary)
            used[next] = true;
            chain.push_back(quantize(segs[next].a) == cur_key ? segs[next].b : segs[next].a);
        }
        if (!closed) continue;

        // Drop consecutive duplicates from corner-exact crossings.
        std::vector<Point> verts;
        for (const Point& p : chain)
            if (verts.empty() || quantize(p) != quantize(verts.back())) verts.push_back(p);
        while (verts.size() > 1 && quantize(verts.front()) == quantize(verts.back()))
            verts.pop_back();
        if (verts.size() < 3) continue;

        IsoContour candidate{std::move(verts)};
        const double perimeter = polygon_perimeter(candidate);
        if (perimeter > best_perimeter) {
            best_perimeter = perimeter;
            best = std::move(candidate);
        }
    }
    if (best.vertices.size() < 3)
        throw EmptyContour("extract_contour: no closed iso-contour inside the grid");
    return best;
}

double polygon_area(const IsoContour& contour) {
    const auto& v = contour.vertices;
    double acc = 0.0;
    for (size_t i = 0; i < v.size(); ++i) {
        const auto& p = v[i];
        const auto& q = v[(i + 1) % v.size()];
        acc += p[0] * q[1] - q[0] * p[1];
    }
    return 0.5 * std::fabs(acc);
}

double polygon_perimeter(const IsoContour& contour) {
    const auto& v = contour.vertices;
    double acc = 0.0;
    for (size_t i = 0; i < v.size(); ++i) {
        const auto& p = v[i];
        const auto& q = v[(i + 1) % v.size()];
        acc += std::hypot(q[0] - p[0], q[1] - p[1]);
    }
    return acc;
}

} // namespace sdslab
