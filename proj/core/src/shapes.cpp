#include "sdslab/shapes.hpp"

#include "sdslab/student.hpp"

#include <cmath>
#include <memory>
#include <stdexcept>
#include <utility>

namespace sdslab {

namespace {
bool inside(const ShapeSpec& s, double x, double y) {
    // Rotate into the shape frame.
    const double dx = x - s.cx, dy = y - s.cy;
    const double ca = std::cos(s.angle), sa = std::sin(s.angle);
    const double u = ca * dx + sa * dy;
    const double v = -sa * dx + ca * dy;
    if (s.class_id == 0) {
        const double a = u / s.rx, b = v / s.ry;
        return a * a + b * b <= 1.0;
    }
    return std::fabs(u) <= s.rx && std::fabs(v) <= s.ry;
}
} // namespace

Grid rasterize(const ShapeSpec& spec, int res) {
    if (res < 1) throw std::invalid_argument("rasterize: bad resolution");
    Grid g = Grid::zeros(res, res);
    const double inv = 1.0 / res;
    for (int i = 0; i < res; ++i) {
        for (int j = 0; j < res; ++j) {
            int hits = 0;
            for (int sy = 0; sy < 2; ++sy)
                for (int sx = 0; sx < 2; ++sx)
                    if (inside(spec, (j + 0.25 + 0.5 * sx) * inv, (i + 0.25 + 0.5 * sy) * inv))
                        ++hits;
            g.at(i, j) = spec.value * hits / 4.0;
        }
    }
    return g;
}

ShapeSpec sample_shape(int class_id, Rng& rng) {
    ShapeSpec s;
    s.class_id = class_id;
    s.cx = rng.uniform(0.45, 0.55);
    s.cy = rng.uniform(0.45, 0.55);
    if (class_id == 0) {
        s.rx = rng.uniform(0.28, 0.38);
        s.ry = rng.uniform(0.10, 0.16);
    } else {
        s.rx = rng.uniform(0.26, 0.36);
        s.ry = rng.uniform(0.08, 0.14);
    }
    s.angle = rng.uniform(-0.26, 0.26); // ±15° about the canonical axis
    s.value = rng.uniform(0.7, 1.0);
    return s;
}

ShapeCorpus make_corpus(int n_train, int n_holdout, Rng& rng) {
    if (n_train < 1 || n_holdout < 0) throw std::invalid_argument("make_corpus: bad counts");
    ShapeCorpus c;
    for (int i = 0; i < n_train; ++i) c.train.push_back(sample_shape(i % 2, rng));
    for (int i = 0; i < n_holdout; ++i) c.holdout.push_back(sample_shape(i % 2, rng));
    return c;
}

Vec shape_projection(const ShapeSpec& spec, double pose_angle, int res) {
    Vec p = project(rasterize(spec, res), ViewPose::at(pose_angle));
    scale(p, 1.0 / res);
    return p;
}

DatasetFn make_projection_dataset(std::vector<ShapeSpec> shapes, CondKind kind, int res) {
    if (shapes.empty()) throw std::invalid_argument("make_projection_dataset: no shapes");
    // Rasterize once; each draw then costs one projection.
    auto grids = std::make_shared<std::vector<Grid>>();
    auto specs = std::make_shared<std::vector<ShapeSpec>>(std::move(shapes));
    grids->reserve(specs->size());
    for (const ShapeSpec& s : *specs) grids->push_back(rasterize(s, res));

    return [grids, specs, kind, res](Rng& rng) {
        const int idx = rng.uniform_int(0, static_cast<int>(specs->size()) - 1);
        const double angle = rng.uniform(0.0, 6.283185307179586);
        ProjectionSample out;
        out.x0 = project((*grids)[idx], ViewPose::at(angle));
        scale(out.x0, 1.0 / res);
        switch (kind) {
        case CondKind::view: out.cond = Condition::view_at(angle); break;
        case CondKind::class_label: out.cond = Condition::of_class((*specs)[idx].class_id); break;
        case CondKind::none: out.cond = Condition::unconditional(); break;
        }
        return out;
    };
}

} // namespace sdslab
