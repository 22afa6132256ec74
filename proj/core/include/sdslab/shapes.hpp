#pragma once

#include "sdslab/grid.hpp"
#include "sdslab/rng.hpp"
#include "sdslab/teacher.hpp"

#include <vector>

namespace sdslab {

// One synthetic ground-truth object: an elongated ellipse (class 0) or
// rectangle (class 1) in normalized [0,1]² coordinates. Orientations jitter
// around a shared canonical axis so that the projection statistics depend on
// the view angle — that dependence is what a view-conditioned denoiser can
// exploit and a class-conditioned one cannot.
struct ShapeSpec {
    int class_id = 0; // 0 = ellipse, 1 = rectangle
    double cx = 0.5, cy = 0.5;
    double rx = 0.3, ry = 0.12; // semi-axes, rx > ry (anisotropic)
    double angle = 0.0;         // rotation, radians
    double value = 1.0;         // fill intensity in (0,1]
};

// Antialiased rasterization (2×2 supersampling) onto a res×res grid; values
// in [0, value].
Grid rasterize(const ShapeSpec& spec, int res);

ShapeSpec sample_shape(int class_id, Rng& rng);

struct ShapeCorpus {
    std::vector<ShapeSpec> train;
    std::vector<ShapeSpec> holdout;
};

// Deterministic under the rng seed; classes alternate so both are always
// represented.
ShapeCorpus make_corpus(int n_train, int n_holdout, Rng& rng);

// Normalized projection of a shape: rasterize at `res`, project at `pose`,
// divide by `res` so values are O(1) regardless of resolution. This is the
// space all teachers operate in.
Vec shape_projection(const ShapeSpec& spec, double pose_angle, int res);

// Training-sample generator for teacher fitting: draws a corpus shape and a
// uniform view angle, returns the normalized projection with the requested
// condition kind attached. Rasterizations are precomputed once.
DatasetFn make_projection_dataset(std::vector<ShapeSpec> shapes, CondKind kind, int res);

} // namespace sdslab
