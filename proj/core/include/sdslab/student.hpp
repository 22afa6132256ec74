#pragma once

#include "sdslab/grid.hpp"

#include <array>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace sdslab {

// Rendering pose on the circle; the 2D analog of a camera orbit.
struct ViewPose {
    double angle = 0.0; // radians, normalized to [0, 2π)

    static ViewPose at(double angle_rad);
};

// Wraps an angle into [0, 2π).
double normalize_angle(double a);
// Shortest angular distance between two poses, in [0, π].
double angular_distance(ViewPose a, ViewPose b);

// Closed polygon along an iso-level set, vertices in field coordinates
// (x = column, y = row); adjacency implied by ordering, last connects to first.
struct IsoContour {
    std::vector<std::array<double, 2>> vertices;
};

struct EmptyContour : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// The student: a multi-resolution coefficient pyramid. The rendered field is
// the masked sum of every level resampled to render_res; keeping the student
// linear in its coefficients makes all gradients exact.
struct PyramidField {
    std::vector<Grid> levels; // square grids, strictly increasing resolution
    int render_res = 0;
    int stage = 1; // 1 = coarse, 2 = fine

    int level_count() const { return static_cast<int>(levels.size()); }
    size_t param_count() const;
};

// Zero-initialized pyramid; throws invalid_argument on non-increasing or
// non-positive resolutions.
PyramidField make_pyramid(const std::vector<int>& resolutions, int render_res, int stage = 1);

// Flat parameter view in level order (row-major within each level).
Vec flatten_params(const PyramidField& field);
void assign_params(PyramidField& field, std::span<const double> params);
Vec flatten_level_grads(const std::vector<Grid>& level_grads);

// Resamples a square grid to dst_res with origin-aligned bilinear
// interpolation: source coordinate = dst index · src_res / dst_res, clamped.
// Power-of-two resolutions nest exactly under this map, so coarse sample
// points are reproduced bit-for-bit across stage upgrades.
Grid resample_bilinear(const Grid& src, int dst_res);
// Exact adjoint of resample_bilinear: scatters a dst_res×dst_res gradient
// back onto a src_res×src_res grid.
Grid resample_bilinear_adjoint(const Grid& grad_dst, int src_res, int dst_res);

// Masked sum of resampled levels; mask entries usually in {0,1}, soft values
// accepted. Raw values — clamping happens only at metric time.
Grid field_render(const PyramidField& field, const Vec& mask);

// Discrete line-integral renderer: R parallel rays × R unit-spaced samples
// through the grid center, bilinear sampling, zero outside support. Ray j at
// angle 0 reproduces column j sums. Linear in the field.
Vec project(const Grid& field2d, ViewPose pose);
// Exact adjoint of project for the same pose and resolution.
Grid project_adjoint(const Vec& grad_proj, ViewPose pose, int res);

// Chains a gradient w.r.t. the rendered field back to per-level coefficient
// gradients: level i receives mask_i · (resample adjoint of field_grad).
std::vector<Grid> render_grad_to_params(const PyramidField& field, const Grid& field_grad,
                                        const Vec& mask);

// Stage transition: keeps every coefficient, appends one zero-initialized
// level at double the finest resolution, and raises render_res. The rendered
// field agrees with the old one at co-located coarse sample points.
PyramidField upgrade_stage(const PyramidField& field, int new_render_res);

// Marching-squares extraction of the longest closed polygon along the
// iso-level set. Throws EmptyContour when the field never crosses iso or no
// crossing closes up inside the grid.
IsoContour extract_contour(const Grid& field2d, double iso);

// Shoelace area of a closed polygon.
double polygon_area(const IsoContour& contour);
double polygon_perimeter(const IsoContour& contour);

} // namespace sdslab
