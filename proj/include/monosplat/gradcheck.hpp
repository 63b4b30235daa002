#pragma once

#include "monosplat/core.hpp"
#include "monosplat/raster.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace monosplat {

struct GradcheckOptions {
    int scenes = 20;
    int primitives = 50;
    int size = 64;
    double step = 1e-4;
    double rel_tolerance = 1e-3;
    double min_magnitude = 1e-6;
};

struct GradcheckFailure {
    int scene = 0;
    int primitive = 0;
    std::string parameter;  // e.g. "position.y"
    double analytic = 0.0;
    double numeric = 0.0;
};

struct GradcheckReport {
    long checked = 0;
    long skipped = 0;  // below min_magnitude
    double worst_relative_error = 0.0;
    std::vector<GradcheckFailure> failures;
    // Number of coordinates checked per attribute group.
    long position = 0, color = 0, opacity = 0, scale = 0, rotation = 0;

    bool passed() const { return failures.empty(); }
};

/// Compares rasterize_backward with central differences on random scenes,
/// using a random linear functional of color, depth and alpha as the loss.
GradcheckReport run_raster_gradcheck(std::uint64_t seed, const GradcheckOptions& opt = {});

/// Parameter `k` of a primitive in the order position(3) color(3) opacity(1)
/// log_scale(3) rotation(4).
double& primitive_parameter(GaussianPrimitive& p, int k);
double gradient_parameter(const PrimitiveGradient& g, int k);
const char* parameter_name(int k);

} // namespace monosplat
