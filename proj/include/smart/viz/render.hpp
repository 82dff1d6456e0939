#pragma once

#include <array>

#include "smart/scene/bundle.hpp"

namespace smart::viz {

// Layer colors (RGB). Lane colors cycle a palette by lane index.
constexpr std::array<std::uint8_t, 3> kSdColor = {255, 255, 255};
constexpr std::array<std::uint8_t, 3> kEdgeColor = {255, 220, 0};
std::array<std::uint8_t, 3> lane_color(long index, bool predicted);

// Scene plot: satellite underlay, SD polylines, ground-truth graph, and an
// optional predicted graph. Lanes get directional arrowheads and their
// adjacency is drawn as end-to-start connectors; a swatch legend sits in the
// top-left corner. Output is deterministic for a fixed bundle.
geo::Image render_scene(const scene::SceneBundle& bundle,
                        const scene::LaneGraph* prediction = nullptr);

// render_scene + atomic PNG write
void render_to_file(const scene::SceneBundle& bundle,
                    const scene::LaneGraph* prediction,
                    const std::string& out_path);

// Ego meters -> continuous pixel (row, col) in the plot raster.
std::array<double, 2> plot_pixel(const scene::SceneBundle& bundle, double x,
                                 double y);

}  // namespace smart::viz
