#include "kmyriad/terrain.hpp"

#include "kmyriad/errors.hpp"

namespace kmyriad {

void TerrainSpec::validate() const {
  if (half_width <= 0.0) throw ConfigError("arena half-width must be positive");
  for (const auto& w : walls) {
    if (w.x0 >= w.x1 || w.y0 >= w.y1) {
      throw ConfigError("wall rectangle has non-positive extent");
    }
    if (w.x0 < -half_width || w.x1 > half_width || w.y0 < -half_width ||
        w.y1 > half_width) {
      throw ConfigError("wall rectangle extends outside the arena");
    }
  }
  if (!inside_arena(spawn_x, spawn_y)) throw ConfigError("spawn outside the arena");
  if (blocked(spawn_x, spawn_y)) throw ConfigError("spawn inside a wall");
}

TerrainSpec TerrainSpec::empty(double half_width) {
  TerrainSpec t;
  t.variant = TerrainVariant::kEmpty;
  t.half_width = half_width;
  t.validate();
  return t;
}

TerrainSpec TerrainSpec::maze() {
  // S-shaped path: the left column opens at the top, the right at the bottom
  TerrainSpec t;
  t.variant = TerrainVariant::kMaze;
  t.half_width = 5.0;
  t.walls = {{-1.75, -5.0, -1.25, 2.0}, {1.25, -2.0, 1.75, 5.0}};
  t.validate();
  return t;
}

TerrainSpec TerrainSpec::corridor() {
  TerrainSpec t;
  t.variant = TerrainVariant::kCorridor;
  t.half_width = 5.0;
  t.walls = {{-5.0, 0.8, 5.0, 5.0}, {-5.0, -5.0, 5.0, -0.8}};
  t.validate();
  return t;
}

TerrainSpec TerrainSpec::by_name(const std::string& name) {
  if (name == "empty") return empty();
  if (name == "maze") return maze();
  if (name == "corridor") return corridor();
  throw ConfigError("unknown terrain variant '" + name + "'");
}

std::string TerrainSpec::name_of(TerrainVariant v) {
  switch (v) {
    case TerrainVariant::kEmpty: return "empty";
    case TerrainVariant::kMaze: return "maze";
    case TerrainVariant::kCorridor: return "corridor";
  }
  return "empty";
}

}  // namespace kmyriad
