#pragma once

#include <string>
#include <vector>

namespace kmyriad {

// Axis-aligned wall. The interior is open: standing flush on an edge is
// legal, being strictly inside is not.
struct WallRect {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  bool contains(double x, double y) const {
    return x > x0 && x < x1 && y > y0 && y < y1;
  }
};

enum class TerrainVariant { kEmpty, kMaze, kCorridor };

// Arena geometry shared by every replica of a run. Square arena
// [-half_width, half_width]^2 with optional walls.
struct TerrainSpec {
  TerrainVariant variant = TerrainVariant::kEmpty;
  double half_width = 5.0;
  std::vector<WallRect> walls;
  double spawn_x = 0.0;
  double spawn_y = 0.0;

  bool blocked(double x, double y) const {
    for (const auto& w : walls) {
      if (w.contains(x, y)) return true;
    }
    return false;
  }
  bool inside_arena(double x, double y) const {
    return x >= -half_width && x <= half_width && y >= -half_width && y <= half_width;
  }

  // Throws ConfigError when the geometry is inconsistent.
  void validate() const;

  static TerrainSpec empty(double half_width = 5.0);
  static TerrainSpec maze();
  static TerrainSpec corridor();
  static TerrainSpec by_name(const std::string& name);
  static std::string name_of(TerrainVariant v);
};

}  // namespace kmyriad
