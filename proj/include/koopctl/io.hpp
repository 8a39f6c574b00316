#pragma once

#include <string>
#include <vector>

#include "koopctl/dynamics.hpp"

namespace koopctl {

// Header t,y1..yD,u1; the control cell is empty on the final row; values are
// written with 17 significant digits so reading back is exact.
void write_trajectory_csv(const std::string& path, const Trajectory& traj, double dt);
Trajectory read_trajectory_csv(const std::string& path);

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

// Minimal self-contained SVG line plot; axes, ticks on the data range, one
// polyline per series, legend in the top-right corner.
void write_line_plot_svg(const std::string& path, const std::string& title,
                         const std::vector<Series>& series);

// Convenience: one series per measurement element against time.
void write_trajectory_svg(const std::string& path, const std::string& title,
                          const Trajectory& traj, double dt);

} // namespace koopctl
