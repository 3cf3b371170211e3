#pragma once

#include <span>
#include <vector>

namespace arz {

/// Uniform cell-center coordinates (i + 1/2)·L/nx, i = 0..nx-1.
std::vector<double> cell_centers(double length, int nx);

/// Integral over [0, length] of the piecewise-linear interpolant of samples
/// taken at cell centers, extended flat to both ends. For a uniform grid this
/// reduces to h·Σ f_i.
double integrate_cells(std::span<const double> values, double length);

/// Same rule over [0, x_upto], where x_upto = grid[upto] is a sample point.
double integrate_cells_prefix(std::span<const double> values, std::span<const double> grid,
                              std::size_t upto);

/// L2 norm over [0, length] using integrate_cells on the squared samples.
double l2_norm_cells(std::span<const double> values, double length);

}  // namespace arz
