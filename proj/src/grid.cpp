#include "arz/grid.hpp"

#include <cmath>

#include "arz/errors.hpp"

namespace arz {

std::vector<double> cell_centers(double length, int nx) {
  if (nx < 1 || !(length > 0.0)) throw DomainError("cell_centers: need nx >= 1 and length > 0");
  const double h = length / nx;
  std::vector<double> x(static_cast<std::size_t>(nx));
  for (int i = 0; i < nx; ++i) x[static_cast<std::size_t>(i)] = (i + 0.5) * h;
  return x;
}

double integrate_cells(std::span<const double> values, double length) {
  if (values.empty()) return 0.0;
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum * length / static_cast<double>(values.size());
}

double integrate_cells_prefix(std::span<const double> values, std::span<const double> grid,
                              std::size_t upto) {
  if (values.size() != grid.size()) throw ShapeError("integrate_cells_prefix: size mismatch");
  if (upto >= values.size()) throw DomainError("integrate_cells_prefix: index out of range");
  double sum = values[0] * grid[0];
  for (std::size_t k = 0; k < upto; ++k) {
    sum += 0.5 * (values[k] + values[k + 1]) * (grid[k + 1] - grid[k]);
  }
  return sum;
}

double l2_norm_cells(std::span<const double> values, double length) {
  if (values.empty()) return 0.0;
  double sum = 0.0;
  for (double v : values) sum += v * v;
  return std::sqrt(sum * length / static_cast<double>(values.size()));
}

}  // namespace arz
