#pragma once

#include <cstddef>
#include <span>

// Data-parallel inner loops of the embedding analysis. Each kernel has an
// OpenMP version used by the library and a plain serial reference kept for
// tests and benchmarks. Both versions produce results independent of thread
// count: every output element is reduced in a fixed order.
namespace ceval::lens::kernels {

struct SilhouetteInput {
  std::span<const double> data;      // row-major, n x dim
  std::size_t n = 0;
  std::size_t dim = 0;
  std::span<const int> cluster;      // n entries in [0, k)
  std::span<const std::size_t> cluster_sizes;  // k entries, each >= 2
};

// Writes s(i) for every item. `degenerate[i]` is set when a(i) = b(i) = 0 and
// s(i) was defined as 0.
void silhouette_serial(const SilhouetteInput& in, std::span<double> s, std::span<unsigned char> degenerate);
void silhouette_omp(const SilhouetteInput& in, std::span<double> s, std::span<unsigned char> degenerate);

struct KdeInput {
  std::span<const double> xs;  // point coordinates
  std::span<const double> ys;
  double bandwidth_x = 1.0;
  double bandwidth_y = 1.0;
  std::span<const double> grid_x;  // evaluation coordinates, length res_x
  std::span<const double> grid_y;  // length res_y
};

// Unnormalized Gaussian product-kernel density at every grid point,
// row-major with y as the outer index: out[iy * res_x + ix].
void kde_serial(const KdeInput& in, std::span<double> out);
void kde_omp(const KdeInput& in, std::span<double> out);

}  // namespace ceval::lens::kernels
