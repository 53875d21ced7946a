#include "ceval/lens_kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

namespace ceval::lens::kernels {

namespace {

double distance(const double* a, const double* b, std::size_t dim) {
  double acc = 0.0;
  for (std::size_t d = 0; d < dim; ++d) {
    const double diff = a[d] - b[d];
    acc += diff * diff;
  }
  return std::sqrt(acc);
}

// sums has k entries, zeroed by the caller.
void silhouette_one(const SilhouetteInput& in, std::size_t i, std::vector<double>& sums, double& s,
                    unsigned char& degenerate) {
  const double* xi = in.data.data() + i * in.dim;
  std::fill(sums.begin(), sums.end(), 0.0);
  for (std::size_t j = 0; j < in.n; ++j) {
    if (j == i) continue;
    sums[static_cast<std::size_t>(in.cluster[j])] += distance(xi, in.data.data() + j * in.dim, in.dim);
  }
  const auto own = static_cast<std::size_t>(in.cluster[i]);
  const double a = sums[own] / static_cast<double>(in.cluster_sizes[own] - 1);
  double b = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < sums.size(); ++c) {
    if (c == own) continue;
    b = std::min(b, sums[c] / static_cast<double>(in.cluster_sizes[c]));
  }
  const double denom = std::max(a, b);
  if (denom <= 0.0) {
    s = 0.0;
    degenerate = 1;
  } else {
    s = (b - a) / denom;
    degenerate = 0;
  }
}

}  // namespace

void silhouette_serial(const SilhouetteInput& in, std::span<double> s, std::span<unsigned char> degenerate) {
  std::vector<double> sums(in.cluster_sizes.size());
  for (std::size_t i = 0; i < in.n; ++i) silhouette_one(in, i, sums, s[i], degenerate[i]);
}

void silhouette_omp(const SilhouetteInput& in, std::span<double> s, std::span<unsigned char> degenerate) {
  const auto n = static_cast<std::ptrdiff_t>(in.n);
#pragma omp parallel
  {
    std::vector<double> sums(in.cluster_sizes.size());
#pragma omp for schedule(dynamic, 16)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      const auto idx = static_cast<std::size_t>(i);
      silhouette_one(in, idx, sums, s[idx], degenerate[idx]);
    }
  }
}

void kde_serial(const KdeInput& in, std::span<double> out) {
  const auto res_x = in.grid_x.size();
  const auto res_y = in.grid_y.size();
  const double norm = 1.0 / (2.0 * std::numbers::pi * in.bandwidth_x * in.bandwidth_y *
                             static_cast<double>(in.xs.size()));
  for (std::size_t iy = 0; iy < res_y; ++iy) {
    for (std::size_t ix = 0; ix < res_x; ++ix) {
      double acc = 0.0;
      for (std::size_t p = 0; p < in.xs.size(); ++p) {
        const double u = (in.grid_x[ix] - in.xs[p]) / in.bandwidth_x;
        const double v = (in.grid_y[iy] - in.ys[p]) / in.bandwidth_y;
        acc += std::exp(-0.5 * (u * u + v * v));
      }
      out[iy * res_x + ix] = acc * norm;
    }
  }
}

void kde_omp(const KdeInput& in, std::span<double> out) {
  const auto res_x = in.grid_x.size();
  const auto res_y = in.grid_y.size();
  const auto npts = in.xs.size();
  const double norm = 1.0 / (2.0 * std::numbers::pi * in.bandwidth_x * in.bandwidth_y *
                             static_cast<double>(npts));

  // The kernel is separable: tabulate each axis once per point.
  std::vector<double> kx(npts * res_x), ky(npts * res_y);
  const auto np = static_cast<std::ptrdiff_t>(npts);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t p = 0; p < np; ++p) {
    const auto pi = static_cast<std::size_t>(p);
    for (std::size_t ix = 0; ix < res_x; ++ix) {
      const double u = (in.grid_x[ix] - in.xs[pi]) / in.bandwidth_x;
      kx[pi * res_x + ix] = std::exp(-0.5 * u * u);
    }
    for (std::size_t iy = 0; iy < res_y; ++iy) {
      const double v = (in.grid_y[iy] - in.ys[pi]) / in.bandwidth_y;
      ky[pi * res_y + iy] = std::exp(-0.5 * v * v);
    }
  }

  const auto ry = static_cast<std::ptrdiff_t>(res_y);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t iy = 0; iy < ry; ++iy) {
    const auto y = static_cast<std::size_t>(iy);
    double* row = out.data() + y * res_x;
    std::fill(row, row + res_x, 0.0);
    for (std::size_t p = 0; p < npts; ++p) {
      const double wy = ky[p * res_y + y];
      const double* kxp = kx.data() + p * res_x;
      for (std::size_t ix = 0; ix < res_x; ++ix) row[ix] += wy * kxp[ix];
    }
    for (std::size_t ix = 0; ix < res_x; ++ix) row[ix] *= norm;
  }
}

}  // namespace ceval::lens::kernels
