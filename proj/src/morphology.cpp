#include "qsmpad/morphology.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace qsmpad {

namespace {

constexpr double kBig = std::numeric_limits<double>::max() / 16.0;

// Felzenszwalb-Huttenlocher 1D squared distance transform under the parabola
// metric d(p,q) = (p-q)^2 + f(q), evaluated on a strided slice.
void edt_1d(double* f, int n, std::ptrdiff_t stride, std::vector<double>& scratch,
            std::vector<int>& v, std::vector<double>& z) {
    scratch.resize(n);
    v.resize(n);
    z.resize(n + 1);
    for (int i = 0; i < n; ++i) scratch[i] = f[i * stride];

    int k = 0;
    v[0] = 0;
    z[0] = -kBig;
    z[1] = kBig;
    for (int q = 1; q < n; ++q) {
        double s;
        for (;;) {
            const int p = v[k];
            s = ((scratch[q] + q * static_cast<double>(q)) - (scratch[p] + p * static_cast<double>(p))) /
                (2.0 * (q - p));
            if (s > z[k]) break;
            --k;
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = kBig;
    }

    k = 0;
    for (int q = 0; q < n; ++q) {
        while (z[k + 1] < q) ++k;
        const double d = q - static_cast<double>(v[k]);
        f[q * stride] = d * d + scratch[v[k]];
    }
}

} // namespace

std::vector<double> squared_euclidean_distance_to_invalid(const Mask3D& mask) {
    mask.validate();
    const int nx = mask.meta.dims[0], ny = mask.meta.dims[1], nz = mask.meta.dims[2];
    // One padded layer of invalid voxels stands in for everything outside the
    // array: clamping any outside position onto the pad shell never increases
    // its distance to an interior voxel.
    const int px = nx + 2, py = ny + 2, pz = nz + 2;
    std::vector<double> d(static_cast<std::size_t>(px) * py * pz, 0.0);
    auto pidx = [&](int x, int y, int z) {
        return static_cast<std::size_t>(x) + static_cast<std::size_t>(px) * (y + static_cast<std::size_t>(py) * z);
    };
    for (int z = 0; z < nz; ++z)
        for (int y = 0; y < ny; ++y)
            for (int x = 0; x < nx; ++x)
                d[pidx(x + 1, y + 1, z + 1)] = mask.at(x, y, z) ? kBig : 0.0;

    std::vector<double> scratch;
    std::vector<int> v;
    std::vector<double> z;

    // Anisotropic spacing: scale values into the axis' squared-voxel units
    // before the pass and back out after.
    const auto& vs = mask.meta.voxel_size;
    // x axis
    {
        const double s2 = vs[0] * vs[0];
        for (int zz = 0; zz < pz; ++zz)
            for (int yy = 0; yy < py; ++yy) {
                double* line = &d[pidx(0, yy, zz)];
                for (int i = 0; i < px; ++i) line[i] = std::min(line[i] / s2, kBig);
                edt_1d(line, px, 1, scratch, v, z);
                for (int i = 0; i < px; ++i) line[i] = std::min(line[i] * s2, kBig);
            }
    }
    // y axis
    {
        const double s2 = vs[1] * vs[1];
        for (int zz = 0; zz < pz; ++zz)
            for (int xx = 0; xx < px; ++xx) {
                double* line = &d[pidx(xx, 0, zz)];
                for (int i = 0; i < py; ++i) line[i * px] = std::min(line[i * px] / s2, kBig);
                edt_1d(line, py, px, scratch, v, z);
                for (int i = 0; i < py; ++i) line[i * px] = std::min(line[i * px] * s2, kBig);
            }
    }
    // z axis
    {
        const double s2 = vs[2] * vs[2];
        const std::ptrdiff_t stride = static_cast<std::ptrdiff_t>(px) * py;
        for (int yy = 0; yy < py; ++yy)
            for (int xx = 0; xx < px; ++xx) {
                double* line = &d[pidx(xx, yy, 0)];
                for (int i = 0; i < pz; ++i) line[i * stride] = std::min(line[i * stride] / s2, kBig);
                edt_1d(line, pz, stride, scratch, v, z);
                for (int i = 0; i < pz; ++i) line[i * stride] = std::min(line[i * stride] * s2, kBig);
            }
    }

    std::vector<double> out(mask.meta.voxel_count());
    for (int zz = 0; zz < nz; ++zz)
        for (int yy = 0; yy < ny; ++yy)
            for (int xx = 0; xx < nx; ++xx)
                out[mask.index(xx, yy, zz)] = d[pidx(xx + 1, yy + 1, zz + 1)];
    return out;
}

Mask3D erode_mask(const Mask3D& mask, double radius_mm) {
    if (radius_mm < 0.0 || !std::isfinite(radius_mm))
        throw ValidationError("erode_mask: radius_mm must be nonnegative and finite");
    if (radius_mm == 0.0) return mask;
    const std::vector<double> d2 = squared_euclidean_distance_to_invalid(mask);
    const double r2 = radius_mm * radius_mm;
    Mask3D out(mask.meta);
    for (std::size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = (mask.data[i] && d2[i] > r2) ? 1 : 0;
    return out;
}

std::vector<int> chessboard_distance_to_invalid(const Mask3D& mask) {
    mask.validate();
    const int nx = mask.meta.dims[0], ny = mask.meta.dims[1], nz = mask.meta.dims[2];
    const int inf = nx + ny + nz + 3;
    std::vector<int> d(mask.meta.voxel_count());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = mask.data[i] ? inf : 0;

    auto at = [&](int x, int y, int z) -> int& { return d[mask.index(x, y, z)]; };
    // Out-of-array neighbors sit at distance 0 (edge is invalid).
    auto probe = [&](int x, int y, int z) -> int {
        if (x < 0 || x >= nx || y < 0 || y >= ny || z < 0 || z >= nz) return 0;
        return at(x, y, z);
    };

    // Two chamfer passes with unit weights compute exact L-inf distance.
    for (int z = 0; z < nz; ++z)
        for (int y = 0; y < ny; ++y)
            for (int x = 0; x < nx; ++x) {
                int best = at(x, y, z);
                if (best == 0) continue;
                for (int dz = -1; dz <= 0; ++dz)
                    for (int dy = -1; dy <= 1; ++dy)
                        for (int dx = -1; dx <= 1; ++dx) {
                            if (dz == 0 && (dy > 0 || (dy == 0 && dx >= 0))) continue;
                            best = std::min(best, probe(x + dx, y + dy, z + dz) + 1);
                        }
                at(x, y, z) = best;
            }
    for (int z = nz - 1; z >= 0; --z)
        for (int y = ny - 1; y >= 0; --y)
            for (int x = nx - 1; x >= 0; --x) {
                int best = at(x, y, z);
                if (best == 0) continue;
                for (int dz = 0; dz <= 1; ++dz)
                    for (int dy = -1; dy <= 1; ++dy)
                        for (int dx = -1; dx <= 1; ++dx) {
                            if (dz == 0 && (dy < 0 || (dy == 0 && dx <= 0))) continue;
                            best = std::min(best, probe(x + dx, y + dy, z + dz) + 1);
                        }
                at(x, y, z) = best;
            }
    return d;
}

Mask3D boundary_band(const Mask3D& mask, int width_voxels) {
    if (width_voxels < 1) throw ValidationError("boundary_band: width must be >= 1");
    const std::vector<int> d = chessboard_distance_to_invalid(mask);
    Mask3D out(mask.meta);
    for (std::size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = (mask.data[i] && d[i] <= width_voxels) ? 1 : 0;
    return out;
}

} // namespace qsmpad
