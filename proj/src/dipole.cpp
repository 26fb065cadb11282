#include "qsmpad/dipole.hpp"

#include <fftw3.h>

#include <complex>
#include <mutex>

namespace qsmpad {

namespace {

// FFTW plan creation/destruction is not thread-safe; execution is.
std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

struct FftwBuffer {
    void* p = nullptr;
    explicit FftwBuffer(std::size_t bytes) : p(fftw_malloc(bytes)) {}
    ~FftwBuffer() { fftw_free(p); }
    FftwBuffer(const FftwBuffer&) = delete;
    FftwBuffer& operator=(const FftwBuffer&) = delete;
};

} // namespace

DipoleKernel dipole_kernel(const GridMeta& meta) {
    meta.validate();
    DipoleKernel k{meta, std::vector<double>(meta.voxel_count())};
    const int nx = meta.dims[0], ny = meta.dims[1], nz = meta.dims[2];
    const auto& vs = meta.voxel_size;
    const auto& b0 = meta.b0_dir;
    auto freq = [](int idx, int n, double voxel) {
        const int s = idx <= n / 2 ? idx : idx - n;
        return static_cast<double>(s) / (static_cast<double>(n) * voxel);
    };
    std::size_t i = 0;
    for (int z = 0; z < nz; ++z) {
        const double kz = freq(z, nz, vs[2]);
        for (int y = 0; y < ny; ++y) {
            const double ky = freq(y, ny, vs[1]);
            for (int x = 0; x < nx; ++x, ++i) {
                const double kx = freq(x, nx, vs[0]);
                const double k2 = kx * kx + ky * ky + kz * kz;
                if (k2 == 0.0) {
                    k.values[i] = 0.0;
                    continue;
                }
                const double kb = kx * b0[0] + ky * b0[1] + kz * b0[2];
                k.values[i] = 1.0 / 3.0 - (kb * kb) / k2;
            }
        }
    }
    return k;
}

Volume3D forward_field(const Volume3D& chi, const DipoleKernel& kernel) {
    chi.validate();
    if (!(chi.meta == kernel.meta))
        throw ValidationError("forward_field: chi and kernel grids differ");

    const int nx = chi.meta.dims[0], ny = chi.meta.dims[1], nz = chi.meta.dims[2];
    const std::size_t n_real = chi.meta.voxel_count();
    const std::size_t n_half = static_cast<std::size_t>(nz) * ny * (nx / 2 + 1);

    FftwBuffer real_buf(sizeof(double) * n_real);
    FftwBuffer cplx_buf(sizeof(fftw_complex) * n_half);
    double* real = static_cast<double*>(real_buf.p);
    fftw_complex* cplx = static_cast<fftw_complex*>(cplx_buf.p);

    // Our x-fastest layout maps onto FFTW's row-major order as (nz, ny, nx).
    fftw_plan fwd, bwd;
    {
        std::lock_guard<std::mutex> lock(fftw_planner_mutex());
        fwd = fftw_plan_dft_r2c_3d(nz, ny, nx, real, cplx, FFTW_ESTIMATE);
        bwd = fftw_plan_dft_c2r_3d(nz, ny, nx, cplx, real, FFTW_ESTIMATE);
    }

    for (std::size_t i = 0; i < n_real; ++i) real[i] = chi.data[i];
    fftw_execute(fwd);

    const double scale = 1.0 / static_cast<double>(n_real);
    std::size_t h = 0;
    for (int z = 0; z < nz; ++z)
        for (int y = 0; y < ny; ++y)
            for (int x = 0; x <= nx / 2; ++x, ++h) {
                const double d = kernel.values[static_cast<std::size_t>(x) +
                                               static_cast<std::size_t>(nx) *
                                                   (y + static_cast<std::size_t>(ny) * z)] *
                                 scale;
                cplx[h][0] *= d;
                cplx[h][1] *= d;
            }

    fftw_execute(bwd);

    Volume3D out(chi.meta);
    for (std::size_t i = 0; i < n_real; ++i) out.data[i] = real[i];

    {
        std::lock_guard<std::mutex> lock(fftw_planner_mutex());
        fftw_destroy_plan(fwd);
        fftw_destroy_plan(bwd);
    }
    return out;
}

} // namespace qsmpad
