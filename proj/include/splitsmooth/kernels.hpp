#pragma once

// Flat-array kernels used by the splitting updates. Each kernel has a scalar
// reference implementation and, where the target supports it, an AVX2 or NEON
// variant. The variant is chosen once at runtime; SPLITSMOOTH_SIMD=scalar
// (or avx2 / neon) overrides the choice.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>

namespace splitsmooth::kernels {

enum class Backend { scalar, avx2, neon };

using Index = std::ptrdiff_t;

struct KernelTable {
    /// y[i] += gamma * (a[i] - b[i])
    void (*scaled_diff_accumulate)(double gamma, const double* a, const double* b, double* y, std::size_t n);
    /// sum (a[i] - b[i])^2
    double (*squared_distance)(const double* a, const double* b, std::size_t n);
    /// out[i] = a[i] - s * b[i]
    void (*sub_scaled)(const double* a, const double* b, double s, double* out, std::size_t n);
    /// Block soft-threshold of every group segment at every step. Step t,
    /// group g occupies [t * stride + offsets[g], + sizes[g]).
    void (*group_shrink)(const double* z, double* out, const Index* offsets, const Index* sizes, const double* kappa,
                         std::size_t groups, std::size_t steps, std::size_t stride);
};

bool backend_supported(Backend backend) noexcept;
const KernelTable& table(Backend backend);

Backend active_backend() noexcept;
/// Throws InvalidArgument if the backend is not available on this machine.
void force_backend(Backend backend);

std::string to_string(Backend backend);
Backend parse_backend(const std::string& name);

// Convenience wrappers over the active table.

void scaled_diff_accumulate(double gamma, std::span<const double> a, std::span<const double> b, std::span<double> y);
double squared_distance(std::span<const double> a, std::span<const double> b);
void sub_scaled(std::span<const double> a, std::span<const double> b, double s, std::span<double> out);
void group_shrink(std::span<const double> z, std::span<double> out, std::span<const Index> offsets,
                  std::span<const Index> sizes, std::span<const double> kappa, std::size_t stride);

namespace detail {
const KernelTable& scalar_table() noexcept;
#if defined(SPLITSMOOTH_HAVE_AVX2)
const KernelTable& avx2_table() noexcept;
#endif
#if defined(SPLITSMOOTH_HAVE_NEON)
const KernelTable& neon_table() noexcept;
#endif
}  // namespace detail

}  // namespace splitsmooth::kernels
