#include "splitsmooth/kernels.hpp"

#include <cmath>

namespace splitsmooth::kernels::detail {

namespace {

void scaled_diff_accumulate(double gamma, const double* a, const double* b, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += gamma * (a[i] - b[i]);
}

double squared_distance(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

void sub_scaled(const double* a, const double* b, double s, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - s * b[i];
}

void group_shrink(const double* z, double* out, const Index* offsets, const Index* sizes, const double* kappa,
                  std::size_t groups, std::size_t steps, std::size_t stride) {
    for (std::size_t t = 0; t < steps; ++t) {
        const double* zt = z + t * stride;
        double* ot = out + t * stride;
        for (std::size_t g = 0; g < groups; ++g) {
            const double* seg = zt + offsets[g];
            double* dst = ot + offsets[g];
            const auto len = static_cast<std::size_t>(sizes[g]);
            double ss = 0.0;
            for (std::size_t i = 0; i < len; ++i) ss += seg[i] * seg[i];
            const double norm = std::sqrt(ss);
            const double k = kappa[g];
            const double scale = norm > k ? 1.0 - k / norm : 0.0;
            for (std::size_t i = 0; i < len; ++i) dst[i] = scale * seg[i];
        }
    }
}

constexpr KernelTable kTable{scaled_diff_accumulate, squared_distance, sub_scaled, group_shrink};

}  // namespace

const KernelTable& scalar_table() noexcept { return kTable; }

}  // namespace splitsmooth::kernels::detail
