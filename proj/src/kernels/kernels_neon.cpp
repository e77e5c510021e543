// AArch64 Advanced SIMD variants. Built only when the target has NEON.
#include "splitsmooth/kernels.hpp"

#include <arm_neon.h>

#include <cmath>

namespace splitsmooth::kernels::detail {

namespace {

void scaled_diff_accumulate(double gamma, const double* a, const double* b, double* y, std::size_t n) {
    const float64x2_t g = vdupq_n_f64(gamma);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        const float64x2_t d = vsubq_f64(vld1q_f64(a + i), vld1q_f64(b + i));
        vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), g, d));
    }
    for (; i < n; ++i) y[i] += gamma * (a[i] - b[i]);
}

double squared_distance(const double* a, const double* b, std::size_t n) {
    float64x2_t acc = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        const float64x2_t d = vsubq_f64(vld1q_f64(a + i), vld1q_f64(b + i));
        acc = vfmaq_f64(acc, d, d);
    }
    double s = vaddvq_f64(acc);
    for (; i < n; ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

void sub_scaled(const double* a, const double* b, double s, double* out, std::size_t n) {
    const float64x2_t sv = vdupq_n_f64(s);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) vst1q_f64(out + i, vfmsq_f64(vld1q_f64(a + i), sv, vld1q_f64(b + i)));
    for (; i < n; ++i) out[i] = a[i] - s * b[i];
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
            float64x2_t acc = vdupq_n_f64(0.0);
            std::size_t i = 0;
            for (; i + 2 <= len; i += 2) {
                const float64x2_t v = vld1q_f64(seg + i);
                acc = vfmaq_f64(acc, v, v);
            }
            double ss = vaddvq_f64(acc);
            for (; i < len; ++i) ss += seg[i] * seg[i];
            const double norm = std::sqrt(ss);
            const double scale = norm > kappa[g] ? 1.0 - kappa[g] / norm : 0.0;
            const float64x2_t sv = vdupq_n_f64(scale);
            i = 0;
            for (; i + 2 <= len; i += 2) vst1q_f64(dst + i, vmulq_f64(sv, vld1q_f64(seg + i)));
            for (; i < len; ++i) dst[i] = scale * seg[i];
        }
    }
}

constexpr KernelTable kTable{scaled_diff_accumulate, squared_distance, sub_scaled, group_shrink};

}  // namespace

const KernelTable& neon_table() noexcept { return kTable; }

}  // namespace splitsmooth::kernels::detail
