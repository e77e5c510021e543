// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.
#include "splitsmooth/kernels.hpp"

#include <immintrin.h>

#include <cmath>

namespace splitsmooth::kernels::detail {

namespace {

inline double hsum(__m256d v) {
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d s = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

void scaled_diff_accumulate(double gamma, const double* a, const double* b, double* y, std::size_t n) {
    const __m256d g = _mm256_set1_pd(gamma);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256d d0 = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
        const __m256d d1 = _mm256_sub_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4));
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(g, d0, _mm256_loadu_pd(y + i)));
        _mm256_storeu_pd(y + i + 4, _mm256_fmadd_pd(g, d1, _mm256_loadu_pd(y + i + 4)));
    }
    for (; i + 4 <= n; i += 4) {
        const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(g, d, _mm256_loadu_pd(y + i)));
    }
    for (; i < n; ++i) y[i] += gamma * (a[i] - b[i]);
}

double squared_distance(const double* a, const double* b, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256d d0 = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
        const __m256d d1 = _mm256_sub_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4));
        acc0 = _mm256_fmadd_pd(d0, d0, acc0);
        acc1 = _mm256_fmadd_pd(d1, d1, acc1);
    }
    for (; i + 4 <= n; i += 4) {
        const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
        acc0 = _mm256_fmadd_pd(d, d, acc0);
    }
    double s = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

void sub_scaled(const double* a, const double* b, double s, double* out, std::size_t n) {
    const __m256d sv = _mm256_set1_pd(s);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(out + i, _mm256_fnmadd_pd(sv, _mm256_loadu_pd(b + i), _mm256_loadu_pd(a + i)));
    }
    for (; i < n; ++i) out[i] = a[i] - s * b[i];
}

inline double segment_sq(const double* seg, std::size_t len) {
    std::size_t i = 0;
    __m256d acc = _mm256_setzero_pd();
    for (; i + 4 <= len; i += 4) {
        const __m256d v = _mm256_loadu_pd(seg + i);
        acc = _mm256_fmadd_pd(v, v, acc);
    }
    double ss = hsum(acc);
    for (; i < len; ++i) ss += seg[i] * seg[i];
    return ss;
}

inline void segment_scale(const double* seg, double scale, double* dst, std::size_t len) {
    const __m256d s = _mm256_set1_pd(scale);
    std::size_t i = 0;
    for (; i + 4 <= len; i += 4) _mm256_storeu_pd(dst + i, _mm256_mul_pd(s, _mm256_loadu_pd(seg + i)));
    for (; i < len; ++i) dst[i] = scale * seg[i];
}

void group_shrink(const double* z, double* out, const Index* offsets, const Index* sizes, const double* kappa,
                  std::size_t groups, std::size_t steps, std::size_t stride) {
    // Single-entry groups (lasso rows) dominate in practice; they reduce to
    // scalar soft-thresholding and are handled without the vector path.
    for (std::size_t t = 0; t < steps; ++t) {
        const double* zt = z + t * stride;
        double* ot = out + t * stride;
        for (std::size_t g = 0; g < groups; ++g) {
            const double* seg = zt + offsets[g];
            double* dst = ot + offsets[g];
            const auto len = static_cast<std::size_t>(sizes[g]);
            const double k = kappa[g];
            if (len == 1) {
                const double norm = std::fabs(seg[0]);
                dst[0] = norm > k ? (1.0 - k / norm) * seg[0] : 0.0;
                continue;
            }
            const double norm = std::sqrt(segment_sq(seg, len));
            segment_scale(seg, norm > k ? 1.0 - k / norm : 0.0, dst, len);
        }
    }
}

constexpr KernelTable kTable{scaled_diff_accumulate, squared_distance, sub_scaled, group_shrink};

}  // namespace

const KernelTable& avx2_table() noexcept { return kTable; }

}  // namespace splitsmooth::kernels::detail
