#include "splitsmooth/common.hpp"
#include "splitsmooth/kernels.hpp"

#include <atomic>
#include <cstdlib>

namespace splitsmooth::kernels {

namespace {

Backend detect() noexcept {
#if defined(SPLITSMOOTH_HAVE_AVX2)
    if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) return Backend::avx2;
#endif
#if defined(SPLITSMOOTH_HAVE_NEON)
    return Backend::neon;
#endif
    return Backend::scalar;
}

Backend initial() noexcept {
    if (const char* env = std::getenv("SPLITSMOOTH_SIMD")) {
        try {
            const Backend b = parse_backend(env);
            if (backend_supported(b)) return b;
        } catch (...) {
        }
    }
    return detect();
}

std::atomic<Backend>& current() {
    static std::atomic<Backend> b{initial()};
    return b;
}

}  // namespace

bool backend_supported(Backend backend) noexcept {
    switch (backend) {
        case Backend::scalar: return true;
        case Backend::avx2:
#if defined(SPLITSMOOTH_HAVE_AVX2)
            return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
            return false;
#endif
        case Backend::neon:
#if defined(SPLITSMOOTH_HAVE_NEON)
            return true;
#else
            return false;
#endif
    }
    return false;
}

const KernelTable& table(Backend backend) {
    if (!backend_supported(backend)) throw InvalidArgument("SIMD backend " + to_string(backend) + " not available");
    switch (backend) {
#if defined(SPLITSMOOTH_HAVE_AVX2)
        case Backend::avx2: return detail::avx2_table();
#endif
#if defined(SPLITSMOOTH_HAVE_NEON)
        case Backend::neon: return detail::neon_table();
#endif
        default: return detail::scalar_table();
    }
}

Backend active_backend() noexcept { return current().load(std::memory_order_relaxed); }

void force_backend(Backend backend) {
    if (!backend_supported(backend)) throw InvalidArgument("SIMD backend " + to_string(backend) + " not available");
    current().store(backend, std::memory_order_relaxed);
}

std::string to_string(Backend backend) {
    switch (backend) {
        case Backend::scalar: return "scalar";
        case Backend::avx2: return "avx2";
        case Backend::neon: return "neon";
    }
    return "?";
}

Backend parse_backend(const std::string& name) {
    if (name == "scalar") return Backend::scalar;
    if (name == "avx2") return Backend::avx2;
    if (name == "neon") return Backend::neon;
    throw InvalidArgument("unknown SIMD backend '" + name + "'");
}

void scaled_diff_accumulate(double gamma, std::span<const double> a, std::span<const double> b, std::span<double> y) {
    require_dims(a.size() == y.size() && b.size() == y.size(), "kernel operands differ in length");
    table(active_backend()).scaled_diff_accumulate(gamma, a.data(), b.data(), y.data(), y.size());
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
    require_dims(a.size() == b.size(), "kernel operands differ in length");
    return table(active_backend()).squared_distance(a.data(), b.data(), a.size());
}

void sub_scaled(std::span<const double> a, std::span<const double> b, double s, std::span<double> out) {
    require_dims(a.size() == out.size() && b.size() == out.size(), "kernel operands differ in length");
    table(active_backend()).sub_scaled(a.data(), b.data(), s, out.data(), out.size());
}

void group_shrink(std::span<const double> z, std::span<double> out, std::span<const Index> offsets,
                  std::span<const Index> sizes, std::span<const double> kappa, std::size_t stride) {
    require_dims(z.size() == out.size(), "kernel operands differ in length");
    require_dims(offsets.size() == sizes.size() && kappa.size() == sizes.size(), "group metadata differs in length");
    if (stride == 0 || z.empty()) return;
    require_dims(z.size() % stride == 0, "array length is not a multiple of the stride");
    for (std::size_t g = 0; g < sizes.size(); ++g) {
        require_dims(offsets[g] >= 0 && static_cast<std::size_t>(offsets[g] + sizes[g]) <= stride,
                     "group segment exceeds the stride");
    }
    table(active_backend())
        .group_shrink(z.data(), out.data(), offsets.data(), sizes.data(), kappa.data(), sizes.size(),
                      z.size() / stride, stride);
}

}  // namespace splitsmooth::kernels
