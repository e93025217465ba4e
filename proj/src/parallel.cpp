#include "swreg/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace swreg::parallel {

namespace {

std::atomic<int> g_override{0};

int env_cap() {
    static const int cap = [] {
        const char* s = std::getenv("SWREG_THREADS");
        if (s == nullptr) return 0;
        try {
            const int v = std::stoi(s);
            return v > 0 ? v : 0;
        } catch (...) {
            return 0;
        }
    }();
    return cap;
}

constexpr std::size_t kBlock = 1024;

}  // namespace

int threads() {
    if (const int o = g_override.load(); o > 0) return o;
#ifdef _OPENMP
    int n = omp_get_max_threads();
#else
    int n = 1;
#endif
    if (const int cap = env_cap(); cap > 0) n = std::min(n, cap);
    return std::max(n, 1);
}

void set_threads(int n) { g_override.store(std::max(n, 0)); }

double deterministic_sum(std::span<const double> values) {
    const std::size_t n = values.size();
    const std::size_t blocks = (n + kBlock - 1) / kBlock;
    std::vector<double> partial(blocks, 0.0);
    const auto nb = static_cast<long long>(blocks);
#pragma omp parallel for schedule(static) num_threads(threads()) if (n >= kMinParallelWork)
    for (long long b = 0; b < nb; ++b) {
        const std::size_t lo = static_cast<std::size_t>(b) * kBlock;
        const std::size_t hi = std::min(n, lo + kBlock);
        double s = 0.0;
        for (std::size_t i = lo; i < hi; ++i) s += values[i];
        partial[static_cast<std::size_t>(b)] = s;
    }
    double total = 0.0;
    for (double p : partial) total += p;
    return total;
}

}  // namespace swreg::parallel
