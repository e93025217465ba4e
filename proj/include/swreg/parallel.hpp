#pragma once

#include <cstddef>
#include <exception>
#include <mutex>
#include <span>

namespace swreg::parallel {

/// Worker count used by the OpenMP kernels: the OpenMP default, capped by
/// the SWREG_THREADS environment variable when it is set to a positive int.
int threads();

/// Overrides threads() for the rest of the process (0 restores the default).
void set_threads(int n);

/// Loops shorter than this run on the calling thread.
inline constexpr std::size_t kMinParallelWork = 4096;

/// Sum with a fixed blocking that does not depend on the thread count, so
/// parallel reductions are reproducible bit-for-bit.
double deterministic_sum(std::span<const double> values);

/// Carries the first exception out of an OpenMP loop body, which must not
/// let one escape.
class FirstError {
public:
    template <class F>
    void run(F&& body) noexcept {
        try {
            body();
        } catch (...) {
            std::lock_guard lock(mutex_);
            if (!error_) error_ = std::current_exception();
        }
    }
    void rethrow() const {
        if (error_) std::rethrow_exception(error_);
    }

private:
    std::mutex mutex_;
    std::exception_ptr error_;
};

}  // namespace swreg::parallel
