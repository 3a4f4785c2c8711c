#pragma once

#include <cstddef>
#include <new>
#include <vector>

namespace corast::nn {

// Vectorized Eigen reductions peel leading elements until the pointer is
// aligned, so the summation order (and the last bit of the result) follows
// the heap address. Every buffer handed to Eigen is therefore allocated on a
// fixed 64-byte boundary.
template <typename T>
struct AlignedAllocator {
    using value_type = T;
    static constexpr std::align_val_t alignment{64};

    AlignedAllocator() = default;
    template <typename U>
    AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

    T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), alignment)); }
    void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, alignment); }

    template <typename U>
    bool operator==(const AlignedAllocator<U>&) const noexcept { return true; }
};

using AlignedVector = std::vector<double, AlignedAllocator<double>>;

}  // namespace corast::nn
