#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace mib {

// Large activation buffers churn every update step; keeping them on the heap
// free list instead of mmap avoids re-faulting the pages on each allocation.
#if defined(__GLIBC__)
namespace detail {
inline const bool malloc_tuned = [] {
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  return true;
}();
}  // namespace detail
#endif

template <class T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <class T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

using MatF = Mat<float>;
using VecF = Vec<float>;
using MatD = Mat<double>;
using VecD = Vec<double>;

template <class Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  return m.allFinite();
}

#define MIB_CHECK(cond, msg)                                  \
  do {                                                        \
    if (!(cond)) throw std::invalid_argument(std::string(msg)); \
  } while (0)

#define MIB_RUNTIME_CHECK(cond, msg)                         \
  do {                                                       \
    if (!(cond)) throw std::runtime_error(std::string(msg)); \
  } while (0)

}  // namespace mib
