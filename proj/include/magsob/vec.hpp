#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <initializer_list>
#include <sstream>
#include <string>

#include "magsob/error.hpp"

namespace magsob {

using Complex = std::complex<double>;

inline constexpr int kMaxDim = 3;

/// Fixed-capacity vector with a runtime dimension in [0, kMaxDim].
template <class T>
class SmallVec {
 public:
  SmallVec() = default;
  explicit SmallVec(int dim) : dim_(dim) {
    if (dim < 0 || dim > kMaxDim) {
      throw UsageError("dimension " + std::to_string(dim) + " outside [0, 3]");
    }
  }
  SmallVec(std::initializer_list<T> values) : SmallVec(static_cast<int>(values.size())) {
    int i = 0;
    for (const T& v : values) data_[i++] = v;
  }

  int dim() const { return dim_; }
  T& operator[](int i) { return data_[i]; }
  const T& operator[](int i) const { return data_[i]; }
  const T* begin() const { return data_.data(); }
  const T* end() const { return data_.data() + dim_; }

  SmallVec& operator+=(const SmallVec& o) {
    for (int i = 0; i < dim_; ++i) data_[i] += o.data_[i];
    return *this;
  }
  SmallVec& operator-=(const SmallVec& o) {
    for (int i = 0; i < dim_; ++i) data_[i] -= o.data_[i];
    return *this;
  }
  template <class S>
  SmallVec& operator*=(const S& s) {
    for (int i = 0; i < dim_; ++i) data_[i] *= s;
    return *this;
  }

  friend SmallVec operator+(SmallVec a, const SmallVec& b) { return a += b; }
  friend SmallVec operator-(SmallVec a, const SmallVec& b) { return a -= b; }
  template <class S>
  friend SmallVec operator*(SmallVec a, const S& s) {
    return a *= s;
  }
  template <class S>
  friend SmallVec operator*(const S& s, SmallVec a) {
    return a *= s;
  }
  friend bool operator==(const SmallVec& a, const SmallVec& b) {
    if (a.dim_ != b.dim_) return false;
    for (int i = 0; i < a.dim_; ++i) {
      if (!(a.data_[i] == b.data_[i])) return false;
    }
    return true;
  }

 private:
  std::array<T, kMaxDim> data_{};
  int dim_ = 0;
};

using Point = SmallVec<double>;
using ComplexVector = SmallVec<Complex>;

inline double dot(const Point& a, const Point& b) {
  double s = 0.0;
  for (int i = 0; i < a.dim(); ++i) s += a[i] * b[i];
  return s;
}

/// Bilinear (not Hermitian) product of a complex vector with a real one.
inline Complex dot(const ComplexVector& z, const Point& v) {
  Complex s = 0.0;
  for (int i = 0; i < z.dim(); ++i) s += z[i] * v[i];
  return s;
}

inline double norm(const Point& a) { return std::sqrt(dot(a, a)); }

inline double norm(const ComplexVector& z) {
  double s = 0.0;
  for (int i = 0; i < z.dim(); ++i) s += std::norm(z[i]);
  return std::sqrt(s);
}

inline Point real_part(const ComplexVector& z) {
  Point r(z.dim());
  for (int i = 0; i < z.dim(); ++i) r[i] = z[i].real();
  return r;
}

inline Point imag_part(const ComplexVector& z) {
  Point r(z.dim());
  for (int i = 0; i < z.dim(); ++i) r[i] = z[i].imag();
  return r;
}

inline void require_same_dim(int a, int b, const char* what) {
  if (a != b) {
    throw UsageError(std::string("dimension mismatch in ") + what + ": " + std::to_string(a) +
                     " vs " + std::to_string(b));
  }
}

inline std::string to_string(const Point& x) {
  std::ostringstream os;
  os.precision(17);
  os << '(';
  for (int i = 0; i < x.dim(); ++i) os << (i ? ", " : "") << x[i];
  os << ')';
  return os.str();
}

inline Point unit_vector(int dim, int axis) {
  Point e(dim);
  e[axis] = 1.0;
  return e;
}

}  // namespace magsob
