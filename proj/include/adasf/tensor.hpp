#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace adasf {

/// Raised when operand shapes violate an operation's preconditions.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a file or text payload cannot be parsed.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// NCHW extents.
struct Shape {
  std::size_t n = 0;
  std::size_t c = 0;
  std::size_t h = 0;
  std::size_t w = 0;

  [[nodiscard]] std::size_t numel() const { return n * c * h * w; }
  [[nodiscard]] std::size_t plane() const { return h * w; }
  [[nodiscard]] std::string str() const;
  friend bool operator==(const Shape&, const Shape&) = default;
};

/// Dense 4-D double tensor, NCHW row-major. Plain value type.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double v) { return Tensor({1, 1, 1, 1}, v); }

  [[nodiscard]] const Shape& shape() const { return shape_; }
  [[nodiscard]] std::size_t numel() const { return data_.size(); }
  [[nodiscard]] bool empty() const { return data_.empty(); }

  [[nodiscard]] std::span<double> data() { return data_; }
  [[nodiscard]] std::span<const double> data() const { return data_; }
  [[nodiscard]] const std::vector<double>& vec() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
    return data_[index(n, c, h, w)];
  }
  [[nodiscard]] double at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    return data_[index(n, c, h, w)];
  }

  /// Pointer to the (n, c) image plane.
  double* plane(std::size_t n, std::size_t c) { return data_.data() + (n * shape_.c + c) * shape_.plane(); }
  [[nodiscard]] const double* plane(std::size_t n, std::size_t c) const {
    return data_.data() + (n * shape_.c + c) * shape_.plane();
  }

  /// Value of a single-element tensor.
  [[nodiscard]] double item() const;

  /// Same data under a new shape with identical element count.
  [[nodiscard]] Tensor reshaped(Shape s) const;

  Tensor& operator+=(const Tensor& o);
  Tensor& operator*=(double s);

 private:
  [[nodiscard]] std::size_t index(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    return ((n * shape_.c + c) * shape_.h + h) * shape_.w + w;
  }

  Shape shape_{};
  std::vector<double> data_;
};

/// Complex NCHW field stored as split real/imaginary planes.
struct Spectrum {
  Shape shape{};
  std::vector<double> re;
  std::vector<double> im;

  Spectrum() = default;
  explicit Spectrum(Shape s) : shape(s), re(s.numel(), 0.0), im(s.numel(), 0.0) {}
};

void require_same_shape(const Tensor& a, const Tensor& b, const char* what);

[[nodiscard]] double max_abs_diff(const Tensor& a, const Tensor& b);
[[nodiscard]] double sum(const Tensor& x);
[[nodiscard]] double dot(const Tensor& a, const Tensor& b);
[[nodiscard]] bool all_finite(const Tensor& x);

/// Debug dump: `tensor n c h w` header followed by the values.
void write_tensor_text(std::ostream& os, const Tensor& t);
[[nodiscard]] Tensor read_tensor_text(std::istream& is);

}  // namespace adasf
