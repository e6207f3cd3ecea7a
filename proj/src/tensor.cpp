#include "adasf/tensor.hpp"

#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace adasf {

std::string Shape::str() const {
  std::ostringstream os;
  os << '[' << n << ',' << c << ',' << h << ',' << w << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, double fill) : shape_(shape), data_(shape.numel(), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
  if (data_.size() != shape_.numel()) {
    throw ShapeError("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                     shape_.str());
  }
}

double Tensor::item() const {
  if (data_.size() != 1) {
    throw ShapeError("item() on tensor of shape " + shape_.str());
  }
  return data_[0];
}

Tensor Tensor::reshaped(Shape s) const {
  if (s.numel() != numel()) {
    throw ShapeError("cannot reshape " + shape_.str() + " to " + s.str());
  }
  return Tensor(s, data_);
}

Tensor& Tensor::operator+=(const Tensor& o) {
  require_same_shape(*this, o, "operator+=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
  return *this;
}

Tensor& Tensor::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": shape mismatch " + a.shape().str() + " vs " + b.shape().str());
  }
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  return s;
}

double dot(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) s += a[i] * b[i];
  return s;
}

bool all_finite(const Tensor& x) {
  for (double v : x.data()) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void write_tensor_text(std::ostream& os, const Tensor& t) {
  const Shape& s = t.shape();
  os << "tensor " << s.n << ' ' << s.c << ' ' << s.h << ' ' << s.w << '\n';
  const auto old_prec = os.precision(std::numeric_limits<double>::max_digits10);
  std::size_t col = 0;
  for (double v : t.data()) {
    os << v << (++col % s.w == 0 ? '\n' : ' ');
  }
  os.precision(old_prec);
}

Tensor read_tensor_text(std::istream& is) {
  std::string tag;
  Shape s;
  if (!(is >> tag) || tag != "tensor") throw FormatError("tensor dump: missing 'tensor' header");
  if (!(is >> s.n >> s.c >> s.h >> s.w)) throw FormatError("tensor dump: malformed shape");
  const std::size_t count = s.numel();
  if (count > (std::size_t{1} << 32)) throw FormatError("tensor dump: implausible size " + s.str());
  std::vector<double> data(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (!(is >> data[i])) {
      throw FormatError("tensor dump: expected " + std::to_string(count) + " values, got " + std::to_string(i));
    }
  }
  return Tensor(s, std::move(data));
}

}  // namespace adasf
