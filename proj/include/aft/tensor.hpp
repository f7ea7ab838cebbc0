#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace aft {

// Dense row-major f64 tensor. The value carrier for everything else:
// token matrices, image stacks, weight matrices, spectra (via ComplexTensor).
// Immutable-by-convention: kernels take const refs and return fresh values.
class Tensor {
  public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape); // zero-filled
    Tensor(std::vector<std::size_t> shape, std::vector<double> data);

    static Tensor full(std::vector<std::size_t> shape, double value);

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t extent(std::size_t axis) const { return shape_[axis]; }
    std::size_t size() const { return data_.size(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& buffer() { return data_; }
    const std::vector<double>& buffer() const { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    // rank-2 access: (row, col)
    double& operator()(std::size_t i, std::size_t j) {
        return data_[i * shape_[1] + j];
    }
    double operator()(std::size_t i, std::size_t j) const {
        return data_[i * shape_[1] + j];
    }

    // rank-3 access: (channel, row, col)
    double& operator()(std::size_t c, std::size_t y, std::size_t x) {
        return data_[(c * shape_[1] + y) * shape_[2] + x];
    }
    double operator()(std::size_t c, std::size_t y, std::size_t x) const {
        return data_[(c * shape_[1] + y) * shape_[2] + x];
    }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

// Split-storage complex tensor; spectra of real signals keep conjugate
// symmetry re[k] = re[-k], im[k] = -im[-k] (indices mod extent).
class ComplexTensor {
  public:
    ComplexTensor() = default;
    explicit ComplexTensor(std::vector<std::size_t> shape);

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t extent(std::size_t axis) const { return shape_[axis]; }
    std::size_t size() const { return re_.size(); }

    std::vector<double>& re() { return re_; }
    const std::vector<double>& re() const { return re_; }
    std::vector<double>& im() { return im_; }
    const std::vector<double>& im() const { return im_; }

    double& re(std::size_t c, std::size_t y, std::size_t x) {
        return re_[(c * shape_[1] + y) * shape_[2] + x];
    }
    double re(std::size_t c, std::size_t y, std::size_t x) const {
        return re_[(c * shape_[1] + y) * shape_[2] + x];
    }
    double& im(std::size_t c, std::size_t y, std::size_t x) {
        return im_[(c * shape_[1] + y) * shape_[2] + x];
    }
    double im(std::size_t c, std::size_t y, std::size_t x) const {
        return im_[(c * shape_[1] + y) * shape_[2] + x];
    }

  private:
    std::vector<std::size_t> shape_;
    std::vector<double> re_;
    std::vector<double> im_;
};

std::string shape_str(const std::vector<std::size_t>& shape);

// ---------------------------------------------------------------------------
// Kernels. Parallel variants split work across independent output elements
// only; every element is reduced in the same fixed serial order (row-major,
// ascending k), so results are bit-identical to the aft::ref versions at any
// thread count.
// ---------------------------------------------------------------------------

// [M x K] * [K x P] -> [M x P]
Tensor matmul(const Tensor& a, const Tensor& b);

// Cross-correlation with circular (wrap-around) indexing, stride 1.
// x: [C x H x W], kernel: [O x C x k x k] (k odd), bias: [O] -> [O x H x W]
Tensor conv2d_circular(const Tensor& x, const Tensor& kernel, const Tensor& bias);

// Depthwise variant: kernel [C x k x k], bias [C] -> [C x H x W]
Tensor conv2d_circular_depthwise(const Tensor& x, const Tensor& kernel,
                                 const Tensor& bias);

// Row-wise softmax with per-row max subtraction. NaN input rejected.
Tensor softmax_rows(const Tensor& m);

// pointwise / small helpers
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor transpose(const Tensor& m); // rank-2
Tensor add_row_bias(const Tensor& m, const Tensor& bias); // bias[C] added to each row

double dot_flat(const Tensor& a, const Tensor& b);
double norm2(const Tensor& a);
double max_abs(const Tensor& a);

// || actual - reference ||_2 / max(|| reference ||_2, eps)
double rel_error(const Tensor& actual, const Tensor& reference, double eps = 1e-12);

namespace ref {

// Serial reference kernels. Same arithmetic, no OpenMP pragmas; kept for
// correctness tests and for the kernel benchmark.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor conv2d_circular(const Tensor& x, const Tensor& kernel, const Tensor& bias);
Tensor conv2d_circular_depthwise(const Tensor& x, const Tensor& kernel,
                                 const Tensor& bias);
Tensor softmax_rows(const Tensor& m);

} // namespace ref

} // namespace aft
