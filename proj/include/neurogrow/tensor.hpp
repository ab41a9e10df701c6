#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace neurogrow {

/// Dense row-major tensor of 64-bit floats. All math in the project runs
/// through this type; layout is fixed so checkpoints are portable.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape);
    Tensor(std::vector<std::size_t> shape, std::vector<double> data);

    static Tensor zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    std::size_t extent(std::size_t dim) const { return shape_.at(dim); }

    double& operator[](std::size_t flat) { return data_[flat]; }
    double operator[](std::size_t flat) const { return data_[flat]; }

    // 2-D accessors; most of the regularizer math is matrix-shaped.
    double& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
    double at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }

    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }
    std::vector<double>& raw() { return data_; }
    const std::vector<double>& raw() const { return data_; }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    std::string shape_string() const;

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

/// Result of row_l2_normalize: zero rows are passed through unchanged and
/// flagged instead of producing NaN.
struct RowNormalized {
    Tensor rows;
    std::vector<std::uint8_t> is_zero;  // one flag per row
    bool any_zero() const;
};

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& m);
RowNormalized row_l2_normalize(const Tensor& w);

/// Unfold [N x C x H x W] into [N*H'*W' x C*kh*kw]; each output row is one
/// zero-padded receptive field, channel-major.
Tensor im2col(const Tensor& x, std::size_t kh, std::size_t kw, std::size_t stride,
              std::size_t pad);

/// Adjoint of im2col: scatter-add column rows back into an image of
/// `input_shape` ([N x C x H x W]).
Tensor col2im(const Tensor& cols, const std::vector<std::size_t>& input_shape, std::size_t kh,
              std::size_t kw, std::size_t stride, std::size_t pad);

/// Output spatial extent (H + 2*pad - k) / stride + 1; throws ConfigError
/// when not integral.
std::size_t conv_out_extent(std::size_t in, std::size_t k, std::size_t stride, std::size_t pad);

double sum(const Tensor& t);
double row_norm(const Tensor& m, std::size_t row);

Tensor add(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
void axpy(Tensor& y, double alpha, const Tensor& x);  // y += alpha * x

}  // namespace neurogrow
