#include "neurogrow/tensor.hpp"

#include <cmath>
#include <sstream>

#include "neurogrow/errors.hpp"

namespace neurogrow {

namespace {

std::size_t checked_product(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t e : shape) {
        if (e < 1) throw DimensionError("tensor extent must be >= 1");
        n *= e;
    }
    return n;
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(checked_product(shape_), 0.0) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (checked_product(shape_) != data_.size())
        throw DimensionError("tensor data length does not match shape " + shape_string());
}

std::string Tensor::shape_string() const {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape_.size(); ++i) os << (i ? "x" : "") << shape_[i];
    os << "]";
    return os.str();
}

bool RowNormalized::any_zero() const {
    for (auto f : is_zero)
        if (f) return true;
    return false;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2)
        throw DimensionError("matmul expects rank-2 tensors, got " + a.shape_string() + " and " +
                             b.shape_string());
    if (a.extent(1) != b.extent(0))
        throw DimensionError("matmul inner extents differ: " + a.shape_string() + " vs " +
                             b.shape_string());
    const std::size_t m = a.extent(0), k = a.extent(1), n = b.extent(1);
    Tensor c({m, n});
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = a.at(i, p);
            if (aip == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) c.at(i, j) += aip * b.at(p, j);
        }
    }
    return c;
}

Tensor transpose(const Tensor& m) {
    if (m.rank() != 2) throw DimensionError("transpose expects rank-2, got " + m.shape_string());
    Tensor t({m.extent(1), m.extent(0)});
    for (std::size_t i = 0; i < m.extent(0); ++i)
        for (std::size_t j = 0; j < m.extent(1); ++j) t.at(j, i) = m.at(i, j);
    return t;
}

RowNormalized row_l2_normalize(const Tensor& w) {
    if (w.rank() != 2)
        throw DimensionError("row_l2_normalize expects rank-2, got " + w.shape_string());
    const std::size_t n = w.extent(0), d = w.extent(1);
    RowNormalized out{Tensor(w.shape()), std::vector<std::uint8_t>(n, 0)};
    for (std::size_t i = 0; i < n; ++i) {
        const double norm = row_norm(w, i);
        if (norm == 0.0) {
            out.is_zero[i] = 1;
            continue;  // zero row stays zero, no NaN
        }
        for (std::size_t j = 0; j < d; ++j) out.rows.at(i, j) = w.at(i, j) / norm;
    }
    return out;
}

std::size_t conv_out_extent(std::size_t in, std::size_t k, std::size_t stride, std::size_t pad) {
    const std::size_t padded = in + 2 * pad;
    if (padded < k) throw ConfigError("kernel larger than padded input");
    if ((padded - k) % stride != 0)
        throw ConfigError("convolution output extent is not integral (in=" + std::to_string(in) +
                          " k=" + std::to_string(k) + " stride=" + std::to_string(stride) +
                          " pad=" + std::to_string(pad) + ")");
    return (padded - k) / stride + 1;
}

Tensor im2col(const Tensor& x, std::size_t kh, std::size_t kw, std::size_t stride,
              std::size_t pad) {
    if (x.rank() != 4) throw DimensionError("im2col expects rank-4, got " + x.shape_string());
    const std::size_t n = x.extent(0), c = x.extent(1), h = x.extent(2), w = x.extent(3);
    const std::size_t ho = conv_out_extent(h, kh, stride, pad);
    const std::size_t wo = conv_out_extent(w, kw, stride, pad);
    Tensor cols({n * ho * wo, c * kh * kw});
    std::size_t row = 0;
    for (std::size_t in = 0; in < n; ++in) {
        for (std::size_t oy = 0; oy < ho; ++oy) {
            for (std::size_t ox = 0; ox < wo; ++ox, ++row) {
                std::size_t col = 0;
                for (std::size_t ic = 0; ic < c; ++ic) {
                    for (std::size_t ky = 0; ky < kh; ++ky) {
                        const std::ptrdiff_t iy =
                            static_cast<std::ptrdiff_t>(oy * stride + ky) -
                            static_cast<std::ptrdiff_t>(pad);
                        for (std::size_t kx = 0; kx < kw; ++kx, ++col) {
                            const std::ptrdiff_t ix =
                                static_cast<std::ptrdiff_t>(ox * stride + kx) -
                                static_cast<std::ptrdiff_t>(pad);
                            if (iy < 0 || ix < 0 || iy >= static_cast<std::ptrdiff_t>(h) ||
                                ix >= static_cast<std::ptrdiff_t>(w))
                                continue;  // zero padding
                            cols.at(row, col) =
                                x[((in * c + ic) * h + static_cast<std::size_t>(iy)) * w +
                                  static_cast<std::size_t>(ix)];
                        }
                    }
                }
            }
        }
    }
    return cols;
}

Tensor col2im(const Tensor& cols, const std::vector<std::size_t>& input_shape, std::size_t kh,
              std::size_t kw, std::size_t stride, std::size_t pad) {
    if (input_shape.size() != 4) throw DimensionError("col2im expects a rank-4 input shape");
    const std::size_t n = input_shape[0], c = input_shape[1], h = input_shape[2],
                      w = input_shape[3];
    const std::size_t ho = conv_out_extent(h, kh, stride, pad);
    const std::size_t wo = conv_out_extent(w, kw, stride, pad);
    if (cols.extent(0) != n * ho * wo || cols.extent(1) != c * kh * kw)
        throw DimensionError("col2im shape mismatch: " + cols.shape_string());
    Tensor x(input_shape);
    std::size_t row = 0;
    for (std::size_t in = 0; in < n; ++in) {
        for (std::size_t oy = 0; oy < ho; ++oy) {
            for (std::size_t ox = 0; ox < wo; ++ox, ++row) {
                std::size_t col = 0;
                for (std::size_t ic = 0; ic < c; ++ic) {
                    for (std::size_t ky = 0; ky < kh; ++ky) {
                        const std::ptrdiff_t iy =
                            static_cast<std::ptrdiff_t>(oy * stride + ky) -
                            static_cast<std::ptrdiff_t>(pad);
                        for (std::size_t kx = 0; kx < kw; ++kx, ++col) {
                            const std::ptrdiff_t ix =
                                static_cast<std::ptrdiff_t>(ox * stride + kx) -
                                static_cast<std::ptrdiff_t>(pad);
                            if (iy < 0 || ix < 0 || iy >= static_cast<std::ptrdiff_t>(h) ||
                                ix >= static_cast<std::ptrdiff_t>(w))
                                continue;
                            x[((in * c + ic) * h + static_cast<std::size_t>(iy)) * w +
                              static_cast<std::size_t>(ix)] += cols.at(row, col);
                        }
                    }
                }
            }
        }
    }
    return x;
}

double sum(const Tensor& t) {
    double s = 0.0;
    for (double v : t.data()) s += v;
    return s;
}

double row_norm(const Tensor& m, std::size_t row) {
    double ss = 0.0;
    for (std::size_t j = 0; j < m.extent(1); ++j) ss += m.at(row, j) * m.at(row, j);
    return std::sqrt(ss);
}

Tensor add(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b))
        throw DimensionError("add shape mismatch: " + a.shape_string() + " vs " +
                             b.shape_string());
    Tensor c = a;
    for (std::size_t i = 0; i < c.size(); ++i) c[i] += b[i];
    return c;
}

Tensor scale(const Tensor& a, double c) {
    Tensor out = a;
    for (double& v : out.raw()) v *= c;
    return out;
}

void axpy(Tensor& y, double alpha, const Tensor& x) {
    if (!y.same_shape(x))
        throw DimensionError("axpy shape mismatch: " + y.shape_string() + " vs " +
                             x.shape_string());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += alpha * x[i];
}

}  // namespace neurogrow
