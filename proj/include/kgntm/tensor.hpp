#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace kgntm {

using Shape = std::vector<std::size_t>;

class ShapeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::string shape_string(const Shape& shape);

// Dense row-major tensor of doubles. Ranks 0..2 are what the model uses; a
// rank-1 tensor behaves as a 1 x n row wherever a matrix is expected.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> data);

    static Tensor scalar(double v) { return Tensor(Shape{}, std::vector<double>{v}); }
    static Tensor matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
    {
        return Tensor(Shape{rows, cols}, fill);
    }
    static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    {
        return Tensor(Shape{rows, cols}, std::move(data));
    }
    static Tensor row(std::vector<double> data)
    {
        const auto n = data.size();
        return Tensor(Shape{1, n}, std::move(data));
    }
    static Tensor column(std::vector<double> data)
    {
        const auto n = data.size();
        return Tensor(Shape{n, 1}, std::move(data));
    }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    std::size_t rows() const noexcept;
    std::size_t cols() const noexcept;

    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols() + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols() + c]; }
    double& operator[](std::size_t i) noexcept { return data_[i]; }
    double operator[](std::size_t i) const noexcept { return data_[i]; }

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }
    const std::vector<double>& vec() const noexcept { return data_; }
    std::vector<double> row_vector(std::size_t r) const;

    double item() const;
    bool same_shape(const Tensor& other) const noexcept
    {
        return rows() == other.rows() && cols() == other.cols() && size() == other.size();
    }
    std::string shape_str() const { return shape_string(shape_); }

    Tensor reshaped(Shape shape) const;
    void fill(double v);
    bool all_finite() const noexcept;

    bool operator==(const Tensor& other) const = default;

private:
    Shape shape_;
    std::vector<double> data_;
};

// Horizontal concatenation of row blocks with equal row counts.
Tensor concat_cols(const std::vector<const Tensor*>& parts);

} // namespace kgntm
