#include "kgntm/tensor.hpp"

#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

namespace kgntm {

std::string shape_string(const Shape& shape)
{
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

static std::size_t element_count(const Shape& shape)
{
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(element_count(shape_), fill)
{
    if (rank() > 2) throw ShapeError("tensor rank > 2 is not supported: " + shape_str());
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data))
{
    if (rank() > 2) throw ShapeError("tensor rank > 2 is not supported: " + shape_str());
    if (data_.size() != element_count(shape_)) {
        throw ShapeError("data length " + std::to_string(data_.size()) + " does not match shape " + shape_str());
    }
}

std::size_t Tensor::rows() const noexcept
{
    return rank() == 2 ? shape_[0] : 1;
}

std::size_t Tensor::cols() const noexcept
{
    switch (rank()) {
    case 0: return 1;
    case 1: return shape_[0];
    default: return shape_[1];
    }
}

std::vector<double> Tensor::row_vector(std::size_t r) const
{
    const auto c = cols();
    return {data_.begin() + static_cast<std::ptrdiff_t>(r * c), data_.begin() + static_cast<std::ptrdiff_t>((r + 1) * c)};
}

double Tensor::item() const
{
    if (size() != 1) throw ShapeError("item() on non-scalar tensor " + shape_str());
    return data_[0];
}

Tensor Tensor::reshaped(Shape shape) const
{
    return Tensor(std::move(shape), data_);
}

void Tensor::fill(double v)
{
    std::fill(data_.begin(), data_.end(), v);
}

bool Tensor::all_finite() const noexcept
{
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

Tensor concat_cols(const std::vector<const Tensor*>& parts)
{
    if (parts.empty()) return {};
    const auto rows = parts.front()->rows();
    std::size_t cols = 0;
    for (const auto* p : parts) {
        if (p->rows() != rows) {
            throw ShapeError("concat_cols: row mismatch " + parts.front()->shape_str() + " vs " + p->shape_str());
        }
        cols += p->cols();
    }
    auto out = Tensor::matrix(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        std::size_t offset = 0;
        for (const auto* p : parts) {
            for (std::size_t c = 0; c < p->cols(); ++c) out(r, offset + c) = (*p)(r, c);
            offset += p->cols();
        }
    }
    return out;
}

} // namespace kgntm
