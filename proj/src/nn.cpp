#include "kgntm/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace kgntm {

std::string_view activation_name(Activation a)
{
    switch (a) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
    case Activation::softplus: return "softplus";
    case Activation::softmax: return "softmax";
    }
    return "identity";
}

Activation activation_from_name(std::string_view name)
{
    for (auto a : {Activation::identity, Activation::relu, Activation::sigmoid, Activation::softplus,
                   Activation::softmax}) {
        if (activation_name(a) == name) return a;
    }
    throw std::invalid_argument("unknown activation '" + std::string(name) + "'");
}

MlpNet::MlpNet(std::string name, const std::vector<std::size_t>& widths, const std::vector<Activation>& activations,
               Rng& rng)
    : name_(std::move(name))
{
    if (widths.size() < 2) throw std::invalid_argument("MlpNet '" + name_ + "' needs at least input and output width");
    if (activations.size() != widths.size() - 1) {
        throw std::invalid_argument("MlpNet '" + name_ + "': one activation per layer required");
    }
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        if (activations[l] == Activation::softmax && l + 2 != widths.size()) {
            throw std::invalid_argument("MlpNet '" + name_ + "': softmax is only allowed on the final layer");
        }
        const auto in = widths[l], out = widths[l + 1];
        if (in == 0 || out == 0) throw std::invalid_argument("MlpNet '" + name_ + "': zero layer width");
        const double limit = activations[l] == Activation::relu ? std::sqrt(6.0 / static_cast<double>(in))
                                                                 : std::sqrt(6.0 / static_cast<double>(in + out));
        std::uniform_real_distribution<double> dist(-limit, limit);
        DenseLayer layer;
        layer.weight = {name_ + ".l" + std::to_string(l) + ".w", Tensor::matrix(in, out)};
        layer.bias = {name_ + ".l" + std::to_string(l) + ".b", Tensor::matrix(1, out)};
        for (auto& w : layer.weight.value.values()) w = dist(rng);
        layer.activation = activations[l];
        layers_.push_back(std::move(layer));
    }
}

MlpNet MlpNet::make(std::string name, std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out,
                    Activation output_activation, Rng& rng)
{
    std::vector<std::size_t> widths{in};
    widths.insert(widths.end(), hidden.begin(), hidden.end());
    widths.push_back(out);
    std::vector<Activation> acts(hidden.size(), Activation::relu);
    acts.push_back(output_activation);
    return MlpNet(std::move(name), widths, acts, rng);
}

std::size_t MlpNet::input_width() const
{
    return layers_.empty() ? 0 : layers_.front().weight.value.rows();
}

std::size_t MlpNet::output_width() const
{
    return layers_.empty() ? 0 : layers_.back().weight.value.cols();
}

std::vector<std::size_t> MlpNet::widths() const
{
    std::vector<std::size_t> w;
    if (layers_.empty()) return w;
    w.push_back(input_width());
    for (const auto& l : layers_) w.push_back(l.weight.value.cols());
    return w;
}

namespace {

void apply_in_place(Tensor& t, Activation a)
{
    switch (a) {
    case Activation::identity: break;
    case Activation::relu:
        for (auto& v : t.values()) v = v > 0.0 ? v : 0.0;
        break;
    case Activation::sigmoid:
        for (auto& v : t.values()) v = v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
        break;
    case Activation::softplus:
        for (auto& v : t.values()) v = v > 30.0 ? v : std::log1p(std::exp(v));
        break;
    case Activation::softmax:
        for (std::size_t r = 0; r < t.rows(); ++r) {
            double mx = t(r, 0);
            for (std::size_t c = 1; c < t.cols(); ++c) mx = std::max(mx, t(r, c));
            double z = 0.0;
            for (std::size_t c = 0; c < t.cols(); ++c) z += (t(r, c) = std::exp(t(r, c) - mx));
            for (std::size_t c = 0; c < t.cols(); ++c) t(r, c) /= z;
        }
        break;
    }
}

void check_input(const MlpNet& net, const Tensor& x)
{
    if (x.cols() != net.input_width()) {
        throw ShapeError("MlpNet '" + net.name() + "': input shape " + x.shape_str() + " does not match weight shape " +
                         net.layers().front().weight.value.shape_str());
    }
}

} // namespace

Tensor MlpNet::forward(const Tensor& x) const
{
    check_input(*this, x);
    Tensor h = x.reshaped(Shape{x.rows(), x.cols()});
    for (const auto& layer : layers_) {
        Tensor z = matmul(h, layer.weight.value);
        for (std::size_t r = 0; r < z.rows(); ++r)
            for (std::size_t c = 0; c < z.cols(); ++c) z(r, c) += layer.bias.value[c];
        apply_in_place(z, layer.activation);
        h = std::move(z);
    }
    return h;
}

Var apply_activation(const Var& x, Activation a)
{
    switch (a) {
    case Activation::identity: return x;
    case Activation::relu: return ad::relu(x);
    case Activation::sigmoid: return ad::sigmoid(x);
    case Activation::softplus: return ad::softplus(x);
    case Activation::softmax: return ad::softmax_rows(x);
    }
    return x;
}

Var MlpNet::forward(Tape& tape, const Var& x, bool track, bool final_activation) const
{
    check_input(*this, x.value());
    Var h = x;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const auto& layer = layers_[l];
        Var w = track ? tape.parameter(layer.weight) : tape.constant(layer.weight.value);
        Var b = track ? tape.parameter(layer.bias) : tape.constant(layer.bias.value);
        h = ad::add(ad::matmul(h, w), b);
        if (l + 1 < layers_.size() || final_activation) h = apply_activation(h, layer.activation);
    }
    return h;
}

std::vector<Parameter*> MlpNet::parameters()
{
    std::vector<Parameter*> ps;
    for (auto& l : layers_) {
        ps.push_back(&l.weight);
        ps.push_back(&l.bias);
    }
    return ps;
}

std::vector<const Parameter*> MlpNet::parameters() const
{
    std::vector<const Parameter*> ps;
    for (const auto& l : layers_) {
        ps.push_back(&l.weight);
        ps.push_back(&l.bias);
    }
    return ps;
}

std::size_t MlpNet::parameter_count() const
{
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.weight.value.size() + l.bias.value.size();
    return n;
}

void MlpNet::zero_output_layer()
{
    if (layers_.empty()) return;
    layers_.back().weight.value.fill(0.0);
    layers_.back().bias.value.fill(0.0);
}

void MlpNet::rename(const std::string& name)
{
    name_ = name;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        layers_[l].weight.name = name_ + ".l" + std::to_string(l) + ".w";
        layers_[l].bias.name = name_ + ".l" + std::to_string(l) + ".b";
    }
}

} // namespace kgntm
