#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "kgntm/autodiff.hpp"
#include "kgntm/rng.hpp"

namespace kgntm {

enum class Activation { identity, relu, sigmoid, softplus, softmax };

std::string_view activation_name(Activation a);
Activation activation_from_name(std::string_view name);

struct DenseLayer {
    Parameter weight; // in x out
    Parameter bias;   // 1 x out
    Activation activation = Activation::identity;
};

// Fully connected feed-forward network. Every generative and inference
// network in the model is one of these.
class MlpNet {
public:
    MlpNet() = default;
    // widths = {in, hidden..., out}; one activation per layer.
    MlpNet(std::string name, const std::vector<std::size_t>& widths, const std::vector<Activation>& activations,
           Rng& rng);

    // Convenience: `hidden` rectifier layers followed by an output layer.
    static MlpNet make(std::string name, std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out,
                       Activation output_activation, Rng& rng);

    const std::string& name() const noexcept { return name_; }
    std::size_t input_width() const;
    std::size_t output_width() const;
    std::vector<std::size_t> widths() const;

    Tensor forward(const Tensor& x) const;
    // `track` records parameters as differentiable leaves; otherwise they
    // enter the tape as constants. `final_activation=false` returns the
    // pre-activation of the last layer.
    Var forward(Tape& tape, const Var& x, bool track = true, bool final_activation = true) const;

    std::vector<DenseLayer>& layers() noexcept { return layers_; }
    const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
    std::vector<Parameter*> parameters();
    std::vector<const Parameter*> parameters() const;
    std::size_t parameter_count() const;

    // Zeros the weights and bias of the last layer.
    void zero_output_layer();
    void rename(const std::string& name);

private:
    std::string name_;
    std::vector<DenseLayer> layers_;
};

Var apply_activation(const Var& x, Activation a);

} // namespace kgntm
