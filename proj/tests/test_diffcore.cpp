#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>

#include <boost/math/special_functions/beta.hpp>

#include "kgntm/checkpoint.hpp"
#include "kgntm/gradcheck.hpp"
#include "kgntm/nn.hpp"
#include "kgntm/optim.hpp"
#include "kgntm/sampling.hpp"

using namespace kgntm;

namespace {

Parameter random_param(const std::string& name, std::size_t r, std::size_t c, Rng& rng, double lo = -1.0,
                       double hi = 1.0)
{
    std::uniform_real_distribution<double> d(lo, hi);
    Parameter p{name, Tensor::matrix(r, c)};
    for (auto& v : p.value.values()) v = d(rng);
    return p;
}

} // namespace

TEST_CASE("identity layer passes input through")
{
    Rng rng(1);
    MlpNet net("id", {2, 2}, {Activation::identity}, rng);
    net.layers()[0].weight.value = Tensor::matrix(2, 2, {1, 0, 0, 1});
    net.layers()[0].bias.value.fill(0.0);
    auto y = net.forward(Tensor::row({1.0, 2.0}));
    CHECK(y(0, 0) == 1.0);
    CHECK(y(0, 1) == 2.0);
}

TEST_CASE("softmax final layer on equal logits is uniform")
{
    Rng rng(2);
    MlpNet net("sm", {4, 3}, {Activation::softmax}, rng);
    net.zero_output_layer();
    auto y = net.forward(Tensor::row({0.3, -1.0, 2.0, 0.5}));
    for (std::size_t k = 0; k < 3; ++k) CHECK(y(0, k) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("forward is deterministic and tape forward matches plain forward")
{
    Rng rng(3);
    auto net = MlpNet::make("n", 5, {7, 6}, 3, Activation::softmax, rng);
    Tensor x = Tensor::matrix(2, 5, {0.1, 0.2, -0.3, 0.4, 0.5, 1, -1, 0.5, 0.25, 0});
    auto a = net.forward(x);
    auto b = net.forward(x);
    CHECK(a == b);
    Tape tape;
    auto v = net.forward(tape, tape.constant(x));
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(v.value()[i] == doctest::Approx(a[i]).epsilon(1e-14));
    for (std::size_t r = 0; r < 2; ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < 3; ++c) {
            CHECK(a(r, c) >= 0.0);
            s += a(r, c);
        }
        CHECK(std::abs(s - 1.0) < 1e-12);
    }
}

TEST_CASE("shape mismatch names both shapes")
{
    Rng rng(4);
    auto net = MlpNet::make("n", 3, {4}, 2, Activation::identity, rng);
    try {
        net.forward(Tensor::row({1.0, 2.0}));
        FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("[1x2]") != std::string::npos);
        CHECK(msg.find("[3x4]") != std::string::npos);
    }
}

TEST_CASE("softmax is only allowed as the final activation")
{
    Rng rng(5);
    CHECK_THROWS_AS(MlpNet("bad", {3, 3, 2}, {Activation::softmax, Activation::identity}, rng),
                    std::invalid_argument);
}

TEST_CASE("gradient of sum of a weight is ones")
{
    Parameter w{"w", Tensor::matrix(2, 3, 0.7)};
    Tape tape;
    auto g = tape.backward(ad::sum(tape.parameter(w)));
    for (double v : g.of(w).values()) CHECK(v == 1.0);
}

TEST_CASE("sigmoid derivative at zero is a quarter")
{
    Parameter w{"w", Tensor::matrix(1, 1, 0.0)};
    Tape tape;
    auto x = tape.constant(Tensor::matrix(1, 1, 1.0));
    auto g = tape.backward(ad::sum(ad::sigmoid(ad::matmul(tape.parameter(w), x))));
    CHECK(g.of(w)[0] == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("backward rejects a loss from another tape")
{
    Tape t1, t2;
    auto l = ad::sum(t1.constant(Tensor::matrix(1, 1, 1.0)));
    CHECK_THROWS(t2.backward(l));
}

TEST_CASE("two-layer net gradients match central differences")
{
    Rng rng(6);
    auto net = MlpNet::make("g", 4, {5}, 3, Activation::softplus, rng);
    // Nudge first-layer biases away from relu kinks.
    for (auto& b : net.layers()[0].bias.value.values()) b = 0.3;
    Tensor x = Tensor::matrix(3, 4, {0.2, -0.5, 0.9, 0.1, 1.0, 0.3, -0.2, 0.4, -0.7, 0.6, 0.05, 0.8});
    auto res = check_gradients(
        [&](Tape& t) { return ad::sum(ad::square(net.forward(t, t.constant(x)))); }, net.parameters(),
        {.step = 1e-5, .floor = 1e-8});
    CHECK(res.checked == net.parameter_count());
    CHECK(res.max_rel_error < 1e-6);
}

TEST_CASE("elementwise ops match central differences")
{
    Rng rng(7);
    auto a = random_param("a", 3, 4, rng, 0.2, 1.5);
    auto b = random_param("b", 3, 4, rng, 0.2, 1.5);
    auto col = random_param("col", 3, 1, rng, 0.2, 1.5);
    auto row = random_param("row", 1, 4, rng, 0.2, 1.5);
    auto m = random_param("m", 4, 2, rng);
    std::vector<Parameter*> ps{&a, &b, &col, &row, &m};
    auto f = [&](Tape& t) {
        auto A = t.parameter(a), B = t.parameter(b), C = t.parameter(col), R = t.parameter(row), M = t.parameter(m);
        auto e1 = ad::div(ad::mul(A, R), ad::add(B, C));
        auto e2 = ad::log(ad::add(ad::exp(ad::sub(A, C)), ad::sigmoid(B)));
        auto e3 = ad::softmax_rows(ad::matmul(e1, M));
        auto e4 = ad::row_norm(ad::one_minus(e2));
        auto e5 = ad::normalize_rows(ad::softplus(ad::scale(ad::add_scalar(B, -0.5), 3.0)));
        auto e6 = ad::sum_cols(ad::relu(ad::sub(e1, ad::reshape(ad::sum_rows(B), 3, 1))));
        return ad::add(ad::add(ad::sum(ad::square(e3)), ad::sum(e4)),
                       ad::add(ad::sum(ad::mul(e5, A)), ad::sum(ad::mul(e6, R))));
    };
    auto res = check_gradients(f, ps, {.step = 1e-5, .floor = 1e-8});
    CHECK(res.max_rel_error < 1e-6);
}

TEST_CASE("adam: zero gradient is a no-op")
{
    Parameter p{"p", Tensor::row({1.0, -2.0, 3.0})};
    Adam opt;
    opt.step(p, Tensor::row({0.0, 0.0, 0.0}));
    CHECK(p.value == Tensor::row({1.0, -2.0, 3.0}));
}

TEST_CASE("adam: first step moves each entry by about lr against the gradient sign")
{
    Parameter p{"p", Tensor::row({1.0, -2.0, 3.0, 0.5})};
    Adam opt({.lr = 1e-3});
    opt.step(p, Tensor::row({0.5, -3.0, 1e-3, 100.0}));
    // Bias-corrected first step: m̂ = g, v̂ = g², so Δ = -lr·g/(|g| + eps).
    const double lr = 1e-3, eps = 1e-8;
    CHECK(p.value[0] == doctest::Approx(1.0 - lr * 0.5 / (0.5 + eps)).epsilon(1e-14));
    CHECK(p.value[1] == doctest::Approx(-2.0 + lr * 3.0 / (3.0 + eps)).epsilon(1e-14));
    CHECK(p.value[2] == doctest::Approx(3.0 - lr * 1e-3 / (1e-3 + eps)).epsilon(1e-14));
    CHECK(p.value[3] == doctest::Approx(0.5 - lr).epsilon(1e-9));
}

TEST_CASE("adam: identical runs are bitwise identical")
{
    auto run = [] {
        Rng rng(11);
        Parameter p = random_param("p", 2, 3, rng);
        Adam opt;
        for (int i = 0; i < 20; ++i) {
            Tensor g(p.value.shape());
            for (auto& v : g.values()) v = standard_normal(rng);
            opt.step(p, g);
        }
        return p.value;
    };
    CHECK(run() == run());
}

TEST_CASE("normal reparameterization")
{
    Tape tape;
    Parameter mu{"mu", Tensor::row({0.5, -1.0})};
    Parameter sg{"sg", Tensor::row({1e-12, 1e-12})};
    Rng rng(12);
    auto x = sample_normal_reparam(tape.parameter(mu), tape.parameter(sg), rng);
    CHECK(std::abs(x.value()[0] - 0.5) < 1e-9);
    CHECK(std::abs(x.value()[1] + 1.0) < 1e-9);
    auto g = tape.backward(ad::sum(x));
    CHECK(g.of(mu)[0] == 1.0);
    CHECK(g.of(mu)[1] == 1.0);

    Tape t2;
    CHECK_THROWS_AS(sample_normal_reparam(t2.constant(Tensor::row({0.0})), t2.constant(Tensor::row({0.0})), rng),
                    std::domain_error);
}

TEST_CASE("normal reparameterization sample mean")
{
    const std::size_t n = 1000000;
    Tape tape;
    Rng rng(13);
    auto x = sample_normal_reparam(tape.constant(Tensor::matrix(1, n, 0.0)), tape.constant(Tensor::matrix(1, n, 1.0)),
                                   rng);
    double s = 0.0;
    for (double v : x.value().values()) s += v;
    CHECK(std::abs(s / n) < 4e-3);
}

TEST_CASE("lognormal with vanishing scale collapses to exp(mu)")
{
    Tape tape;
    Rng rng(14);
    auto x = sample_lognormal_reparam(tape.constant(Tensor::row({0.0})), tape.constant(Tensor::row({1e-12})), rng);
    CHECK(x.value()[0] == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("kumaraswamy(1,1) is the identity map on the uniform")
{
    for (double u : {1e-9, 0.1, 0.37, 0.5, 0.9, 1.0 - 1e-9}) CHECK(kumaraswamy_transform(1.0, 1.0, u) == doctest::Approx(u).epsilon(1e-12));
    CHECK_THROWS_AS(kumaraswamy_transform(0.0, 1.0, 0.5), std::domain_error);
}

TEST_CASE("kumaraswamy(2,2) sample mean matches b*B(1+1/a, b)")
{
    const std::size_t n = 1000000;
    Tape tape;
    Rng rng(15);
    auto x = sample_beta_reparam(tape.constant(Tensor::matrix(1, n, 2.0)), tape.constant(Tensor::matrix(1, n, 2.0)),
                                 rng);
    double s = 0.0;
    for (double v : x.value().values()) {
        REQUIRE(v > 0.0);
        REQUIRE(v < 1.0);
        s += v;
    }
    const double analytic = 2.0 * boost::math::beta(1.5, 2.0);
    CHECK(std::abs(s / n - analytic) < 0.01);
}

TEST_CASE("kumaraswamy pathwise gradient matches central differences")
{
    Rng rng(16);
    auto a = random_param("a", 1, 5, rng, 0.3, 3.0);
    auto b = random_param("b", 1, 5, rng, 0.3, 3.0);
    Tensor u = uniform_open_tensor({1, 5}, rng);
    auto res = check_gradients(
        [&](Tape& t) { return ad::sum(ad::square(sample_beta_reparam(t.parameter(a), t.parameter(b), u))); }, {&a, &b},
        {.step = 1e-6, .floor = 1e-8});
    CHECK(res.max_rel_error < 1e-6);
}

TEST_CASE("checkpoint round trip is exact")
{
    Rng rng(17);
    Checkpoint ck;
    ck.seed = 99;
    ck.meta = {{"k", 3}, {"words", {"a", "b"}}};
    ck.nets.emplace("enc", MlpNet::make("enc", 4, {3}, 2, Activation::softplus, rng));
    ck.tensors.emplace("B", Tensor::matrix(2, 2, {0.1, 0.9, 1.0 / 3.0, 2.0 / 3.0}));
    ck.tensors.emplace("s", Tensor::scalar(-1.5));

    const auto path = (std::filesystem::temp_directory_path() / "kgntm_ck_test.bin").string();
    save_checkpoint(ck, path);
    auto back = load_checkpoint(path);
    std::filesystem::remove(path);

    CHECK(back.seed == 99);
    CHECK(back.meta == ck.meta);
    CHECK(back.tensor("B") == ck.tensor("B"));
    CHECK(back.tensor("s").item() == -1.5);
    const auto& n0 = ck.net("enc");
    const auto& n1 = back.net("enc");
    CHECK(n1.widths() == n0.widths());
    for (std::size_t l = 0; l < n0.layers().size(); ++l) {
        CHECK(n1.layers()[l].weight.value == n0.layers()[l].weight.value);
        CHECK(n1.layers()[l].bias.value == n0.layers()[l].bias.value);
        CHECK(n1.layers()[l].activation == n0.layers()[l].activation);
    }
    CHECK(encode_checkpoint(back) == encode_checkpoint(ck));
    CHECK_THROWS_AS(decode_checkpoint("not a checkpoint at all"), CheckpointError);
}
