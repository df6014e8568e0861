#include "kgntm/autodiff.hpp"

#include <atomic>
#include <cmath>

namespace kgntm {

const Tensor& Var::value() const
{
    return tape_->value(id_);
}

bool Var::requires_grad() const
{
    return tape_->requires_grad(id_);
}

const Tensor& Gradients::of(const Parameter& p) const
{
    auto it = grads_.find(&p);
    if (it == grads_.end()) throw std::out_of_range("no gradient recorded for parameter '" + p.name + "'");
    return it->second;
}

Var Tape::constant(Tensor value)
{
    nodes_.push_back(Node{std::move(value), {}, nullptr, false});
    return {this, nodes_.size() - 1};
}

Var Tape::parameter(const Parameter& p)
{
    nodes_.push_back(Node{p.value, {}, &p, true});
    return {this, nodes_.size() - 1};
}

Var Tape::record(Tensor value, const std::vector<Var>& parents, BackwardFn backward)
{
    bool needs = false;
    for (const auto& p : parents) {
        if (&p.tape() != this) throw std::logic_error("operands recorded on different tapes");
        needs = needs || p.requires_grad();
    }
    nodes_.push_back(Node{std::move(value), needs ? std::move(backward) : BackwardFn{}, nullptr, needs});
    return {this, nodes_.size() - 1};
}

void Tape::accumulate(const Var& target, const Tensor& grad)
{
    if (!target.requires_grad()) return;
    auto& g = grads_[target.id()];
    if (g.empty()) {
        g = Tensor(nodes_[target.id()].value.shape(), 0.0);
    }
    if (g.size() != grad.size()) {
        throw ShapeError("gradient shape " + grad.shape_str() + " does not match node shape " + g.shape_str());
    }
    auto dst = g.values();
    auto src = grad.values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

void Tape::accumulate(const Var& target, std::size_t index, double grad)
{
    if (!target.requires_grad()) return;
    auto& g = grads_[target.id()];
    if (g.empty()) g = Tensor(nodes_[target.id()].value.shape(), 0.0);
    g[index] += grad;
}

Gradients Tape::backward(const Var& loss)
{
    if (&loss.tape() != this) throw std::logic_error("backward: loss is not on this tape");
    if (loss.value().size() != 1) throw ShapeError("backward: loss must be a scalar, got " + loss.value().shape_str());

    grads_.assign(nodes_.size(), Tensor{});
    if (nodes_[loss.id()].requires_grad) grads_[loss.id()] = Tensor(loss.value().shape(), 1.0);

    for (std::size_t i = loss.id() + 1; i-- > 0;) {
        auto& node = nodes_[i];
        if (grads_[i].empty() || !node.backward) continue;
        node.backward(*this, grads_[i]);
    }

    Gradients out;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        const auto* p = nodes_[i].param;
        if (!p) continue;
        Tensor g = grads_[i].empty() ? Tensor(p->value.shape(), 0.0) : grads_[i];
        if (out.has(*p)) {
            Tensor sum = out.of(*p);
            for (std::size_t k = 0; k < sum.size(); ++k) sum[k] += g[k];
            out.set(*p, std::move(sum));
        } else {
            out.set(*p, std::move(g));
        }
    }
    grads_.clear();
    return out;
}

// ---------------------------------------------------------------------------

Shape broadcast_shape(const Tensor& a, const Tensor& b)
{
    auto dim = [&](std::size_t x, std::size_t y) {
        if (x == y || y == 1) return x;
        if (x == 1) return y;
        throw ShapeError("cannot broadcast " + a.shape_str() + " with " + b.shape_str());
    };
    return Shape{dim(a.rows(), b.rows()), dim(a.cols(), b.cols())};
}

Tensor reduce_to_shape(const Tensor& grad, std::size_t rows, std::size_t cols)
{
    if (grad.rows() == rows && grad.cols() == cols) return grad;
    auto out = Tensor::matrix(rows, cols);
    for (std::size_t r = 0; r < grad.rows(); ++r)
        for (std::size_t c = 0; c < grad.cols(); ++c)
            out(rows == 1 ? 0 : r, cols == 1 ? 0 : c) += grad(r, c);
    return out;
}

Tensor matmul(const Tensor& a, const Tensor& b)
{
    if (a.cols() != b.rows()) throw ShapeError("matmul: " + a.shape_str() + " x " + b.shape_str());
    const auto m = a.rows(), k = a.cols(), n = b.cols();
    auto out = Tensor::matrix(m, n);
    const double* bp = b.values().data();
    double* op = out.values().data();
    for (std::size_t i = 0; i < m; ++i) {
        double* orow = op + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = a(i, p);
            if (av == 0.0) continue;
            const double* brow = bp + p * n;
            for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
    return out;
}

Tensor transpose(const Tensor& a)
{
    auto out = Tensor::matrix(a.cols(), a.rows());
    for (std::size_t r = 0; r < a.rows(); ++r)
        for (std::size_t c = 0; c < a.cols(); ++c) out(c, r) = a(r, c);
    return out;
}

namespace ad {
namespace {

std::atomic<std::size_t> g_log_clamps{0};

template <class Fwd, class DA, class DB>
Var binary(const Var& a, const Var& b, Fwd fwd, DA da, DB db)
{
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    const Shape shape = broadcast_shape(av, bv);
    const auto R = shape[0], C = shape[1];
    const bool ar = av.rows() == 1, ac = av.cols() == 1, br = bv.rows() == 1, bc = bv.cols() == 1;
    auto out = Tensor::matrix(R, C);
    for (std::size_t r = 0; r < R; ++r)
        for (std::size_t c = 0; c < C; ++c)
            out(r, c) = fwd(av(ar ? 0 : r, ac ? 0 : c), bv(br ? 0 : r, bc ? 0 : c));
    return a.tape().record(std::move(out), {a, b}, [a, b, R, C, ar, ac, br, bc, da, db](Tape& t, const Tensor& g) {
        const Tensor& av = a.value();
        const Tensor& bv = b.value();
        if (a.requires_grad()) {
            auto ga = Tensor::matrix(av.rows(), av.cols());
            for (std::size_t r = 0; r < R; ++r)
                for (std::size_t c = 0; c < C; ++c) {
                    const double x = av(ar ? 0 : r, ac ? 0 : c), y = bv(br ? 0 : r, bc ? 0 : c);
                    ga(ar ? 0 : r, ac ? 0 : c) += g(r, c) * da(x, y);
                }
            t.accumulate(a, ga.reshaped(av.shape()));
        }
        if (b.requires_grad()) {
            auto gb = Tensor::matrix(bv.rows(), bv.cols());
            for (std::size_t r = 0; r < R; ++r)
                for (std::size_t c = 0; c < C; ++c) {
                    const double x = av(ar ? 0 : r, ac ? 0 : c), y = bv(br ? 0 : r, bc ? 0 : c);
                    gb(br ? 0 : r, bc ? 0 : c) += g(r, c) * db(x, y);
                }
            t.accumulate(b, gb.reshaped(bv.shape()));
        }
    });
}

// Elementwise unary op whose derivative is expressed through input x and
// output y.
template <class Fwd, class Deriv>
Var unary(const Var& a, Fwd fwd, Deriv deriv)
{
    const Tensor& av = a.value();
    Tensor out(av.shape());
    for (std::size_t i = 0; i < av.size(); ++i) out[i] = fwd(av[i]);
    Tape& tape = a.tape();
    const Var self(&tape, tape.size());
    return tape.record(std::move(out), {a}, [a, self, deriv](Tape& t, const Tensor& g) {
        const Tensor& x = a.value();
        const Tensor& y = self.value();
        Tensor ga(x.shape());
        for (std::size_t i = 0; i < x.size(); ++i) ga[i] = g[i] * deriv(x[i], y[i]);
        t.accumulate(a, ga);
    });
}

double softplus_value(double x)
{
    return x > 30.0 ? x : std::log1p(std::exp(x));
}

double sigmoid_value(double x)
{
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

} // namespace

Var matmul(const Var& a, const Var& b)
{
    Tensor out = kgntm::matmul(a.value(), b.value());
    return a.tape().record(std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g) {
        const Tensor& av = a.value();
        const Tensor& bv = b.value();
        const auto m = av.rows(), k = av.cols(), n = bv.cols();
        if (a.requires_grad()) {
            auto ga = Tensor::matrix(m, k);
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t p = 0; p < k; ++p) {
                    double s = 0.0;
                    for (std::size_t j = 0; j < n; ++j) s += g(i, j) * bv(p, j);
                    ga(i, p) = s;
                }
            t.accumulate(a, ga.reshaped(av.shape()));
        }
        if (b.requires_grad()) {
            auto gb = Tensor::matrix(k, n);
            const double* gp = g.values().data();
            double* gbp = gb.values().data();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t p = 0; p < k; ++p) {
                    const double av_ip = av(i, p);
                    if (av_ip == 0.0) continue;
                    for (std::size_t j = 0; j < n; ++j) gbp[p * n + j] += av_ip * gp[i * n + j];
                }
            t.accumulate(b, gb.reshaped(bv.shape()));
        }
    });
}

Var add(const Var& a, const Var& b)
{
    return binary(
        a, b, [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
        [](double, double) { return 1.0; });
}

Var sub(const Var& a, const Var& b)
{
    return binary(
        a, b, [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
        [](double, double) { return -1.0; });
}

Var mul(const Var& a, const Var& b)
{
    return binary(
        a, b, [](double x, double y) { return x * y; }, [](double, double y) { return y; },
        [](double x, double) { return x; });
}

Var div(const Var& a, const Var& b)
{
    return binary(
        a, b, [](double x, double y) { return x / y; }, [](double, double y) { return 1.0 / y; },
        [](double x, double y) { return -x / (y * y); });
}

Var scale(const Var& a, double s)
{
    return unary(a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Var add_scalar(const Var& a, double s)
{
    return unary(a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Var one_minus(const Var& a)
{
    return unary(a, [](double x) { return 1.0 - x; }, [](double, double) { return -1.0; });
}

Var relu(const Var& a)
{
    return unary(a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var sigmoid(const Var& a)
{
    return unary(a, sigmoid_value, [](double, double y) { return y * (1.0 - y); });
}

Var softplus(const Var& a)
{
    return unary(a, softplus_value, [](double x, double) { return sigmoid_value(x); });
}

Var exp(const Var& a)
{
    return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(const Var& a, double floor)
{
    return unary(
        a,
        [floor](double x) {
            if (x < floor) {
                g_log_clamps.fetch_add(1, std::memory_order_relaxed);
                return std::log(floor);
            }
            return std::log(x);
        },
        [floor](double x, double) { return x < floor ? 0.0 : 1.0 / x; });
}

Var square(const Var& a)
{
    return unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var softmax_rows(const Var& a)
{
    const Tensor& av = a.value();
    Tensor out = Tensor::matrix(av.rows(), av.cols());
    for (std::size_t r = 0; r < av.rows(); ++r) {
        double mx = av(r, 0);
        for (std::size_t c = 1; c < av.cols(); ++c) mx = std::max(mx, av(r, c));
        double z = 0.0;
        for (std::size_t c = 0; c < av.cols(); ++c) z += (out(r, c) = std::exp(av(r, c) - mx));
        for (std::size_t c = 0; c < av.cols(); ++c) out(r, c) /= z;
    }
    out = out.reshaped(av.shape());
    Tape& tape = a.tape();
    const Var res(&tape, tape.size());
    return tape.record(std::move(out), {a}, [a, res](Tape& t, const Tensor& g) {
        const Tensor& y = res.value();
        Tensor ga(y.shape());
        const auto R = y.rows(), C = y.cols();
        for (std::size_t r = 0; r < R; ++r) {
            double dot = 0.0;
            for (std::size_t c = 0; c < C; ++c) dot += g[r * C + c] * y[r * C + c];
            for (std::size_t c = 0; c < C; ++c) ga[r * C + c] = y[r * C + c] * (g[r * C + c] - dot);
        }
        t.accumulate(a, ga);
    });
}

Var sum(const Var& a)
{
    double s = 0.0;
    for (double v : a.value().values()) s += v;
    return a.tape().record(Tensor::scalar(s), {a}, [a](Tape& t, const Tensor& g) {
        t.accumulate(a, Tensor(a.value().shape(), g.item()));
    });
}

Var sum_rows(const Var& a)
{
    const Tensor& av = a.value();
    auto out = Tensor::matrix(av.rows(), 1);
    for (std::size_t r = 0; r < av.rows(); ++r)
        for (std::size_t c = 0; c < av.cols(); ++c) out(r, 0) += av(r, c);
    return a.tape().record(std::move(out), {a}, [a](Tape& t, const Tensor& g) {
        const Tensor& av = a.value();
        Tensor ga(av.shape());
        for (std::size_t r = 0; r < av.rows(); ++r)
            for (std::size_t c = 0; c < av.cols(); ++c) ga[r * av.cols() + c] = g[r];
        t.accumulate(a, ga);
    });
}

Var sum_cols(const Var& a)
{
    const Tensor& av = a.value();
    auto out = Tensor::matrix(1, av.cols());
    for (std::size_t r = 0; r < av.rows(); ++r)
        for (std::size_t c = 0; c < av.cols(); ++c) out(0, c) += av(r, c);
    return a.tape().record(std::move(out), {a}, [a](Tape& t, const Tensor& g) {
        const Tensor& av = a.value();
        Tensor ga(av.shape());
        for (std::size_t r = 0; r < av.rows(); ++r)
            for (std::size_t c = 0; c < av.cols(); ++c) ga[r * av.cols() + c] = g[c];
        t.accumulate(a, ga);
    });
}

Var row_norm(const Var& a)
{
    const Tensor& av = a.value();
    auto out = Tensor::matrix(av.rows(), 1);
    for (std::size_t r = 0; r < av.rows(); ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < av.cols(); ++c) s += av(r, c) * av(r, c);
        out(r, 0) = std::sqrt(s);
    }
    Tape& tape = a.tape();
    const Var res(&tape, tape.size());
    return tape.record(std::move(out), {a}, [a, res](Tape& t, const Tensor& g) {
        const Tensor& av = a.value();
        const Tensor& n = res.value();
        Tensor ga(av.shape());
        for (std::size_t r = 0; r < av.rows(); ++r) {
            if (n[r] == 0.0) continue;
            for (std::size_t c = 0; c < av.cols(); ++c) ga[r * av.cols() + c] = g[r] * av(r, c) / n[r];
        }
        t.accumulate(a, ga);
    });
}

Var reshape(const Var& a, std::size_t rows, std::size_t cols)
{
    if (rows * cols != a.value().size()) {
        throw ShapeError("reshape " + a.value().shape_str() + " to [" + std::to_string(rows) + "x" +
                         std::to_string(cols) + "]");
    }
    return a.tape().record(a.value().reshaped(Shape{rows, cols}), {a}, [a](Tape& t, const Tensor& g) {
        t.accumulate(a, g.reshaped(a.value().shape()));
    });
}

Var normalize_rows(const Var& a)
{
    return div(a, sum_rows(a));
}

Var weighted_log_sum(const Var& p, const Tensor& weights, double floor)
{
    const Tensor& pv = p.value();
    if (!pv.same_shape(weights)) {
        throw ShapeError("weighted_log_sum: values " + pv.shape_str() + " vs weights " + weights.shape_str());
    }
    double total = 0.0;
    for (std::size_t i = 0; i < pv.size(); ++i) {
        const double w = weights[i];
        if (w == 0.0) continue;
        if (pv[i] < floor) {
            g_log_clamps.fetch_add(1, std::memory_order_relaxed);
            total += w * std::log(floor);
        } else {
            total += w * std::log(pv[i]);
        }
    }
    return p.tape().record(Tensor::scalar(total), {p}, [p, weights, floor](Tape& t, const Tensor& g) {
        const Tensor& pv = p.value();
        Tensor gp(pv.shape());
        const double go = g.item();
        for (std::size_t i = 0; i < pv.size(); ++i) {
            if (weights[i] != 0.0 && pv[i] >= floor) gp[i] = go * weights[i] / pv[i];
        }
        t.accumulate(p, gp);
    });
}

Var transpose(const Var& a)
{
    return a.tape().record(kgntm::transpose(a.value()), {a},
                           [a](Tape& t, const Tensor& g) { t.accumulate(a, kgntm::transpose(g)); });
}

std::size_t log_clamp_count()
{
    return g_log_clamps.load();
}

void reset_log_clamp_count()
{
    g_log_clamps.store(0);
}

} // namespace ad
} // namespace kgntm
