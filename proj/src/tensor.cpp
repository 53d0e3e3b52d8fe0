#include "dapt/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>
#include <sstream>
#include <unordered_set>

namespace dapt::nn {

using BackwardFn = std::function<void(TensorImpl& out)>;

struct Node {
    std::uint64_t seq = 0;
    const char* op = "";
    std::vector<std::shared_ptr<TensorImpl>> inputs;
    BackwardFn backward;
};

struct TensorImpl {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;
    bool requires_grad = false;
    bool backward_done = false;
    std::shared_ptr<Node> node;

    std::vector<double>& ensure_grad() {
        if (grad.size() != data.size()) {
            grad.assign(data.size(), 0.0);
        }
        return grad;
    }
};

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

std::atomic<std::uint64_t> g_next_seq{1};
thread_local bool g_grad_enabled = true;

TensorImpl& checked(const Tensor& t, const char* op) {
    if (!t.defined()) {
        throw std::invalid_argument(std::string(op) + ": undefined tensor");
    }
    return *t.impl();
}

// Creates an op result; records a tape node when any input is tracked.
Tensor make_result(Shape shape, std::vector<double> data, std::initializer_list<const Tensor*> inputs,
                   const char* op, BackwardFn backward) {
    auto impl = std::make_shared<TensorImpl>();
    impl->shape = std::move(shape);
    impl->data = std::move(data);
    bool track = false;
    if (g_grad_enabled) {
        for (const Tensor* in : inputs) {
            track = track || in->requires_grad();
        }
    }
    if (track) {
        impl->requires_grad = true;
        auto node = std::make_shared<Node>();
        node->seq = g_next_seq.fetch_add(1);
        node->op = op;
        for (const Tensor* in : inputs) {
            node->inputs.push_back(in->shared_impl());
        }
        node->backward = std::move(backward);
        impl->node = std::move(node);
    }
    return Tensor(std::move(impl));
}

// Gradient sink for an input, or nullptr when the input is not tracked.
std::vector<double>* grad_sink(const std::shared_ptr<TensorImpl>& in) {
    return in->requires_grad ? &in->ensure_grad() : nullptr;
}

// -- broadcasting --------------------------------------------------------

struct BroadcastPlan {
    Shape out_shape;
    std::vector<std::size_t> a_strides; // aligned to out rank, 0 on broadcast axes
    std::vector<std::size_t> b_strides;
    enum class Kind { Same, SuffixB, General } kind = Kind::General;
};

std::vector<std::size_t> aligned_strides(const Shape& shape, const Shape& out) {
    const std::size_t r = out.size();
    std::vector<std::size_t> strides(r, 0);
    std::size_t stride = 1;
    for (std::size_t k = 0; k < shape.size(); ++k) {
        const std::size_t axis = shape.size() - 1 - k;
        const std::size_t out_axis = r - 1 - k;
        strides[out_axis] = shape[axis] == 1 ? 0 : stride;
        stride *= shape[axis];
    }
    return strides;
}

BroadcastPlan plan_broadcast(const Shape& a, const Shape& b, const char* op) {
    BroadcastPlan plan;
    const std::size_t r = std::max(a.size(), b.size());
    plan.out_shape.assign(r, 1);
    for (std::size_t k = 0; k < r; ++k) {
        const std::size_t da = k < a.size() ? a[a.size() - 1 - k] : 1;
        const std::size_t db = k < b.size() ? b[b.size() - 1 - k] : 1;
        if (da != db && da != 1 && db != 1) {
            throw ShapeError(std::string(op) + ": shapes " + shape_string(a) + " and " + shape_string(b) +
                             " are not broadcast-compatible");
        }
        plan.out_shape[r - 1 - k] = std::max(da, db);
    }
    plan.a_strides = aligned_strides(a, plan.out_shape);
    plan.b_strides = aligned_strides(b, plan.out_shape);
    if (a == b) {
        plan.kind = BroadcastPlan::Kind::Same;
    } else if (a == plan.out_shape && b.size() <= a.size() &&
               std::equal(b.begin(), b.end(), a.end() - static_cast<std::ptrdiff_t>(b.size()))) {
        plan.kind = BroadcastPlan::Kind::SuffixB;
    }
    return plan;
}

// Calls f(out_index, a_index, b_index) for every output element.
template <typename F>
void for_each_broadcast(const BroadcastPlan& plan, std::size_t b_size, F&& f) {
    const std::size_t total = shape_size(plan.out_shape);
    if (plan.kind == BroadcastPlan::Kind::Same) {
        for (std::size_t i = 0; i < total; ++i) {
            f(i, i, i);
        }
        return;
    }
    if (plan.kind == BroadcastPlan::Kind::SuffixB) {
        for (std::size_t i = 0; i < total; ++i) {
            f(i, i, i % b_size);
        }
        return;
    }
    const std::size_t r = plan.out_shape.size();
    std::vector<std::size_t> idx(r, 0);
    std::size_t ai = 0;
    std::size_t bi = 0;
    for (std::size_t i = 0; i < total; ++i) {
        f(i, ai, bi);
        for (std::size_t k = r; k-- > 0;) {
            ++idx[k];
            ai += plan.a_strides[k];
            bi += plan.b_strides[k];
            if (idx[k] < plan.out_shape[k]) {
                break;
            }
            ai -= plan.a_strides[k] * idx[k];
            bi -= plan.b_strides[k] * idx[k];
            idx[k] = 0;
        }
    }
}

// -- matmul layout -----------------------------------------------------------

struct MatmulLayout {
    std::size_t batch = 1;
    std::size_t m = 0;
    std::size_t k = 0;
    std::size_t n = 0;
    bool shared_b = false; // b is a single 2-D matrix
    Shape out_shape;
};

MatmulLayout plan_matmul(const Shape& a, const Shape& b, bool transpose_b, const char* op) {
    auto fail = [&] {
        throw ShapeError(std::string(op) + ": incompatible shapes " + shape_string(a) + " and " + shape_string(b));
    };
    if (a.size() < 2 || b.size() < 2) {
        fail();
    }
    MatmulLayout l;
    const std::size_t b_rows = b[b.size() - 2];
    const std::size_t b_cols = b[b.size() - 1];
    l.k = a.back();
    if (transpose_b ? b_cols != l.k : b_rows != l.k) {
        fail();
    }
    l.n = transpose_b ? b_rows : b_cols;
    if (b.size() == 2) {
        l.shared_b = true;
        l.m = shape_size(Shape(a.begin(), a.end() - 1));
    } else {
        if (a.size() != b.size() || !std::equal(a.begin(), a.end() - 2, b.begin())) {
            fail();
        }
        l.m = a[a.size() - 2];
        l.batch = shape_size(Shape(a.begin(), a.end() - 2));
    }
    l.out_shape = Shape(a.begin(), a.end() - 1);
    l.out_shape.push_back(l.n);
    return l;
}

Tensor matmul_impl(const Tensor& a, const Tensor& b, bool transpose_b, const char* op) {
    const auto& ai = checked(a, op);
    const auto& bi = checked(b, op);
    const MatmulLayout l = plan_matmul(ai.shape, bi.shape, transpose_b, op);
    const auto m = static_cast<Eigen::Index>(l.m);
    const auto k = static_cast<Eigen::Index>(l.k);
    const auto n = static_cast<Eigen::Index>(l.n);
    const auto b_rows = transpose_b ? n : k;
    const auto b_cols = transpose_b ? k : n;
    const std::size_t a_block = l.m * l.k;
    const std::size_t b_block = l.shared_b ? 0 : l.k * l.n;
    const std::size_t c_block = l.m * l.n;

    std::vector<double> out(l.batch * c_block, 0.0);
    for (std::size_t s = 0; s < l.batch; ++s) {
        ConstMapMat A(ai.data.data() + s * a_block, m, k);
        ConstMapMat B(bi.data.data() + s * b_block, b_rows, b_cols);
        MapMat C(out.data() + s * c_block, m, n);
        if (transpose_b) {
            C.noalias() = A * B.transpose();
        } else {
            C.noalias() = A * B;
        }
    }
    auto a_impl = a.shared_impl();
    auto b_impl = b.shared_impl();
    return make_result(l.out_shape, std::move(out), {&a, &b}, op, [=](TensorImpl& res) {
        auto* ga = grad_sink(a_impl);
        auto* gb = grad_sink(b_impl);
        for (std::size_t s = 0; s < l.batch; ++s) {
            ConstMapMat G(res.grad.data() + s * c_block, m, n);
            ConstMapMat A(a_impl->data.data() + s * a_block, m, k);
            ConstMapMat B(b_impl->data.data() + s * b_block, b_rows, b_cols);
            if (ga != nullptr) {
                MapMat GA(ga->data() + s * a_block, m, k);
                if (transpose_b) {
                    GA.noalias() += G * B;
                } else {
                    GA.noalias() += G * B.transpose();
                }
            }
            if (gb != nullptr) {
                MapMat GB(gb->data() + s * b_block, b_rows, b_cols);
                if (transpose_b) {
                    GB.noalias() += G.transpose() * A;
                } else {
                    GB.noalias() += A.transpose() * G;
                }
            }
        }
    });
}

template <typename Forward, typename GradA, typename GradB>
Tensor binary_broadcast(const Tensor& a, const Tensor& b, const char* op, Forward fwd, GradA grad_a,
                        GradB grad_b) {
    const auto& ai = checked(a, op);
    const auto& bi = checked(b, op);
    auto plan = std::make_shared<BroadcastPlan>(plan_broadcast(ai.shape, bi.shape, op));
    std::vector<double> out(shape_size(plan->out_shape));
    const std::size_t b_size = bi.data.size();
    for_each_broadcast(*plan, b_size, [&](std::size_t o, std::size_t ia, std::size_t ib) {
        out[o] = fwd(ai.data[ia], bi.data[ib]);
    });
    auto a_impl = a.shared_impl();
    auto b_impl = b.shared_impl();
    return make_result(plan->out_shape, std::move(out), {&a, &b}, op, [=](TensorImpl& res) {
        auto* ga = grad_sink(a_impl);
        auto* gb = grad_sink(b_impl);
        for_each_broadcast(*plan, b_size, [&](std::size_t o, std::size_t ia, std::size_t ib) {
            const double g = res.grad[o];
            if (ga != nullptr) {
                (*ga)[ia] += grad_a(g, a_impl->data[ia], b_impl->data[ib]);
            }
            if (gb != nullptr) {
                (*gb)[ib] += grad_b(g, a_impl->data[ia], b_impl->data[ib]);
            }
        });
    });
}

} // namespace

// -- shapes -------------------------------------------------------------------

std::string shape_string(const Shape& shape) {
    std::ostringstream ss;
    ss << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        ss << (i ? ", " : "") << shape[i];
    }
    ss << ']';
    return ss.str();
}

std::size_t shape_size(const Shape& shape) {
    std::size_t n = 1;
    for (auto d : shape) {
        n *= d;
    }
    return n;
}

// -- Tensor -------------------------------------------------------------------

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    const std::size_t n = shape_size(shape);
    return from_data(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
    if (shape_size(shape) != data.size()) {
        throw ShapeError("Tensor: shape " + shape_string(shape) + " needs " + std::to_string(shape_size(shape)) +
                         " values, got " + std::to_string(data.size()));
    }
    auto impl = std::make_shared<TensorImpl>();
    impl->shape = std::move(shape);
    impl->data = std::move(data);
    impl->requires_grad = requires_grad;
    return Tensor(std::move(impl));
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from_data({}, {value}, requires_grad); }

const Shape& Tensor::shape() const { return checked(*this, "shape").shape; }

std::size_t Tensor::dim(std::size_t axis) const {
    const auto& s = shape();
    if (axis >= s.size()) {
        throw ShapeError("dim: axis " + std::to_string(axis) + " out of range for " + shape_string(s));
    }
    return s[axis];
}

std::size_t Tensor::size() const { return checked(*this, "size").data.size(); }

std::span<const double> Tensor::data() const { return checked(*this, "data").data; }

std::span<double> Tensor::mutable_data() {
    auto& impl = checked(*this, "mutable_data");
    if (impl.node) {
        throw AutogradError("mutable_data: tensor is an operation result");
    }
    return impl.data;
}

double Tensor::item() const {
    const auto& impl = checked(*this, "item");
    if (impl.data.size() != 1) {
        throw ShapeError("item: tensor of shape " + shape_string(impl.shape) + " is not a scalar");
    }
    return impl.data[0];
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

void Tensor::set_requires_grad(bool value) {
    auto& impl = checked(*this, "set_requires_grad");
    if (impl.node && !value) {
        throw AutogradError("set_requires_grad: cannot untrack an operation result; use detach()");
    }
    impl.requires_grad = value;
}

bool Tensor::has_grad() const { return impl_ && impl_->grad.size() == impl_->data.size(); }

std::span<const double> Tensor::grad() const {
    auto& impl = checked(*this, "grad");
    return impl.ensure_grad();
}

std::span<double> Tensor::mutable_grad() { return checked(*this, "mutable_grad").ensure_grad(); }

void Tensor::zero_grad() {
    auto& impl = checked(*this, "zero_grad");
    std::fill(impl.grad.begin(), impl.grad.end(), 0.0);
}

Tensor Tensor::clone() const {
    const auto& impl = checked(*this, "clone");
    return from_data(impl.shape, impl.data, impl.requires_grad);
}

Tensor Tensor::detach() const {
    const auto& impl = checked(*this, "detach");
    return from_data(impl.shape, impl.data, false);
}

void Tensor::backward() {
    auto& root = checked(*this, "backward");
    if (root.data.size() != 1) {
        throw AutogradError("backward: loss must be a scalar, got shape " + shape_string(root.shape));
    }
    if (!root.requires_grad) {
        throw AutogradError("backward: loss is not connected to any tracked tensor");
    }
    if (root.backward_done) {
        throw AutogradError("backward: already called on this graph; rebuild it before calling again");
    }

    // Collect every result reachable from the root.
    std::vector<TensorImpl*> results;
    std::unordered_set<TensorImpl*> seen;
    std::vector<TensorImpl*> stack{&root};
    seen.insert(&root);
    while (!stack.empty()) {
        TensorImpl* t = stack.back();
        stack.pop_back();
        if (!t->node) {
            continue;
        }
        results.push_back(t);
        for (const auto& in : t->node->inputs) {
            if (in->requires_grad && seen.insert(in.get()).second) {
                stack.push_back(in.get());
            }
        }
    }
    std::sort(results.begin(), results.end(),
              [](const TensorImpl* x, const TensorImpl* y) { return x->node->seq > y->node->seq; });

    for (TensorImpl* t : results) {
        t->grad.assign(t->data.size(), 0.0);
    }
    root.ensure_grad()[0] += 1.0;
    for (TensorImpl* t : results) {
        t->node->backward(*t);
    }
    root.backward_done = true;
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

// -- operations ---------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) { return matmul_impl(a, b, false, "matmul"); }

Tensor matmul_nt(const Tensor& a, const Tensor& b) { return matmul_impl(a, b, true, "matmul_nt"); }

Tensor add(const Tensor& a, const Tensor& b) {
    return binary_broadcast(
        a, b, "add", [](double x, double y) { return x + y; }, [](double g, double, double) { return g; },
        [](double g, double, double) { return g; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return binary_broadcast(
        a, b, "mul", [](double x, double y) { return x * y; }, [](double g, double, double y) { return g * y; },
        [](double g, double x, double) { return g * x; });
}

Tensor scale(const Tensor& a, double c) {
    const auto& ai = checked(a, "scale");
    std::vector<double> out(ai.data.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = ai.data[i] * c;
    }
    auto a_impl = a.shared_impl();
    return make_result(ai.shape, std::move(out), {&a}, "scale", [=](TensorImpl& res) {
        auto* ga = grad_sink(a_impl);
        for (std::size_t i = 0; i < res.grad.size(); ++i) {
            (*ga)[i] += res.grad[i] * c;
        }
    });
}

Tensor softmax(const Tensor& a) {
    const auto& ai = checked(a, "softmax");
    if (ai.shape.empty() || ai.shape.back() == 0) {
        throw ShapeError("softmax: empty last axis in shape " + shape_string(ai.shape));
    }
    const std::size_t cols = ai.shape.back();
    const std::size_t rows = ai.data.size() / cols;
    std::vector<double> out(ai.data.size());
    for (std::size_t r = 0; r < rows; ++r) {
        const double* x = ai.data.data() + r * cols;
        double* y = out.data() + r * cols;
        const double mx = *std::max_element(x, x + cols);
        double total = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
            y[c] = std::exp(x[c] - mx);
            total += y[c];
        }
        for (std::size_t c = 0; c < cols; ++c) {
            y[c] /= total;
        }
    }
    auto a_impl = a.shared_impl();
    return make_result(ai.shape, std::move(out), {&a}, "softmax", [=](TensorImpl& res) {
        auto& ga = *grad_sink(a_impl);
        for (std::size_t r = 0; r < rows; ++r) {
            const double* y = res.data.data() + r * cols;
            const double* g = res.grad.data() + r * cols;
            double dot = 0.0;
            for (std::size_t c = 0; c < cols; ++c) {
                dot += g[c] * y[c];
            }
            for (std::size_t c = 0; c < cols; ++c) {
                ga[r * cols + c] += y[c] * (g[c] - dot);
            }
        }
    });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double epsilon) {
    const auto& xi = checked(x, "layer_norm");
    const auto& gi = checked(gain, "layer_norm");
    const auto& bi = checked(bias, "layer_norm");
    if (!(epsilon > 0.0)) {
        throw std::invalid_argument("layer_norm: epsilon must be positive");
    }
    if (xi.shape.empty() || xi.shape.back() == 0) {
        throw ShapeError("layer_norm: empty last axis in shape " + shape_string(xi.shape));
    }
    const std::size_t cols = xi.shape.back();
    if (gi.shape != Shape{cols} || bi.shape != Shape{cols}) {
        throw ShapeError("layer_norm: gain " + shape_string(gi.shape) + " / bias " + shape_string(bi.shape) +
                         " do not match last axis of " + shape_string(xi.shape));
    }
    const std::size_t rows = xi.data.size() / cols;
    auto normalized = std::make_shared<std::vector<double>>(xi.data.size());
    auto inv_std = std::make_shared<std::vector<double>>(rows);
    std::vector<double> out(xi.data.size());
    const double inv_n = 1.0 / static_cast<double>(cols);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* v = xi.data.data() + r * cols;
        double mu = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
            mu += v[c];
        }
        mu *= inv_n;
        double var = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
            const double d = v[c] - mu;
            var += d * d;
        }
        var *= inv_n;
        const double is = 1.0 / std::sqrt(var + epsilon);
        (*inv_std)[r] = is;
        for (std::size_t c = 0; c < cols; ++c) {
            const double xh = (v[c] - mu) * is;
            (*normalized)[r * cols + c] = xh;
            out[r * cols + c] = xh * gi.data[c] + bi.data[c];
        }
    }
    auto x_impl = x.shared_impl();
    auto g_impl = gain.shared_impl();
    auto b_impl = bias.shared_impl();
    return make_result(xi.shape, std::move(out), {&x, &gain, &bias}, "layer_norm", [=](TensorImpl& res) {
        auto* gx = grad_sink(x_impl);
        auto* gg = grad_sink(g_impl);
        auto* gb = grad_sink(b_impl);
        std::vector<double> dxhat(cols);
        for (std::size_t r = 0; r < rows; ++r) {
            const double* g = res.grad.data() + r * cols;
            const double* xh = normalized->data() + r * cols;
            double mean_d = 0.0;
            double mean_dx = 0.0;
            for (std::size_t c = 0; c < cols; ++c) {
                if (gg != nullptr) {
                    (*gg)[c] += g[c] * xh[c];
                }
                if (gb != nullptr) {
                    (*gb)[c] += g[c];
                }
                dxhat[c] = g[c] * g_impl->data[c];
                mean_d += dxhat[c];
                mean_dx += dxhat[c] * xh[c];
            }
            if (gx == nullptr) {
                continue;
            }
            mean_d *= inv_n;
            mean_dx *= inv_n;
            const double is = (*inv_std)[r];
            for (std::size_t c = 0; c < cols; ++c) {
                (*gx)[r * cols + c] += is * (dxhat[c] - mean_d - xh[c] * mean_dx);
            }
        }
    });
}

Tensor gelu(const Tensor& a) {
    const auto& ai = checked(a, "gelu");
    static const double kAlpha = std::sqrt(2.0 / std::numbers::pi);
    std::vector<double> out(ai.data.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double x = ai.data[i];
        out[i] = 0.5 * x * (1.0 + std::tanh(kAlpha * (x + kGeluCoefficient * x * x * x)));
    }
    auto a_impl = a.shared_impl();
    return make_result(ai.shape, std::move(out), {&a}, "gelu", [=](TensorImpl& res) {
        auto& ga = *grad_sink(a_impl);
        for (std::size_t i = 0; i < res.grad.size(); ++i) {
            const double x = a_impl->data[i];
            const double t = std::tanh(kAlpha * (x + kGeluCoefficient * x * x * x));
            const double dt = (1.0 - t * t) * kAlpha * (1.0 + 3.0 * kGeluCoefficient * x * x);
            ga[i] += res.grad[i] * (0.5 * (1.0 + t) + 0.5 * x * dt);
        }
    });
}

Tensor embedding_lookup(const Tensor& table, std::span<const std::int32_t> ids) {
    const auto& ti = checked(table, "embedding_lookup");
    if (ti.shape.size() != 2) {
        throw ShapeError("embedding_lookup: table must be 2-D, got " + shape_string(ti.shape));
    }
    const std::size_t rows = ti.shape[0];
    const std::size_t cols = ti.shape[1];
    auto index = std::make_shared<std::vector<std::int32_t>>(ids.begin(), ids.end());
    std::vector<double> out(index->size() * cols);
    for (std::size_t i = 0; i < index->size(); ++i) {
        const auto id = (*index)[i];
        if (id < 0 || static_cast<std::size_t>(id) >= rows) {
            throw std::out_of_range("embedding_lookup: id " + std::to_string(id) + " outside table of " +
                                    std::to_string(rows) + " rows");
        }
        std::copy_n(ti.data.data() + static_cast<std::size_t>(id) * cols, cols, out.data() + i * cols);
    }
    auto t_impl = table.shared_impl();
    return make_result({index->size(), cols}, std::move(out), {&table}, "embedding_lookup", [=](TensorImpl& res) {
        auto& gt = *grad_sink(t_impl);
        for (std::size_t i = 0; i < index->size(); ++i) {
            const auto row = static_cast<std::size_t>((*index)[i]);
            for (std::size_t c = 0; c < cols; ++c) {
                gt[row * cols + c] += res.grad[i * cols + c];
            }
        }
    });
}

Tensor cross_entropy(const Tensor& logits, std::span<const std::int32_t> targets) {
    const auto& li = checked(logits, "cross_entropy");
    if (li.shape.size() != 2 || li.shape[0] == 0 || li.shape[1] == 0) {
        throw ShapeError("cross_entropy: logits must be non-empty [n, C], got " + shape_string(li.shape));
    }
    const std::size_t n = li.shape[0];
    const std::size_t classes = li.shape[1];
    if (targets.size() != n) {
        throw ShapeError("cross_entropy: " + std::to_string(targets.size()) + " targets for " + std::to_string(n) +
                         " rows");
    }
    auto probs = std::make_shared<std::vector<double>>(li.data.size());
    auto tgt = std::make_shared<std::vector<std::int32_t>>(targets.begin(), targets.end());
    double loss = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
        const auto t = (*tgt)[r];
        if (t < 0 || static_cast<std::size_t>(t) >= classes) {
            throw std::out_of_range("cross_entropy: target " + std::to_string(t) + " outside " +
                                    std::to_string(classes) + " classes");
        }
        const double* x = li.data.data() + r * classes;
        double* p = probs->data() + r * classes;
        const double mx = *std::max_element(x, x + classes);
        double total = 0.0;
        for (std::size_t c = 0; c < classes; ++c) {
            p[c] = std::exp(x[c] - mx);
            total += p[c];
        }
        for (std::size_t c = 0; c < classes; ++c) {
            p[c] /= total;
        }
        loss += std::log(total) - (x[static_cast<std::size_t>(t)] - mx);
    }
    loss /= static_cast<double>(n);
    auto l_impl = logits.shared_impl();
    return make_result({}, {loss}, {&logits}, "cross_entropy", [=](TensorImpl& res) {
        auto& gl = *grad_sink(l_impl);
        const double g = res.grad[0] / static_cast<double>(n);
        for (std::size_t r = 0; r < n; ++r) {
            for (std::size_t c = 0; c < classes; ++c) {
                gl[r * classes + c] += g * (*probs)[r * classes + c];
            }
            gl[r * classes + static_cast<std::size_t>((*tgt)[r])] -= g;
        }
    });
}

Tensor reshape(const Tensor& a, Shape shape) {
    const auto& ai = checked(a, "reshape");
    if (shape_size(shape) != ai.data.size()) {
        throw ShapeError("reshape: cannot view " + shape_string(ai.shape) + " as " + shape_string(shape));
    }
    auto a_impl = a.shared_impl();
    return make_result(std::move(shape), ai.data, {&a}, "reshape", [=](TensorImpl& res) {
        auto& ga = *grad_sink(a_impl);
        for (std::size_t i = 0; i < res.grad.size(); ++i) {
            ga[i] += res.grad[i];
        }
    });
}

Tensor transpose(const Tensor& a, std::size_t axis0, std::size_t axis1) {
    const auto& ai = checked(a, "transpose");
    const std::size_t r = ai.shape.size();
    if (axis0 >= r || axis1 >= r) {
        throw ShapeError("transpose: axes out of range for " + shape_string(ai.shape));
    }
    Shape out_shape = ai.shape;
    std::swap(out_shape[axis0], out_shape[axis1]);
    // Source strides permuted into output axis order.
    std::vector<std::size_t> src_strides(r, 1);
    for (std::size_t k = r - 1; k-- > 0;) {
        src_strides[k] = src_strides[k + 1] * ai.shape[k + 1];
    }
    std::swap(src_strides[axis0], src_strides[axis1]);
    auto mapping = std::make_shared<std::vector<std::size_t>>(ai.data.size());
    std::vector<std::size_t> idx(r, 0);
    std::size_t src = 0;
    for (std::size_t i = 0; i < ai.data.size(); ++i) {
        (*mapping)[i] = src;
        for (std::size_t k = r; k-- > 0;) {
            ++idx[k];
            src += src_strides[k];
            if (idx[k] < out_shape[k]) {
                break;
            }
            src -= src_strides[k] * idx[k];
            idx[k] = 0;
        }
    }
    std::vector<double> out(ai.data.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = ai.data[(*mapping)[i]];
    }
    auto a_impl = a.shared_impl();
    return make_result(std::move(out_shape), std::move(out), {&a}, "transpose", [=](TensorImpl& res) {
        auto& ga = *grad_sink(a_impl);
        for (std::size_t i = 0; i < res.grad.size(); ++i) {
            ga[(*mapping)[i]] += res.grad[i];
        }
    });
}

Tensor sum(const Tensor& a) {
    const auto& ai = checked(a, "sum");
    double total = 0.0;
    for (double v : ai.data) {
        total += v;
    }
    auto a_impl = a.shared_impl();
    return make_result({}, {total}, {&a}, "sum", [=](TensorImpl& res) {
        auto& ga = *grad_sink(a_impl);
        for (auto& g : ga) {
            g += res.grad[0];
        }
    });
}

Tensor mean(const Tensor& a) {
    const auto n = checked(a, "mean").data.size();
    if (n == 0) {
        throw ShapeError("mean: empty tensor");
    }
    return scale(sum(a), 1.0 / static_cast<double>(n));
}

Tensor dropout(const Tensor& a, double p, Rng& rng) {
    if (!(p >= 0.0 && p < 1.0)) {
        throw std::invalid_argument("dropout: probability must lie in [0, 1)");
    }
    if (p == 0.0) {
        return a;
    }
    const auto& ai = checked(a, "dropout");
    auto keep = std::make_shared<std::vector<double>>(ai.data.size());
    const double scale_kept = 1.0 / (1.0 - p);
    std::vector<double> out(ai.data.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        (*keep)[i] = rng.uniform() < p ? 0.0 : scale_kept;
        out[i] = ai.data[i] * (*keep)[i];
    }
    auto a_impl = a.shared_impl();
    return make_result(ai.shape, std::move(out), {&a}, "dropout", [=](TensorImpl& res) {
        auto& ga = *grad_sink(a_impl);
        for (std::size_t i = 0; i < res.grad.size(); ++i) {
            ga[i] += res.grad[i] * (*keep)[i];
        }
    });
}

bool all_finite(const Tensor& t) {
    const auto d = t.data();
    return std::all_of(d.begin(), d.end(), [](double v) { return std::isfinite(v); });
}

void dump(std::ostream& out, const Tensor& t) {
    const auto& shape = t.shape();
    out << "shape " << shape_string(shape) << '\n';
    const auto d = t.data();
    const std::size_t cols = shape.empty() ? 1 : std::max<std::size_t>(shape.back(), 1);
    char buf[32];
    for (std::size_t i = 0; i < d.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g", d[i]);
        out << buf << ((i + 1) % cols == 0 ? '\n' : ' ');
    }
}

double grad_check(const std::function<Tensor()>& f, const std::vector<Tensor>& params, double step, double floor) {
    if (!(step >= 1e-6 && step <= 1e-3)) {
        throw std::invalid_argument("grad_check: step must lie in [1e-6, 1e-3]");
    }
    auto value = [&] {
        NoGradGuard guard;
        return f().item();
    };
    const double v0 = value();
    if (value() != v0) {
        throw AutogradError("grad_check: function is not deterministic");
    }
    std::vector<Tensor> tracked = params;
    for (auto& p : tracked) {
        p.zero_grad();
    }
    Tensor loss = f();
    if (loss.item() != v0) {
        throw AutogradError("grad_check: function is not deterministic");
    }
    loss.backward();

    double worst = 0.0;
    for (auto& p : tracked) {
        const std::vector<double> analytic(p.grad().begin(), p.grad().end());
        auto values = p.mutable_data();
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double original = values[i];
            values[i] = original + step;
            const double plus = value();
            values[i] = original - step;
            const double minus = value();
            values[i] = original;
            const double numeric = (plus - minus) / (2.0 * step);
            const double diff = std::abs(analytic[i] - numeric);
            const double err =
                diff == 0.0 ? 0.0 : diff / std::max(floor, std::abs(analytic[i]) + std::abs(numeric));
            worst = std::max(worst, err);
        }
    }
    return worst;
}

} // namespace dapt::nn
