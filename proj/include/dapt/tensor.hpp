#pragma once

#include "dapt/rng.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dapt::nn {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);
std::size_t shape_size(const Shape& shape);

class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class AutogradError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

struct TensorImpl;

/// Reference-counted handle to a dense row-major array of doubles.
///
/// Copies of a Tensor share storage (like a pointer); use clone() for a
/// deep copy. Results of operations record a tape node whenever an input
/// requires gradients and grad mode is enabled, and backward() walks those
/// nodes in reverse creation order.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    bool defined() const { return impl_ != nullptr; }
    const Shape& shape() const;
    std::size_t rank() const { return shape().size(); }
    std::size_t dim(std::size_t axis) const;
    std::size_t size() const;

    std::span<const double> data() const;
    /// Direct write access; only for leaves (parameters, fixtures).
    std::span<double> mutable_data();
    double item() const;

    bool requires_grad() const;
    void set_requires_grad(bool value);
    bool has_grad() const;
    /// Gradient buffer; zeros when no gradient has been accumulated yet.
    std::span<const double> grad() const;
    std::span<double> mutable_grad();
    void zero_grad();

    /// Populates grads of every tracked tensor reachable from this scalar.
    void backward();

    Tensor clone() const;
    Tensor detach() const;

    TensorImpl* impl() const { return impl_.get(); }
    const std::shared_ptr<TensorImpl>& shared_impl() const { return impl_; }
    explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

private:
    std::shared_ptr<TensorImpl> impl_;
};

/// Disables tape recording on this thread for the guard's lifetime.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

bool grad_enabled();

// -- operations -------------------------------------------------------------

/// [..., m, k] x [k, n] -> [..., m, n], or batched [B..., m, k] x [B..., k, n].
Tensor matmul(const Tensor& a, const Tensor& b);
/// a x b^T: [..., m, k] x [n, k] -> [..., m, n], or batched over equal leading axes.
Tensor matmul_nt(const Tensor& a, const Tensor& b);
/// Elementwise with numpy-style broadcasting.
Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
/// Softmax over the last axis.
Tensor softmax(const Tensor& a);
/// Normalizes over the last axis, then applies gain and bias (both [last]).
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double epsilon);
/// tanh approximation: 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3))).
Tensor gelu(const Tensor& a);
/// Rows of a [V, H] table -> [ids.size(), H].
Tensor embedding_lookup(const Tensor& table, std::span<const std::int32_t> ids);
/// Mean over rows of -log softmax(logits)[target]; logits [n, C].
Tensor cross_entropy(const Tensor& logits, std::span<const std::int32_t> targets);
Tensor reshape(const Tensor& a, Shape shape);
Tensor transpose(const Tensor& a, std::size_t axis0, std::size_t axis1);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
/// Inverted dropout; identity when p == 0.
Tensor dropout(const Tensor& a, double p, Rng& rng);

inline constexpr double kGeluCoefficient = 0.044715;

bool all_finite(const Tensor& t);

/// Shape header line followed by row-major values, one last-axis row per line.
void dump(std::ostream& out, const Tensor& t);

/// Central-difference check of the gradients of a scalar function.
///
/// Returns max over all entries of |analytic - numeric| / max(floor, |analytic| + |numeric|).
/// Throws if `f` is not deterministic or `step` is outside [1e-6, 1e-3].
double grad_check(const std::function<Tensor()>& f, const std::vector<Tensor>& params, double step,
                  double floor = 1.0);

} // namespace dapt::nn
