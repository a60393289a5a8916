#include "noisec/tensor.hpp"

#include <cmath>
#include <sstream>

namespace noisec {

std::int64_t shape_numel(const std::vector<int>& shape) {
    std::int64_t n = 1;
    for (int d : shape) {
        if (d <= 0) throw TensorError("non-positive dimension in shape " + shape_to_string(shape));
        n *= d;
    }
    return n;
}

std::string shape_to_string(const std::vector<int>& shape) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ",";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

Tensor Tensor::zeros(std::vector<int> shape) {
    Tensor t;
    std::int64_t n = shape_numel(shape);
    t.shape = std::move(shape);
    t.data.assign(static_cast<size_t>(n), 0.0f);
    return t;
}

Tensor Tensor::full(std::vector<int> shape, float value) {
    Tensor t = zeros(std::move(shape));
    for (float& v : t.data) v = value;
    return t;
}

Tensor Tensor::scalar(float value) {
    Tensor t;
    t.shape = {1};
    t.data = {value};
    return t;
}

Tensor Tensor::from(std::vector<int> shape, std::vector<float> values) {
    if (shape_numel(shape) != static_cast<std::int64_t>(values.size()))
        throw TensorError("value count does not match shape " + shape_to_string(shape));
    Tensor t;
    t.shape = std::move(shape);
    t.data = std::move(values);
    return t;
}

std::string Tensor::shape_str() const { return shape_to_string(shape); }

void Tensor::require_finite(const char* what) const {
    for (float v : data) {
        if (!std::isfinite(v)) throw NumericError(std::string("non-finite value in ") + what);
    }
}

namespace {

template <typename T>
T pairwise_sum_impl(const T* p, std::int64_t n) {
    if (n <= 32) {
        T s = T(0);
        for (std::int64_t i = 0; i < n; ++i) s += p[i];
        return s;
    }
    std::int64_t half = n / 2;
    return pairwise_sum_impl(p, half) + pairwise_sum_impl(p + half, n - half);
}

}  // namespace

float pairwise_sum(const float* p, std::int64_t n) { return pairwise_sum_impl(p, n); }
double pairwise_sum(const double* p, std::int64_t n) { return pairwise_sum_impl(p, n); }

float clamp01(float v) { return v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v); }

Tensor clamp01(Tensor t) {
    for (float& v : t.data) v = clamp01(v);
    return t;
}

double l1_norm(const Tensor& t) {
    double s = 0.0;
    for (float v : t.data) s += std::abs(static_cast<double>(v));
    return s;
}

double l2_norm(const Tensor& t) {
    double s = 0.0;
    for (float v : t.data) s += static_cast<double>(v) * static_cast<double>(v);
    return std::sqrt(s);
}

double l2_dist(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw TensorError("l2_dist shape mismatch " + a.shape_str() + " vs " + b.shape_str());
    double s = 0.0;
    for (std::int64_t i = 0; i < a.numel(); ++i) {
        double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        s += d * d;
    }
    return std::sqrt(s);
}

float linf_dist(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw TensorError("linf_dist shape mismatch " + a.shape_str() + " vs " + b.shape_str());
    float m = 0.0f;
    for (std::int64_t i = 0; i < a.numel(); ++i) {
        float d = std::fabs(a[i] - b[i]);
        if (d > m) m = d;
    }
    return m;
}

double cosine_similarity(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw TensorError("cosine shape mismatch");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::int64_t i = 0; i < a.numel(); ++i) {
        dot += static_cast<double>(a[i]) * static_cast<double>(b[i]);
        na += static_cast<double>(a[i]) * static_cast<double>(a[i]);
        nb += static_cast<double>(b[i]) * static_cast<double>(b[i]);
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace noisec
