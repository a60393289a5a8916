#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace noisec {

// Shape/value violations detected before running an operation.
struct TensorError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Non-finite values or numeric breakdown inside an operation.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Dense row-major f32 array. The universal numeric carrier for images,
// perturbations, parameters and gradients.
struct Tensor {
    std::vector<int> shape;
    std::vector<float> data;

    Tensor() = default;

    static Tensor zeros(std::vector<int> shape);
    static Tensor full(std::vector<int> shape, float value);
    static Tensor scalar(float value);
    static Tensor from(std::vector<int> shape, std::vector<float> values);

    int rank() const { return static_cast<int>(shape.size()); }
    int dim(int i) const { return shape[static_cast<size_t>(i)]; }
    std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }
    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    float& operator[](std::int64_t i) { return data[static_cast<size_t>(i)]; }
    float operator[](std::int64_t i) const { return data[static_cast<size_t>(i)]; }

    std::string shape_str() const;

    // Throws NumericError naming `what` if any entry is NaN/Inf.
    void require_finite(const char* what) const;
};

std::int64_t shape_numel(const std::vector<int>& shape);
std::string shape_to_string(const std::vector<int>& shape);

// Cascade summation: deterministic order, better f32 accumulation than a
// straight running sum.
float pairwise_sum(const float* p, std::int64_t n);
double pairwise_sum(const double* p, std::int64_t n);

float clamp01(float v);
Tensor clamp01(Tensor t);

double l1_norm(const Tensor& t);
double l2_norm(const Tensor& t);
double l2_dist(const Tensor& a, const Tensor& b);
float linf_dist(const Tensor& a, const Tensor& b);
double cosine_similarity(const Tensor& a, const Tensor& b);

}  // namespace noisec
