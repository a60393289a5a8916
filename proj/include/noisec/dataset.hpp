#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "noisec/tensor.hpp"

namespace noisec {

// Image-like samples in [0,1] with integer class labels.
struct LabeledDataset {
    std::array<int, 3> shape{0, 0, 0};  // C,H,W
    int classes = 0;
    std::string split;  // "train" / "test" / derived tags
    std::vector<Tensor> images;
    std::vector<int> labels;

    size_t size() const { return images.size(); }
    std::int64_t image_numel() const {
        return static_cast<std::int64_t>(shape[0]) * shape[1] * shape[2];
    }
    void validate() const;  // shapes, label range, pixel range
};

inline constexpr std::uint32_t kDatasetVersion = 1;

// "NSDS" container: magic, version u32, config-hash u64, class-count u32,
// sample-count u32, dims u32 x3 (C,H,W), then per sample the f32 image
// payload followed by a u16 label.
void save_dataset(const std::string& path, const LabeledDataset& ds, std::uint64_t config_hash);
LabeledDataset load_dataset(const std::string& path);
std::uint64_t dataset_config_hash(const std::string& path);

// Importer for the packed 3072-bytes-per-image CIFAR-10 binary batches
// (1 label byte + 3x1024 channel bytes per record, values scaled by 1/255).
LabeledDataset import_cifar(const std::string& path, int max_samples = -1);

// Parametric shape/texture generator: every sample is drawn from one of up
// to 10 pattern families (disk, stripes, checkerboard, cross, ...) with
// randomized geometry, palette and pixel noise. Pixel values stay inside
// [0.05, 0.95] so attack-scale perturbations rarely hit the box bounds.
struct SyntheticSpec {
    int classes = 4;
    std::array<int, 3> shape{3, 16, 16};
    int train_count = 2000;
    int test_count = 500;
    std::uint64_t seed = 1;
};

struct SyntheticData {
    LabeledDataset train;
    LabeledDataset test;
};

SyntheticData generate_synthetic(const SyntheticSpec& spec);

}  // namespace noisec
