#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "noisec/autograd.hpp"
#include "noisec/checkpoint.hpp"
#include "noisec/dataset.hpp"
#include "noisec/tensor.hpp"

namespace noisec::models {

// Training hit a non-finite loss; carries the epoch where it happened.
struct DivergenceError : NumericError {
    DivergenceError(int epoch_, const std::string& msg) : NumericError(msg), epoch(epoch_) {}
    int epoch;
};

struct TrainConfig {
    int epochs = 5;
    int batch_size = 32;
    float lr = 0.05f;
    float momentum = 0.0f;  // 0 = plain SGD
    bool adam = false;      // Adam(0.9, 0.999); what the deep autoencoder stack needs
    std::uint64_t seed = 1;
    float sigma = 0.05f;  // denoising corruption, autoencoder only

    void validate(bool for_autoencoder) const;
};

struct TrainHistory {
    std::vector<float> loss;      // mean loss per epoch
    std::vector<double> accuracy; // running train accuracy per epoch (classifier)
};

// Three conv blocks (strides 1,2,2), a linear feature layer of width
// feature_dim with relu, and a linear output head. One forward pass yields
// logits, softmax confidences and the penultimate feature vector.
class Classifier {
public:
    struct Arch {
        std::array<int, 3> input{3, 16, 16};  // C,H,W
        int classes = 4;
        int feature_dim = 64;
        std::array<int, 3> conv_channels{16, 32, 32};
    };

    struct Output {
        std::vector<float> logits;
        std::vector<float> probs;
        std::vector<float> features;
        int predicted = -1;
    };

    static Classifier build(const Arch& arch, std::uint64_t init_seed);

    TrainHistory train(const LabeledDataset& data, const TrainConfig& cfg);
    bool trained() const { return trained_; }

    Output run(const Tensor& image) const;
    std::vector<Output> run_batch(const std::vector<const Tensor*>& images) const;
    std::vector<float> predict(const Tensor& image) const { return run(image).probs; }
    std::vector<float> features(const Tensor& image) const { return run(image).features; }
    int classify(const Tensor& image) const { return run(image).predicted; }
    double accuracy(const LabeledDataset& data) const;

    const Arch& arch() const { return arch_; }

    // Logits graph with x as a tape variable; parameters enter without grad.
    // This is the hook the attacks use to differentiate w.r.t. the input.
    Var forward_logits(Tape& tape, Var x) const;

    std::vector<NamedTensor> to_tensors() const;
    static Classifier from_tensors(const std::vector<NamedTensor>& tensors);
    void save(const std::string& path, std::uint64_t config_hash = 0) const;
    static Classifier load(const std::string& path);

private:
    Classifier() = default;
    Var forward_logits_on(Tape& tape, Var x, bool train_params, std::vector<Var>* params,
                          Var* feature_node) const;

    Arch arch_{};
    Tensor conv_w_[3], conv_b_[3];
    Tensor feat_w_, feat_b_;
    Tensor out_w_, out_b_;
    bool trained_ = false;
};

// Denoising hourglass autoencoder: three conv stages (the second and third
// downsample by 2), a linear bottleneck, and the mirrored transposed-conv
// decoder. convs_per_stage = 2 gives the full 6+6 reference layout; plain
// stacks that deep do not train at desk scale without normalization layers,
// so the default is 1 (3+3) with the same stage widths and compression
// ratio. Trained to reconstruct the clean input from a Gaussian-corrupted
// copy. The raw decoder output is unbounded; reconstruct() clamps to [0,1].
class Autoencoder {
public:
    struct Arch {
        std::array<int, 3> input{3, 16, 16};
        std::array<int, 3> channels{16, 32, 48};
        int convs_per_stage = 1;  // 1 or 2
        int bottleneck = 0;  // 0: input numel / 3, matching the reference compression ratio

        int resolved_bottleneck() const;
        int layers() const { return 3 * convs_per_stage; }
    };

    static Autoencoder build(const Arch& arch, std::uint64_t init_seed);

    TrainHistory train(const LabeledDataset& data, const TrainConfig& cfg);
    bool trained() const { return trained_; }

    Tensor reconstruct(const Tensor& image) const;
    Tensor recon_noise(const Tensor& image) const;  // image - reconstruct(image)
    std::vector<Tensor> reconstruct_batch(const std::vector<const Tensor*>& images) const;

    const Arch& arch() const { return arch_; }

    std::vector<NamedTensor> to_tensors() const;
    static Autoencoder from_tensors(const std::vector<NamedTensor>& tensors);
    void save(const std::string& path, std::uint64_t config_hash = 0) const;
    static Autoencoder load(const std::string& path);

private:
    Autoencoder() = default;
    Var forward_raw(Tape& tape, Var x, bool train_params, std::vector<Var>* params) const;

    Arch arch_{};
    std::vector<Tensor> enc_w_, enc_b_;
    Tensor bott_w_, bott_b_;
    Tensor unbott_w_, unbott_b_;
    std::vector<Tensor> dec_w_, dec_b_;
    std::vector<int> enc_strides_, dec_strides_;
    bool trained_ = false;
};

// He-uniform fan-in initialization; biases start at zero.
Tensor init_conv_weight(int out_ch, int in_ch, std::uint64_t seed);
Tensor init_linear_weight(int in_dim, int out_dim, std::uint64_t seed);

}  // namespace noisec::models
