#include "noisec/nn.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "noisec/checkpoint.hpp"
#include "noisec/rng.hpp"

namespace noisec::models {

namespace {

int conv_out(int extent, int stride) { return (extent - 1) / stride + 1; }

Tensor batch_images(const std::vector<const Tensor*>& images, const std::array<int, 3>& shape) {
    const int B = static_cast<int>(images.size());
    Tensor batch = Tensor::zeros({B, shape[0], shape[1], shape[2]});
    const std::int64_t n = static_cast<std::int64_t>(shape[0]) * shape[1] * shape[2];
    for (int b = 0; b < B; ++b) {
        const Tensor& img = *images[b];
        if (img.shape != std::vector<int>{shape[0], shape[1], shape[2]})
            throw TensorError("batch: image shape " + img.shape_str() + " does not match model input");
        std::copy(img.data.begin(), img.data.end(), batch.data.begin() + b * n);
    }
    return batch;
}

Tensor arch_meta(const std::vector<int>& vals) {
    Tensor t = Tensor::zeros({static_cast<int>(vals.size())});
    for (size_t i = 0; i < vals.size(); ++i) t[static_cast<std::int64_t>(i)] = static_cast<float>(vals[i]);
    return t;
}

std::vector<int> meta_vals(const Tensor& t) {
    std::vector<int> v(static_cast<size_t>(t.numel()));
    for (size_t i = 0; i < v.size(); ++i) v[i] = static_cast<int>(t[static_cast<std::int64_t>(i)]);
    return v;
}

// Deterministic first-order optimizers. Plain SGD is the default; the deep
// autoencoder stack will not leave the bias-only basin under it and trains
// with Adam instead (beta1 0.9, beta2 0.999, eps 1e-8).
struct Optimizer {
    float lr;
    float momentum;
    bool adam;
    long step = 0;
    std::vector<Tensor> velocity;  // SGD momentum / Adam first moment
    std::vector<Tensor> second;    // Adam second moment

    Optimizer(float lr_, float momentum_, bool adam_) : lr(lr_), momentum(momentum_), adam(adam_) {}

    void apply(std::vector<Tensor*>& params, const std::vector<Var>& vars, Tape& tape) {
        if ((adam || momentum > 0.0f) && velocity.empty()) {
            for (Tensor* p : params) velocity.push_back(Tensor::zeros(p->shape));
            if (adam)
                for (Tensor* p : params) second.push_back(Tensor::zeros(p->shape));
        }
        ++step;
        const double b1c = 1.0 - std::pow(0.9, static_cast<double>(step));
        const double b2c = 1.0 - std::pow(0.999, static_cast<double>(step));
        for (size_t i = 0; i < params.size(); ++i) {
            if (!tape.has_grad(vars[i])) continue;
            const Tensor& g = tape.grad(vars[i]);
            Tensor& p = *params[i];
            if (adam) {
                Tensor& m = velocity[i];
                Tensor& v = second[i];
                for (std::int64_t j = 0; j < p.numel(); ++j) {
                    m[j] = 0.9f * m[j] + 0.1f * g[j];
                    v[j] = 0.999f * v[j] + 0.001f * g[j] * g[j];
                    const double mhat = static_cast<double>(m[j]) / b1c;
                    const double vhat = static_cast<double>(v[j]) / b2c;
                    p[j] -= static_cast<float>(lr * mhat / (std::sqrt(vhat) + 1e-8));
                }
            } else if (momentum > 0.0f) {
                Tensor& v = velocity[i];
                for (std::int64_t j = 0; j < p.numel(); ++j) {
                    v[j] = momentum * v[j] + g[j];
                    p[j] -= lr * v[j];
                }
            } else {
                for (std::int64_t j = 0; j < p.numel(); ++j) p[j] -= lr * g[j];
            }
        }
    }
};

}  // namespace

void TrainConfig::validate(bool for_autoencoder) const {
    if (epochs <= 0) throw TensorError("train config: epochs must be positive");
    if (batch_size <= 0) throw TensorError("train config: batch size must be positive");
    if (!(lr >= 0.0f) || !std::isfinite(lr)) throw TensorError("train config: bad learning rate");
    if (!(momentum >= 0.0f) || momentum >= 1.0f) throw TensorError("train config: momentum must be in [0,1)");
    if (for_autoencoder && !(sigma >= 0.0f)) throw TensorError("train config: sigma must be >= 0");
}

Tensor init_conv_weight(int out_ch, int in_ch, std::uint64_t seed) {
    Rng rng(seed);
    const float limit = std::sqrt(6.0f / (static_cast<float>(in_ch) * 9.0f));
    Tensor w = Tensor::zeros({out_ch, in_ch, 3, 3});
    for (float& v : w.data) v = rng.uniform(-limit, limit);
    return w;
}

Tensor init_linear_weight(int in_dim, int out_dim, std::uint64_t seed) {
    Rng rng(seed);
    const float limit = std::sqrt(6.0f / static_cast<float>(in_dim));
    Tensor w = Tensor::zeros({in_dim, out_dim});
    for (float& v : w.data) v = rng.uniform(-limit, limit);
    return w;
}

// ---------------------------------------------------------------------------
// Classifier

Classifier Classifier::build(const Arch& arch, std::uint64_t init_seed) {
    if (arch.classes < 2) throw TensorError("classifier: need at least 2 classes");
    if (arch.feature_dim < arch.classes)
        throw TensorError("classifier: feature_dim must be >= class count");
    if (arch.input[0] <= 0 || arch.input[1] < 4 || arch.input[2] < 4)
        throw TensorError("classifier: incompatible input shape");
    for (int c : arch.conv_channels)
        if (c <= 0) throw TensorError("classifier: conv channels must be positive");

    Classifier m;
    m.arch_ = arch;
    const int in_ch[3] = {arch.input[0], arch.conv_channels[0], arch.conv_channels[1]};
    for (int i = 0; i < 3; ++i) {
        m.conv_w_[i] = init_conv_weight(arch.conv_channels[static_cast<size_t>(i)], in_ch[i],
                                        Rng::derive(init_seed, 0x10 + static_cast<std::uint64_t>(i)));
        m.conv_b_[i] = Tensor::zeros({arch.conv_channels[static_cast<size_t>(i)]});
    }
    const int h3 = conv_out(conv_out(arch.input[1], 2), 2);
    const int w3 = conv_out(conv_out(arch.input[2], 2), 2);
    const int flat = arch.conv_channels[2] * h3 * w3;
    m.feat_w_ = init_linear_weight(flat, arch.feature_dim, Rng::derive(init_seed, 0x20));
    m.feat_b_ = Tensor::zeros({arch.feature_dim});
    m.out_w_ = init_linear_weight(arch.feature_dim, arch.classes, Rng::derive(init_seed, 0x21));
    m.out_b_ = Tensor::zeros({arch.classes});
    return m;
}

Var Classifier::forward_logits_on(Tape& tape, Var x, bool train_params, std::vector<Var>* params,
                                  Var* feature_node) const {
    std::vector<Var> vs;
    auto reg = [&](const Tensor& t) {
        Var v = tape.input(t, train_params);
        vs.push_back(v);
        return v;
    };
    Var w1 = reg(conv_w_[0]), b1 = reg(conv_b_[0]);
    Var w2 = reg(conv_w_[1]), b2 = reg(conv_b_[1]);
    Var w3 = reg(conv_w_[2]), b3 = reg(conv_b_[2]);
    Var wf = reg(feat_w_), bf = reg(feat_b_);
    Var wo = reg(out_w_), bo = reg(out_b_);

    Var h = tape.relu(tape.conv2d(x, w1, b1, 1));
    h = tape.relu(tape.conv2d(h, w2, b2, 2));
    h = tape.relu(tape.conv2d(h, w3, b3, 2));
    const Tensor& hv = tape.value(h);
    Var flat = tape.reshape(h, {hv.dim(0), static_cast<int>(hv.numel() / hv.dim(0))});
    Var feats = tape.relu(tape.linear(flat, wf, bf));
    if (feature_node) *feature_node = feats;
    Var logits = tape.linear(feats, wo, bo);
    if (params) *params = std::move(vs);
    return logits;
}

Var Classifier::forward_logits(Tape& tape, Var x) const {
    return forward_logits_on(tape, x, false, nullptr, nullptr);
}

TrainHistory Classifier::train(const LabeledDataset& data, const TrainConfig& cfg) {
    cfg.validate(false);
    if (data.size() == 0) throw TensorError("train: empty dataset");
    data.validate();
    if (data.shape != arch_.input) throw TensorError("train: dataset shape does not match model input");
    if (data.classes > arch_.classes) throw TensorError("train: dataset has more classes than model");

    std::vector<Tensor*> params = {&conv_w_[0], &conv_b_[0], &conv_w_[1], &conv_b_[1], &conv_w_[2],
                                   &conv_b_[2], &feat_w_,    &feat_b_,    &out_w_,     &out_b_};
    TrainHistory hist;
    Optimizer opt(cfg.lr, cfg.momentum, cfg.adam);
    const int n = static_cast<int>(data.size());
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng rng(Rng::derive(cfg.seed, 0x1000 + static_cast<std::uint64_t>(epoch)));
        std::vector<int> order = rng.permutation(n);
        double loss_sum = 0.0;
        int correct = 0, batches = 0;
        for (int start = 0; start < n; start += cfg.batch_size) {
            const int bsz = std::min(cfg.batch_size, n - start);
            std::vector<const Tensor*> imgs(static_cast<size_t>(bsz));
            std::vector<int> labels(static_cast<size_t>(bsz));
            for (int i = 0; i < bsz; ++i) {
                const int idx = order[static_cast<size_t>(start + i)];
                imgs[static_cast<size_t>(i)] = &data.images[static_cast<size_t>(idx)];
                labels[static_cast<size_t>(i)] = data.labels[static_cast<size_t>(idx)];
            }
            try {
                Tape tape;
                Var x = tape.input(batch_images(imgs, arch_.input), false);
                std::vector<Var> vars;
                Var logits = forward_logits_on(tape, x, true, &vars, nullptr);
                const Tensor& lv = tape.value(logits);
                for (int i = 0; i < bsz; ++i) {
                    const float* row = lv.data.data() + static_cast<std::int64_t>(i) * arch_.classes;
                    int best = 0;
                    for (int c = 1; c < arch_.classes; ++c)
                        if (row[c] > row[best]) best = c;
                    if (best == labels[static_cast<size_t>(i)]) ++correct;
                }
                Var loss = tape.cross_entropy(logits, labels);
                loss_sum += static_cast<double>(tape.value(loss)[0]);
                ++batches;
                tape.backward(loss);
                opt.apply(params, vars, tape);
            } catch (const NumericError& e) {
                throw DivergenceError(epoch, std::string("classifier training diverged at epoch ") +
                                                 std::to_string(epoch) + ": " + e.what());
            }
        }
        hist.loss.push_back(static_cast<float>(loss_sum / std::max(1, batches)));
        hist.accuracy.push_back(static_cast<double>(correct) / static_cast<double>(n));
    }
    trained_ = true;
    return hist;
}

std::vector<Classifier::Output> Classifier::run_batch(const std::vector<const Tensor*>& images) const {
    std::vector<Output> out;
    out.reserve(images.size());
    const int chunk = 64;
    for (size_t start = 0; start < images.size(); start += chunk) {
        const size_t end = std::min(images.size(), start + chunk);
        std::vector<const Tensor*> slice(images.begin() + static_cast<std::ptrdiff_t>(start),
                                         images.begin() + static_cast<std::ptrdiff_t>(end));
        Tape tape;
        Var x = tape.input(batch_images(slice, arch_.input), false);
        Var feats{};
        Var logits = forward_logits_on(tape, x, false, nullptr, &feats);
        Var probs = tape.softmax(logits);
        const Tensor& lv = tape.value(logits);
        const Tensor& pv = tape.value(probs);
        const Tensor& fv = tape.value(feats);
        for (size_t i = 0; i < slice.size(); ++i) {
            Output o;
            const std::int64_t li = static_cast<std::int64_t>(i) * arch_.classes;
            const std::int64_t fi = static_cast<std::int64_t>(i) * arch_.feature_dim;
            o.logits.assign(lv.data.begin() + li, lv.data.begin() + li + arch_.classes);
            o.probs.assign(pv.data.begin() + li, pv.data.begin() + li + arch_.classes);
            o.features.assign(fv.data.begin() + fi, fv.data.begin() + fi + arch_.feature_dim);
            o.predicted = static_cast<int>(std::max_element(o.logits.begin(), o.logits.end()) -
                                           o.logits.begin());
            out.push_back(std::move(o));
        }
    }
    return out;
}

Classifier::Output Classifier::run(const Tensor& image) const {
    return run_batch({&image}).front();
}

double Classifier::accuracy(const LabeledDataset& data) const {
    std::vector<const Tensor*> ptrs;
    ptrs.reserve(data.size());
    for (const auto& img : data.images) ptrs.push_back(&img);
    std::vector<Output> outs = run_batch(ptrs);
    int correct = 0;
    for (size_t i = 0; i < outs.size(); ++i)
        if (outs[i].predicted == data.labels[i]) ++correct;
    return data.size() ? static_cast<double>(correct) / static_cast<double>(data.size()) : 0.0;
}

std::vector<NamedTensor> Classifier::to_tensors() const {
    std::vector<NamedTensor> out;
    out.push_back({"meta.arch", arch_meta({arch_.input[0], arch_.input[1], arch_.input[2], arch_.classes,
                                           arch_.feature_dim, arch_.conv_channels[0], arch_.conv_channels[1],
                                           arch_.conv_channels[2], trained_ ? 1 : 0})});
    const char* names[3] = {"conv1", "conv2", "conv3"};
    for (int i = 0; i < 3; ++i) {
        out.push_back({std::string(names[i]) + ".w", conv_w_[i]});
        out.push_back({std::string(names[i]) + ".b", conv_b_[i]});
    }
    out.push_back({"feat.w", feat_w_});
    out.push_back({"feat.b", feat_b_});
    out.push_back({"out.w", out_w_});
    out.push_back({"out.b", out_b_});
    return out;
}

Classifier Classifier::from_tensors(const std::vector<NamedTensor>& tensors) {
    const std::vector<int> meta = meta_vals(find_tensor(tensors, "meta.arch"));
    if (meta.size() != 9) throw FileFormatError("classifier checkpoint: bad meta.arch");
    Arch arch;
    arch.input = {meta[0], meta[1], meta[2]};
    arch.classes = meta[3];
    arch.feature_dim = meta[4];
    arch.conv_channels = {meta[5], meta[6], meta[7]};
    Classifier m = build(arch, 0);
    const char* names[3] = {"conv1", "conv2", "conv3"};
    for (int i = 0; i < 3; ++i) {
        const Tensor& w = find_tensor(tensors, std::string(names[i]) + ".w");
        const Tensor& b = find_tensor(tensors, std::string(names[i]) + ".b");
        if (w.shape != m.conv_w_[i].shape || b.shape != m.conv_b_[i].shape)
            throw FileFormatError("classifier checkpoint: tensor shape mismatch");
        m.conv_w_[i] = w;
        m.conv_b_[i] = b;
    }
    auto assign = [&](Tensor& dst, const std::string& name) {
        const Tensor& t = find_tensor(tensors, name);
        if (t.shape != dst.shape) throw FileFormatError("classifier checkpoint: tensor shape mismatch");
        dst = t;
    };
    assign(m.feat_w_, "feat.w");
    assign(m.feat_b_, "feat.b");
    assign(m.out_w_, "out.w");
    assign(m.out_b_, "out.b");
    m.trained_ = meta[8] != 0;
    return m;
}

void Classifier::save(const std::string& path, std::uint64_t config_hash) const {
    std::vector<NamedTensor> ts = to_tensors();
    ts.insert(ts.begin(), config_hash_entry(config_hash));
    save_checkpoint_file(path, ts);
}

Classifier Classifier::load(const std::string& path) {
    return from_tensors(load_checkpoint_file(path));
}

// ---------------------------------------------------------------------------
// Autoencoder

int Autoencoder::Arch::resolved_bottleneck() const {
    if (bottleneck > 0) return bottleneck;
    return static_cast<int>(static_cast<std::int64_t>(input[0]) * input[1] * input[2] / 3);
}

Autoencoder Autoencoder::build(const Arch& arch, std::uint64_t init_seed) {
    if (arch.input[0] <= 0 || arch.input[1] < 8 || arch.input[2] < 8)
        throw TensorError("autoencoder: incompatible input shape");
    for (int c : arch.channels)
        if (c <= 0) throw TensorError("autoencoder: channels must be positive");
    if (arch.convs_per_stage != 1 && arch.convs_per_stage != 2)
        throw TensorError("autoencoder: convs_per_stage must be 1 or 2");
    if (arch.resolved_bottleneck() <= 0) throw TensorError("autoencoder: bad bottleneck");

    Autoencoder m;
    m.arch_ = arch;
    const int a = arch.channels[0], b = arch.channels[1], c = arch.channels[2];
    std::vector<int> enc_in, enc_out;
    if (arch.convs_per_stage == 2) {
        enc_in = {arch.input[0], a, a, b, b, c};
        enc_out = {a, a, b, b, c, c};
        m.enc_strides_ = {1, 1, 2, 1, 2, 1};
        m.dec_strides_ = {1, 2, 1, 2, 1, 1};
    } else {
        enc_in = {arch.input[0], a, b};
        enc_out = {a, b, c};
        m.enc_strides_ = {1, 2, 2};
        m.dec_strides_ = {2, 2, 1};
    }
    const int L = arch.layers();
    for (int i = 0; i < L; ++i) {
        m.enc_w_.push_back(init_conv_weight(enc_out[static_cast<size_t>(i)], enc_in[static_cast<size_t>(i)],
                                            Rng::derive(init_seed, 0x30 + static_cast<std::uint64_t>(i))));
        m.enc_b_.push_back(Tensor::zeros({enc_out[static_cast<size_t>(i)]}));
    }
    const int h4 = conv_out(conv_out(arch.input[1], 2), 2);
    const int w4 = conv_out(conv_out(arch.input[2], 2), 2);
    const int flat = c * h4 * w4;
    const int bott = arch.resolved_bottleneck();
    m.bott_w_ = init_linear_weight(flat, bott, Rng::derive(init_seed, 0x40));
    m.bott_b_ = Tensor::zeros({bott});
    m.unbott_w_ = init_linear_weight(bott, flat, Rng::derive(init_seed, 0x41));
    m.unbott_b_ = Tensor::zeros({flat});
    // Transposed-conv weights are [in,out,3,3]; decoder mirrors the encoder.
    std::vector<int> dec_in(enc_out.rbegin(), enc_out.rend());
    std::vector<int> dec_out(enc_in.rbegin(), enc_in.rend());
    for (int i = 0; i < L; ++i) {
        Tensor w = init_conv_weight(dec_in[static_cast<size_t>(i)], dec_out[static_cast<size_t>(i)],
                                    Rng::derive(init_seed, 0x50 + static_cast<std::uint64_t>(i)));
        w.shape = {dec_in[static_cast<size_t>(i)], dec_out[static_cast<size_t>(i)], 3, 3};
        // The last layer starts small so the untrained output is near zero;
        // a full-scale init overshoots the pixel range and the first epochs
        // kill the encoder path while the biases soak up the error.
        if (i == L - 1)
            for (float& v : w.data) v *= 0.1f;
        m.dec_w_.push_back(std::move(w));
        m.dec_b_.push_back(Tensor::zeros({dec_out[static_cast<size_t>(i)]}));
    }
    return m;
}

Var Autoencoder::forward_raw(Tape& tape, Var x, bool train_params, std::vector<Var>* params) const {
    std::vector<Var> vs;
    auto reg = [&](const Tensor& t) {
        Var v = tape.input(t, train_params);
        vs.push_back(v);
        return v;
    };
    const int L = arch_.layers();
    Var h = x;
    for (int i = 0; i < L; ++i) {
        Var w = reg(enc_w_[static_cast<size_t>(i)]), b = reg(enc_b_[static_cast<size_t>(i)]);
        h = tape.relu(tape.conv2d(h, w, b, enc_strides_[static_cast<size_t>(i)]));
    }
    const Tensor& hv = tape.value(h);
    const int B = hv.dim(0);
    const int c = arch_.channels[2];
    const int h4 = hv.dim(2), w4 = hv.dim(3);
    Var flat = tape.reshape(h, {B, c * h4 * w4});
    Var wb = reg(bott_w_), bb = reg(bott_b_);
    // Linear code layer; relu here would halve the usable code space.
    Var bott = tape.linear(flat, wb, bb);
    Var wu = reg(unbott_w_), bu = reg(unbott_b_);
    Var unflat = tape.relu(tape.linear(bott, wu, bu));
    Var d = tape.reshape(unflat, {B, c, h4, w4});
    for (int i = 0; i < L; ++i) {
        Var w = reg(dec_w_[static_cast<size_t>(i)]), b = reg(dec_b_[static_cast<size_t>(i)]);
        d = tape.conv2d_transpose(d, w, b, dec_strides_[static_cast<size_t>(i)]);
        if (i < L - 1) d = tape.relu(d);
    }
    if (params) *params = std::move(vs);
    return d;
}

TrainHistory Autoencoder::train(const LabeledDataset& data, const TrainConfig& cfg) {
    cfg.validate(true);
    if (data.size() == 0) throw TensorError("train: empty dataset");
    if (data.shape != arch_.input) throw TensorError("train: dataset shape does not match model input");

    std::vector<Tensor*> params;
    const int L = arch_.layers();
    for (int i = 0; i < L; ++i) {
        params.push_back(&enc_w_[static_cast<size_t>(i)]);
        params.push_back(&enc_b_[static_cast<size_t>(i)]);
    }
    params.push_back(&bott_w_);
    params.push_back(&bott_b_);
    params.push_back(&unbott_w_);
    params.push_back(&unbott_b_);
    for (int i = 0; i < L; ++i) {
        params.push_back(&dec_w_[static_cast<size_t>(i)]);
        params.push_back(&dec_b_[static_cast<size_t>(i)]);
    }

    TrainHistory hist;
    Optimizer opt(cfg.lr, cfg.momentum, cfg.adam);
    const int n = static_cast<int>(data.size());
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng rng(Rng::derive(cfg.seed, 0x2000 + static_cast<std::uint64_t>(epoch)));
        std::vector<int> order = rng.permutation(n);
        double loss_sum = 0.0;
        int batches = 0;
        for (int start = 0; start < n; start += cfg.batch_size) {
            const int bsz = std::min(cfg.batch_size, n - start);
            std::vector<const Tensor*> imgs(static_cast<size_t>(bsz));
            for (int i = 0; i < bsz; ++i)
                imgs[static_cast<size_t>(i)] = &data.images[static_cast<size_t>(order[static_cast<size_t>(start + i)])];
            try {
                Tensor clean = batch_images(imgs, arch_.input);
                Tensor noisy = clean;
                if (cfg.sigma > 0.0f) {
                    // Corruption resampled per batch.
                    for (float& v : noisy.data) v += rng.normal(0.0f, cfg.sigma);
                }
                Tape tape;
                Var x = tape.input(std::move(noisy), false);
                std::vector<Var> vars;
                Var recon = forward_raw(tape, x, true, &vars);
                Var loss = tape.mse(recon, tape.input(std::move(clean), false));
                loss_sum += static_cast<double>(tape.value(loss)[0]);
                ++batches;
                tape.backward(loss);
                opt.apply(params, vars, tape);
            } catch (const NumericError& e) {
                throw DivergenceError(epoch, std::string("autoencoder training diverged at epoch ") +
                                                 std::to_string(epoch) + ": " + e.what());
            }
        }
        hist.loss.push_back(static_cast<float>(loss_sum / std::max(1, batches)));
    }
    trained_ = true;
    return hist;
}

std::vector<Tensor> Autoencoder::reconstruct_batch(const std::vector<const Tensor*>& images) const {
    std::vector<Tensor> out;
    out.reserve(images.size());
    const int chunk = 64;
    for (size_t start = 0; start < images.size(); start += chunk) {
        const size_t end = std::min(images.size(), start + chunk);
        std::vector<const Tensor*> slice(images.begin() + static_cast<std::ptrdiff_t>(start),
                                         images.begin() + static_cast<std::ptrdiff_t>(end));
        Tape tape;
        Var x = tape.input(batch_images(slice, arch_.input), false);
        Var recon = forward_raw(tape, x, false, nullptr);
        const Tensor& rv = tape.value(recon);
        const std::int64_t n = static_cast<std::int64_t>(arch_.input[0]) * arch_.input[1] * arch_.input[2];
        for (size_t i = 0; i < slice.size(); ++i) {
            Tensor r = Tensor::zeros({arch_.input[0], arch_.input[1], arch_.input[2]});
            for (std::int64_t j = 0; j < n; ++j)
                r[j] = clamp01(rv[static_cast<std::int64_t>(i) * n + j]);
            out.push_back(std::move(r));
        }
    }
    return out;
}

Tensor Autoencoder::reconstruct(const Tensor& image) const {
    return reconstruct_batch({&image}).front();
}

Tensor Autoencoder::recon_noise(const Tensor& image) const {
    Tensor recon = reconstruct(image);
    Tensor eta = image;
    for (std::int64_t i = 0; i < eta.numel(); ++i) eta[i] = image[i] - recon[i];
    return eta;
}

std::vector<NamedTensor> Autoencoder::to_tensors() const {
    std::vector<NamedTensor> out;
    out.push_back({"meta.arch",
                   arch_meta({arch_.input[0], arch_.input[1], arch_.input[2], arch_.channels[0],
                              arch_.channels[1], arch_.channels[2], arch_.resolved_bottleneck(),
                              arch_.convs_per_stage, trained_ ? 1 : 0})});
    for (int i = 0; i < arch_.layers(); ++i) {
        out.push_back({"enc" + std::to_string(i + 1) + ".w", enc_w_[static_cast<size_t>(i)]});
        out.push_back({"enc" + std::to_string(i + 1) + ".b", enc_b_[static_cast<size_t>(i)]});
    }
    out.push_back({"bottleneck.w", bott_w_});
    out.push_back({"bottleneck.b", bott_b_});
    out.push_back({"unbottleneck.w", unbott_w_});
    out.push_back({"unbottleneck.b", unbott_b_});
    for (int i = 0; i < arch_.layers(); ++i) {
        out.push_back({"dec" + std::to_string(i + 1) + ".w", dec_w_[static_cast<size_t>(i)]});
        out.push_back({"dec" + std::to_string(i + 1) + ".b", dec_b_[static_cast<size_t>(i)]});
    }
    return out;
}

Autoencoder Autoencoder::from_tensors(const std::vector<NamedTensor>& tensors) {
    const std::vector<int> meta = meta_vals(find_tensor(tensors, "meta.arch"));
    if (meta.size() != 9) throw FileFormatError("autoencoder checkpoint: bad meta.arch");
    Arch arch;
    arch.input = {meta[0], meta[1], meta[2]};
    arch.channels = {meta[3], meta[4], meta[5]};
    arch.bottleneck = meta[6];
    arch.convs_per_stage = meta[7];
    Autoencoder m = build(arch, 0);
    auto assign = [&](Tensor& dst, const std::string& name) {
        const Tensor& t = find_tensor(tensors, name);
        if (t.shape != dst.shape) throw FileFormatError("autoencoder checkpoint: tensor shape mismatch");
        dst = t;
    };
    for (int i = 0; i < arch.layers(); ++i) {
        assign(m.enc_w_[static_cast<size_t>(i)], "enc" + std::to_string(i + 1) + ".w");
        assign(m.enc_b_[static_cast<size_t>(i)], "enc" + std::to_string(i + 1) + ".b");
    }
    assign(m.bott_w_, "bottleneck.w");
    assign(m.bott_b_, "bottleneck.b");
    assign(m.unbott_w_, "unbottleneck.w");
    assign(m.unbott_b_, "unbottleneck.b");
    for (int i = 0; i < arch.layers(); ++i) {
        assign(m.dec_w_[static_cast<size_t>(i)], "dec" + std::to_string(i + 1) + ".w");
        assign(m.dec_b_[static_cast<size_t>(i)], "dec" + std::to_string(i + 1) + ".b");
    }
    m.trained_ = meta[8] != 0;
    return m;
}

void Autoencoder::save(const std::string& path, std::uint64_t config_hash) const {
    std::vector<NamedTensor> ts = to_tensors();
    ts.insert(ts.begin(), config_hash_entry(config_hash));
    save_checkpoint_file(path, ts);
}

Autoencoder Autoencoder::load(const std::string& path) {
    return from_tensors(load_checkpoint_file(path));
}

}  // namespace noisec::models
