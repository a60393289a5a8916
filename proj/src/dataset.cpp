#include "noisec/dataset.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "noisec/checkpoint.hpp"
#include "noisec/rng.hpp"

namespace noisec {

void LabeledDataset::validate() const {
    if (classes <= 0) throw TensorError("dataset: class count must be positive");
    if (images.size() != labels.size()) throw TensorError("dataset: image/label count mismatch");
    const std::vector<int> expect = {shape[0], shape[1], shape[2]};
    for (size_t i = 0; i < images.size(); ++i) {
        if (images[i].shape != expect)
            throw TensorError("dataset: sample " + std::to_string(i) + " has shape " +
                              images[i].shape_str() + ", expected " + shape_to_string(expect));
        if (labels[i] < 0 || labels[i] >= classes)
            throw TensorError("dataset: label out of range at sample " + std::to_string(i));
        for (float v : images[i].data)
            if (!(v >= 0.0f && v <= 1.0f))
                throw TensorError("dataset: pixel outside [0,1] at sample " + std::to_string(i));
    }
}

void save_dataset(const std::string& path, const LabeledDataset& ds, std::uint64_t config_hash) {
    ds.validate();
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FileFormatError("cannot open for writing: " + path);
    BinaryWriter w(os);
    w.bytes("NSDS", 4);
    w.u32(kDatasetVersion);
    w.u64(config_hash);
    w.u32(static_cast<std::uint32_t>(ds.classes));
    w.u32(static_cast<std::uint32_t>(ds.size()));
    for (int d : ds.shape) w.u32(static_cast<std::uint32_t>(d));
    for (size_t i = 0; i < ds.size(); ++i) {
        for (float v : ds.images[i].data) w.f32(v);
        w.u16(static_cast<std::uint16_t>(ds.labels[i]));
    }
    if (!os) throw FileFormatError("write failed: " + path);
}

namespace {

LabeledDataset read_dataset_stream(std::istream& is, const std::string& path, std::uint64_t* hash_out) {
    BinaryReader r(is);
    char magic[4];
    r.bytes(magic, 4);
    if (std::memcmp(magic, "NSDS", 4) != 0) throw FileFormatError("bad magic, not an NSDS dataset: " + path);
    std::uint32_t version = r.u32();
    if (version != kDatasetVersion)
        throw FileFormatError("unsupported dataset version " + std::to_string(version));
    std::uint64_t hash = r.u64();
    if (hash_out) *hash_out = hash;
    LabeledDataset ds;
    ds.classes = static_cast<int>(r.u32());
    if (ds.classes <= 0 || ds.classes > 65535) throw FileFormatError("class count out of range");
    std::uint32_t count = r.u32();
    for (auto& d : ds.shape) {
        std::uint32_t v = r.u32();
        if (v == 0 || v > 4096) throw FileFormatError("image dim out of range");
        d = static_cast<int>(v);
    }
    const std::int64_t numel = ds.image_numel();
    ds.images.reserve(count);
    ds.labels.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        Tensor img = Tensor::zeros({ds.shape[0], ds.shape[1], ds.shape[2]});
        for (std::int64_t j = 0; j < numel; ++j) img[j] = r.f32();
        std::uint16_t label = r.u16();
        if (label >= ds.classes) throw FileFormatError("label out of range in " + path);
        ds.images.push_back(std::move(img));
        ds.labels.push_back(static_cast<int>(label));
    }
    ds.validate();
    return ds;
}

}  // namespace

LabeledDataset load_dataset(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FileFormatError("cannot open: " + path);
    return read_dataset_stream(is, path, nullptr);
}

std::uint64_t dataset_config_hash(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FileFormatError("cannot open: " + path);
    std::uint64_t hash = 0;
    read_dataset_stream(is, path, &hash);
    return hash;
}

LabeledDataset import_cifar(const std::string& path, int max_samples) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FileFormatError("cannot open: " + path);
    LabeledDataset ds;
    ds.shape = {3, 32, 32};
    ds.classes = 10;
    ds.split = "import";
    const size_t record = 1 + 3072;
    std::vector<unsigned char> buf(record);
    while (max_samples < 0 || static_cast<int>(ds.size()) < max_samples) {
        is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(record));
        const std::streamsize got = is.gcount();
        if (got == 0) break;
        if (got != static_cast<std::streamsize>(record))
            throw FileFormatError("truncated CIFAR record in " + path);
        if (buf[0] > 9) throw FileFormatError("label out of range in " + path);
        Tensor img = Tensor::zeros({3, 32, 32});
        for (int i = 0; i < 3072; ++i)
            img[i] = static_cast<float>(buf[static_cast<size_t>(1 + i)]) / 255.0f;
        ds.images.push_back(std::move(img));
        ds.labels.push_back(static_cast<int>(buf[0]));
    }
    if (ds.size() == 0) throw FileFormatError("no CIFAR records in " + path);
    return ds;
}

namespace {

struct Palette {
    float fg[3];
    float bg[3];
};

// Two colors with a guaranteed contrast gap, all channels inside [0.12,0.88].
Palette sample_palette(Rng& rng, int channels) {
    Palette p{};
    for (int attempt = 0;; ++attempt) {
        float dist = 0.0f;
        for (int c = 0; c < 3; ++c) {
            p.fg[c] = rng.uniform(0.12f, 0.88f);
            p.bg[c] = rng.uniform(0.12f, 0.88f);
            dist += std::fabs(p.fg[c] - p.bg[c]);
        }
        if (channels == 1) {
            p.fg[1] = p.fg[2] = p.fg[0];
            p.bg[1] = p.bg[2] = p.bg[0];
            dist = 3.0f * std::fabs(p.fg[0] - p.bg[0]);
        }
        if (dist > 0.6f || attempt > 64) return p;
    }
}

float pattern_mask(int family, int h, int w, int H, int W, const float* geo) {
    const float y = (static_cast<float>(h) + 0.5f) / static_cast<float>(H);
    const float x = (static_cast<float>(w) + 0.5f) / static_cast<float>(W);
    switch (family) {
        case 0: {  // disk
            const float dy = y - geo[0], dx = x - geo[1];
            return dy * dy + dx * dx <= geo[2] * geo[2] ? 1.0f : 0.0f;
        }
        case 1: {  // stripes
            const float t = geo[0] < 0.5f ? y : x;
            return std::fmod(t * geo[1] + geo[2], 1.0f) < 0.5f ? 1.0f : 0.0f;
        }
        case 2: {  // checkerboard
            const int cy = static_cast<int>((y + geo[2]) * geo[1]);
            const int cx = static_cast<int>((x + geo[2]) * geo[1]);
            return ((cy + cx) & 1) ? 1.0f : 0.0f;
        }
        case 3: {  // axis-aligned cross
            const bool in_v = std::fabs(x - geo[1]) <= geo[2];
            const bool in_h = std::fabs(y - geo[0]) <= geo[2];
            return (in_v || in_h) ? 1.0f : 0.0f;
        }
        case 4: {  // ring
            const float dy = y - geo[0], dx = x - geo[1];
            const float r = std::sqrt(dy * dy + dx * dx);
            return std::fabs(r - geo[2]) <= 0.08f ? 1.0f : 0.0f;
        }
        case 5: {  // half-plane with random orientation
            return geo[0] * (x - 0.5f) + geo[1] * (y - 0.5f) > geo[2] ? 1.0f : 0.0f;
        }
        case 6: {  // filled square
            return (std::fabs(x - geo[1]) <= geo[2] && std::fabs(y - geo[0]) <= geo[2]) ? 1.0f : 0.0f;
        }
        case 7: {  // diagonal stripes
            return std::fmod((x + y) * geo[1] + geo[2], 1.0f) < 0.5f ? 1.0f : 0.0f;
        }
        case 8: {  // triangle (lower-left half of a square patch)
            const float lx = (x - geo[1] + geo[2]) / (2.0f * geo[2]);
            const float ly = (y - geo[0] + geo[2]) / (2.0f * geo[2]);
            return (lx >= 0.0f && ly >= 0.0f && lx <= 1.0f && ly <= 1.0f && ly >= lx) ? 1.0f : 0.0f;
        }
        default: {  // dotted grid
            const float fy = std::fmod((y + geo[2]) * geo[1], 1.0f);
            const float fx = std::fmod((x + geo[2]) * geo[1], 1.0f);
            return (fy < 0.4f && fx < 0.4f) ? 1.0f : 0.0f;
        }
    }
}

Tensor synth_image(int family, const std::array<int, 3>& shape, Rng& rng) {
    const int C = shape[0], H = shape[1], W = shape[2];
    Palette pal = sample_palette(rng, C);
    float geo[3] = {0, 0, 0};
    switch (family) {
        case 0:
        case 4:
            geo[0] = rng.uniform(0.3f, 0.7f);
            geo[1] = rng.uniform(0.3f, 0.7f);
            geo[2] = rng.uniform(0.18f, 0.34f);
            break;
        case 1:
        case 7:
            geo[0] = rng.uniform(0.0f, 1.0f);
            geo[1] = rng.uniform(2.0f, 4.5f);
            geo[2] = rng.uniform(0.0f, 1.0f);
            break;
        case 2:
        case 9:
            geo[1] = rng.uniform(2.0f, 4.0f);
            geo[2] = rng.uniform(0.0f, 0.5f);
            break;
        case 3:
            geo[0] = rng.uniform(0.35f, 0.65f);
            geo[1] = rng.uniform(0.35f, 0.65f);
            geo[2] = rng.uniform(0.08f, 0.16f);
            break;
        case 5:
            geo[0] = rng.uniform(-1.0f, 1.0f);
            geo[1] = rng.uniform(-1.0f, 1.0f);
            geo[2] = rng.uniform(-0.15f, 0.15f);
            break;
        case 6:
        case 8:
            geo[0] = rng.uniform(0.35f, 0.65f);
            geo[1] = rng.uniform(0.35f, 0.65f);
            geo[2] = rng.uniform(0.2f, 0.34f);
            break;
        default:
            break;
    }
    Tensor img = Tensor::zeros({C, H, W});
    for (int h = 0; h < H; ++h) {
        for (int w = 0; w < W; ++w) {
            const float m = pattern_mask(family, h, w, H, W, geo);
            for (int c = 0; c < C; ++c) {
                float v = m * pal.fg[c] + (1.0f - m) * pal.bg[c];
                v += rng.normal(0.0f, 0.02f);
                if (v < 0.05f) v = 0.05f;
                if (v > 0.95f) v = 0.95f;
                img[(static_cast<std::int64_t>(c) * H + h) * W + w] = v;
            }
        }
    }
    return img;
}

LabeledDataset synth_split(const SyntheticSpec& spec, int count, const char* tag, Rng& rng) {
    LabeledDataset ds;
    ds.shape = spec.shape;
    ds.classes = spec.classes;
    ds.split = tag;
    ds.images.reserve(static_cast<size_t>(count));
    ds.labels.reserve(static_cast<size_t>(count));
    for (int i = 0; i < count; ++i) {
        const int label = i % spec.classes;
        ds.images.push_back(synth_image(label, spec.shape, rng));
        ds.labels.push_back(label);
    }
    return ds;
}

}  // namespace

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
    if (spec.classes < 2 || spec.classes > 10)
        throw TensorError("synthetic generator supports 2..10 classes");
    if (spec.shape[1] < 8 || spec.shape[2] < 8) throw TensorError("synthetic images must be at least 8x8");
    SyntheticData out;
    Rng train_rng(Rng::derive(spec.seed, 0x5d));
    Rng test_rng(Rng::derive(spec.seed, 0x7e));
    out.train = synth_split(spec, spec.train_count, "train", train_rng);
    out.test = synth_split(spec, spec.test_count, "test", test_rng);
    return out;
}

}  // namespace noisec
