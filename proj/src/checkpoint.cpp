#include "noisec/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace noisec {

namespace {

template <typename T>
void put_le(std::ostream& os, T v) {
    unsigned char buf[sizeof(T)];
    for (size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T get_le(std::istream& is, const char* what) {
    unsigned char buf[sizeof(T)];
    is.read(reinterpret_cast<char*>(buf), sizeof(T));
    if (is.gcount() != static_cast<std::streamsize>(sizeof(T)))
        throw FileFormatError(std::string("truncated file while reading ") + what);
    T v = 0;
    for (size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(buf[i]) << (8 * i);
    return v;
}

}  // namespace

void BinaryWriter::u8(std::uint8_t v) { put_le(os_, v); }
void BinaryWriter::u16(std::uint16_t v) { put_le(os_, v); }
void BinaryWriter::u32(std::uint32_t v) { put_le(os_, v); }
void BinaryWriter::u64(std::uint64_t v) { put_le(os_, v); }

void BinaryWriter::f32(float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    u32(bits);
}

void BinaryWriter::f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    u64(bits);
}

void BinaryWriter::bytes(const void* p, size_t n) { os_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }

void BinaryWriter::str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
}

std::uint8_t BinaryReader::u8() { return get_le<std::uint8_t>(is_, "u8"); }
std::uint16_t BinaryReader::u16() { return get_le<std::uint16_t>(is_, "u16"); }
std::uint32_t BinaryReader::u32() { return get_le<std::uint32_t>(is_, "u32"); }
std::uint64_t BinaryReader::u64() { return get_le<std::uint64_t>(is_, "u64"); }

float BinaryReader::f32() {
    std::uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

double BinaryReader::f64() {
    std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

void BinaryReader::bytes(void* p, size_t n) {
    is_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (is_.gcount() != static_cast<std::streamsize>(n)) throw FileFormatError("truncated file while reading bytes");
}

std::string BinaryReader::str(std::uint32_t max_len) {
    std::uint32_t n = u32();
    if (n > max_len) throw FileFormatError("string length out of range");
    std::string s(n, '\0');
    if (n) bytes(s.data(), n);
    return s;
}

bool BinaryReader::at_eof() {
    if (is_.peek() == std::char_traits<char>::eof()) return true;
    return false;
}

void write_checkpoint(std::ostream& os, const std::vector<NamedTensor>& tensors) {
    BinaryWriter w(os);
    w.bytes("NSCK", 4);
    w.u32(kCheckpointVersion);
    for (const auto& nt : tensors) {
        w.str(nt.name);
        w.u32(static_cast<std::uint32_t>(nt.tensor.rank()));
        for (int d : nt.tensor.shape) w.u32(static_cast<std::uint32_t>(d));
        for (float v : nt.tensor.data) w.f32(v);
    }
}

std::vector<NamedTensor> read_checkpoint(std::istream& is) {
    BinaryReader r(is);
    char magic[4];
    r.bytes(magic, 4);
    if (std::memcmp(magic, "NSCK", 4) != 0) throw FileFormatError("bad magic, not an NSCK checkpoint");
    std::uint32_t version = r.u32();
    if (version != kCheckpointVersion)
        throw FileFormatError("unsupported checkpoint version " + std::to_string(version));
    std::vector<NamedTensor> out;
    while (!r.at_eof()) {
        NamedTensor nt;
        nt.name = r.str();
        std::uint32_t rank = r.u32();
        if (rank > 8) throw FileFormatError("tensor rank out of range");
        std::vector<int> shape(rank);
        for (auto& d : shape) {
            std::uint32_t v = r.u32();
            if (v == 0 || v > (1u << 28)) throw FileFormatError("tensor dim out of range");
            d = static_cast<int>(v);
        }
        std::int64_t n = shape_numel(shape);
        std::vector<float> data(static_cast<size_t>(n));
        for (auto& v : data) v = r.f32();
        nt.tensor = Tensor::from(std::move(shape), std::move(data));
        out.push_back(std::move(nt));
    }
    return out;
}

void save_checkpoint_file(const std::string& path, const std::vector<NamedTensor>& tensors) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FileFormatError("cannot open for writing: " + path);
    write_checkpoint(os, tensors);
    if (!os) throw FileFormatError("write failed: " + path);
}

std::vector<NamedTensor> load_checkpoint_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FileFormatError("cannot open: " + path);
    return read_checkpoint(is);
}

const Tensor* find_tensor_opt(const std::vector<NamedTensor>& tensors, const std::string& name) {
    for (const auto& nt : tensors)
        if (nt.name == name) return &nt.tensor;
    return nullptr;
}

const Tensor& find_tensor(const std::vector<NamedTensor>& tensors, const std::string& name) {
    const Tensor* t = find_tensor_opt(tensors, name);
    if (!t) throw FileFormatError("missing tensor: " + name);
    return *t;
}

NamedTensor config_hash_entry(std::uint64_t hash) {
    NamedTensor nt;
    nt.name = "meta.config_hash=" + hex_u64(hash);
    nt.tensor = Tensor::scalar(0.0f);
    return nt;
}

std::uint64_t config_hash_from(const std::vector<NamedTensor>& tensors) {
    const std::string prefix = "meta.config_hash=";
    for (const auto& nt : tensors) {
        if (nt.name.rfind(prefix, 0) == 0) {
            return std::strtoull(nt.name.c_str() + prefix.size(), nullptr, 16);
        }
    }
    return 0;
}

std::uint64_t fnv1a(const void* data, size_t n) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t fnv1a(const std::string& s) { return fnv1a(s.data(), s.size()); }

std::uint64_t file_checksum(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FileFormatError("cannot open: " + path);
    std::ostringstream ss;
    ss << is.rdbuf();
    const std::string s = ss.str();
    return fnv1a(s.data(), s.size());
}

std::string hex_u64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[static_cast<size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return s;
}

}  // namespace noisec
