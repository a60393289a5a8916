#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "noisec/tensor.hpp"

namespace noisec {

// Malformed or truncated artifact files.
struct FileFormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Little-endian primitives with explicit truncation errors.
class BinaryWriter {
public:
    explicit BinaryWriter(std::ostream& os) : os_(os) {}
    void u8(std::uint8_t v);
    void u16(std::uint16_t v);
    void u32(std::uint32_t v);
    void u64(std::uint64_t v);
    void f32(float v);
    void f64(double v);
    void bytes(const void* p, size_t n);
    void str(const std::string& s);  // u32 length + raw bytes

private:
    std::ostream& os_;
};

class BinaryReader {
public:
    explicit BinaryReader(std::istream& is) : is_(is) {}
    std::uint8_t u8();
    std::uint16_t u16();
    std::uint32_t u32();
    std::uint64_t u64();
    float f32();
    double f64();
    void bytes(void* p, size_t n);
    std::string str(std::uint32_t max_len = 1u << 20);
    bool at_eof();

private:
    std::istream& is_;
};

// Checkpoint tensor record: named f32 payload with explicit dims.
struct NamedTensor {
    std::string name;
    Tensor tensor;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

// "NSCK" container: magic, version u32, then a sequence of
// (name-length u32, name utf-8, rank u32, dims u32 x rank, f32 payload).
void write_checkpoint(std::ostream& os, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> read_checkpoint(std::istream& is);
void save_checkpoint_file(const std::string& path, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> load_checkpoint_file(const std::string& path);

const Tensor& find_tensor(const std::vector<NamedTensor>& tensors, const std::string& name);
const Tensor* find_tensor_opt(const std::vector<NamedTensor>& tensors, const std::string& name);

// Config provenance rides along as a specially named entry so the container
// format stays a plain tensor sequence.
NamedTensor config_hash_entry(std::uint64_t hash);
std::uint64_t config_hash_from(const std::vector<NamedTensor>& tensors);  // 0 when absent

// FNV-1a 64-bit, used for config hashes and artifact checksums.
std::uint64_t fnv1a(const void* data, size_t n);
std::uint64_t fnv1a(const std::string& s);
std::uint64_t file_checksum(const std::string& path);
std::string hex_u64(std::uint64_t v);

}  // namespace noisec
