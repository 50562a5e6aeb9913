#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "maskd/tensor.hpp"

namespace maskd {

// Binary checkpoint container, little-endian throughout:
//   magic "MKD1", version u32, then entries of
//   (name_len u32, name bytes, rank u32, dims u32 x rank,
//    dtype u8 {0: f32, 1: f64}, raw payload).
// f64 round-trips are bit-exact; f32 is a lossy opt-in storage mode and is
// widened back to f64 on load.

struct CheckpointEntry {
    std::string name;
    Tensor tensor;
};

class CheckpointError : public std::runtime_error {
public:
    CheckpointError(const std::string& msg, std::size_t offset)
        : std::runtime_error(msg + " (byte offset " + std::to_string(offset) + ")"),
          offset_(offset) {}
    std::size_t offset() const { return offset_; }

private:
    std::size_t offset_;
};

void save_checkpoint(const std::vector<CheckpointEntry>& entries, const std::string& path,
                     bool as_f32 = false);

std::vector<CheckpointEntry> load_checkpoint(const std::string& path);

// Parse from memory (the file loader and the fuzz tests share this path).
std::vector<CheckpointEntry> parse_checkpoint(const std::uint8_t* bytes, std::size_t size);

const Tensor* find_entry(const std::vector<CheckpointEntry>& entries, const std::string& name);

// FNV-1a over the raw bytes of the tensors, in order; used to verify that
// frozen parameters stay bit-identical through a training stage.
std::uint64_t hash_tensors(const std::vector<Tensor>& tensors);

}  // namespace maskd
