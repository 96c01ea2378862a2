#pragma once

#include <cstdint>
#include <string>

#include "mocorank/trainer.hpp"

namespace mocorank {

// Binary layout:
//   8 bytes  magic "MRCKPT\0\0"
//   u32      format version
//   u64      payload length
//   u64      FNV-1a checksum of the payload
//   payload  tagged sections (little-endian, doubles as raw IEEE-754 bits)
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::string& bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace mocorank
