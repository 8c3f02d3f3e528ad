#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

namespace moc {

/// CRC-32C (Castagnoli), as used in the store manifest.
std::uint32_t crc32c(std::span<const std::uint8_t> data);

}  // namespace moc
