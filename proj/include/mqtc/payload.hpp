#pragma once

#include <array>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mqtc/encoder.hpp"
#include "mqtc/errors.hpp"
#include "mqtc/quadtree.hpp"

namespace mqtc {

// Wire format of a transmitted encoding:
//
//   offset 0   magic bytes 0x4D 0x51 0x54 0x43 ("MQTC")
//   offset 4   version byte, currently 1
//   offset 5   depth byte
//   offset 6   topology bits: depth-first preorder of the pruned tree with
//              the fixed child order, one bit per visited node above the
//              finest level (1 = expanded, recurse; 0 = leaf, stop).
//              Finest-level nodes emit no bit. Packed MSB first and
//              zero-padded to a byte boundary.
//   then       one IEEE-754 binary32 little-endian value per leaf, in the
//              same preorder leaf order.
using PayloadBytes = std::vector<std::uint8_t>;

inline constexpr std::array<std::uint8_t, 4> kPayloadMagic{0x4D, 0x51, 0x54, 0x43};
inline constexpr std::uint8_t kPayloadVersion = 1;

namespace detail {

struct BitWriter {
    PayloadBytes& out;
    unsigned bit_pos = 0;  // next free bit within the trailing byte, MSB first

    void push(bool bit) {
        if (bit_pos == 0) out.push_back(0);
        if (bit) out.back() |= static_cast<std::uint8_t>(0x80u >> bit_pos);
        bit_pos = (bit_pos + 1) % 8;
    }
};

struct BitReader {
    std::span<const std::uint8_t> bytes;
    std::size_t base = 0;  // byte offset of the first topology byte
    std::size_t bit = 0;   // bits consumed so far

    bool next() {
        const std::size_t byte_index = base + bit / 8;
        if (byte_index >= bytes.size()) {
            throw FormatError("payload truncated inside the topology section", bytes.size());
        }
        const bool v = ((bytes[byte_index] >> (7 - bit % 8)) & 1u) != 0;
        ++bit;
        return v;
    }
};

}  // namespace detail

inline PayloadBytes serialize_payload(const EncodedInnovation& enc) {
    const std::size_t depth = enc.topology().depth();
    PayloadBytes out;
    out.reserve(8 + enc.values().size() * 4);
    for (const std::uint8_t b : kPayloadMagic) out.push_back(b);
    out.push_back(kPayloadVersion);
    out.push_back(static_cast<std::uint8_t>(depth));
    detail::BitWriter writer{out};
    auto walk = [&](auto&& self, NodeId t, std::size_t level) -> void {
        if (level >= depth) return;  // finest-level nodes carry no bit
        const bool expanded = enc.topology().expanded(t);
        writer.push(expanded);
        if (expanded) {
            for (int c = 0; c < kBranchingFactor; ++c) self(self, child_node(t, c), level + 1);
        }
    };
    walk(walk, 0, 0);
    for (const double v : enc.values()) {
        const std::uint32_t word = std::bit_cast<std::uint32_t>(static_cast<float>(v));
        out.push_back(static_cast<std::uint8_t>(word & 0xFFu));
        out.push_back(static_cast<std::uint8_t>((word >> 8) & 0xFFu));
        out.push_back(static_cast<std::uint8_t>((word >> 16) & 0xFFu));
        out.push_back(static_cast<std::uint8_t>((word >> 24) & 0xFFu));
    }
    return out;
}

inline EncodedInnovation deserialize_payload(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 6) {
        throw FormatError("payload shorter than the 6-byte header", bytes.size());
    }
    for (std::size_t i = 0; i < kPayloadMagic.size(); ++i) {
        if (bytes[i] != kPayloadMagic[i]) {
            throw FormatError("bad magic byte, expected 4D 51 54 43 (\"MQTC\")", i);
        }
    }
    if (bytes[4] != kPayloadVersion) {
        throw FormatError("unsupported payload version " + std::to_string(bytes[4]) +
                              ", expected " + std::to_string(kPayloadVersion),
                          4);
    }
    const std::size_t depth = bytes[5];
    if (depth > detail::kMaxDepth) {
        throw FormatError("depth byte " + std::to_string(depth) + " exceeds the supported maximum " +
                              std::to_string(detail::kMaxDepth),
                          5);
    }

    std::vector<std::uint8_t> expansion(interior_node_count(depth), 0);
    detail::BitReader reader{bytes, 6};
    std::size_t leaves_found = 0;
    auto walk = [&](auto&& self, NodeId t, std::size_t level) -> void {
        if (level >= depth) {
            ++leaves_found;
            return;
        }
        if (reader.next()) {
            expansion[t] = 1;
            for (int c = 0; c < kBranchingFactor; ++c) self(self, child_node(t, c), level + 1);
        } else {
            ++leaves_found;
        }
    };
    walk(walk, 0, 0);

    const std::size_t topo_bytes = (reader.bit + 7) / 8;
    for (std::size_t b = reader.bit; b < topo_bytes * 8; ++b) {
        if (((bytes[6 + b / 8] >> (7 - b % 8)) & 1u) != 0) {
            throw FormatError("nonzero padding bit in the topology section", 6 + b / 8);
        }
    }

    const std::size_t values_at = 6 + topo_bytes;
    const std::size_t expected_size = values_at + 4 * leaves_found;
    if (bytes.size() < expected_size) {
        throw FormatError("payload truncated inside the value section, expected " +
                              std::to_string(expected_size) + " bytes",
                          bytes.size());
    }
    if (bytes.size() > expected_size) {
        throw FormatError("trailing bytes after the value section", expected_size);
    }

    ReproductionPoints values;
    values.reserve(leaves_found);
    for (std::size_t r = 0; r < leaves_found; ++r) {
        const std::size_t at = values_at + 4 * r;
        const std::uint32_t word = static_cast<std::uint32_t>(bytes[at]) |
                                   (static_cast<std::uint32_t>(bytes[at + 1]) << 8) |
                                   (static_cast<std::uint32_t>(bytes[at + 2]) << 16) |
                                   (static_cast<std::uint32_t>(bytes[at + 3]) << 24);
        const float v = std::bit_cast<float>(word);
        if (!(v >= -1.0f && v <= 1.0f)) {
            throw FormatError("leaf value outside [-1, 1]", at);
        }
        values.push_back(static_cast<double>(v));
    }
    return EncodedInnovation(TreeTopology(depth, std::move(expansion)), std::move(values));
}

// Rounds every reproduction value to binary32, i.e. exactly what a receiver
// reconstructs from the serialized bytes.
inline EncodedInnovation quantize_to_binary32(const EncodedInnovation& enc) {
    ReproductionPoints values;
    values.reserve(enc.values().size());
    for (const double v : enc.values()) {
        values.push_back(static_cast<double>(static_cast<float>(v)));
    }
    return EncodedInnovation(enc.topology(), std::move(values));
}

inline std::size_t payload_bit_count(const PayloadBytes& bytes) { return 8 * bytes.size(); }

}  // namespace mqtc
