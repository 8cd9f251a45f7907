#pragma once

// ValueFields export.
//
// CSV: '#'-prefixed header lines (tool version, config hash, dims), then one
// row per (slice, node): t, x1..xk, v1..vm.
//
// Binary, all little-endian:
//   char[4]  "OSWF"
//   u32      format version (1)
//   u32      length of tool version string, then its bytes
//   u64      config hash
//   u32      k, m, n_slices
//   u32[k]   nodes per dimension
//   f64[2k]  box (lo_1, hi_1, ..., lo_k, hi_k)
//   f64      horizon
//   u32      n_time, boundary policy (0 linear-extrapolation, 1 zero-second-derivative)
//   f64      theta
//   f64[n_slices]            times
//   f64[n_slices * m * N]    data, slice-major, then mode, then node
//   u64      FNV-1a 64 checksum of every preceding byte

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>

#include "oswitch/grid.hpp"

namespace oswitch {

inline constexpr const char* kToolVersion = "oswitch 0.1.0";

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ull);

struct FieldsHeader {
    std::string tool_version;
    std::uint64_t config_hash = 0;
};

void write_fields_csv(std::ostream& out, const ValueFields& fields, const FieldsHeader& header);
void write_fields_binary(std::ostream& out, const ValueFields& fields, const FieldsHeader& header);
/// Throws FormatError on bad magic, truncation or checksum mismatch.
ValueFields read_fields_binary(std::istream& in, FieldsHeader* header = nullptr);

std::string hash_hex(std::uint64_t h);

}  // namespace oswitch
