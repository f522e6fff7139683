#pragma once

#include <filesystem>
#include <iosfwd>
#include <stdexcept>

#include "loco/graph.hpp"

namespace loco {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Binary container: "LOCOCKPT" magic, u32 format version, u64 entry count,
/// then per entry u32 name length, name bytes, u32 rank, u64 extents and
/// row-major little-endian f64 values. Entries appear in name order.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_parameters(std::ostream& out, const ParameterSet& params);
ParameterSet read_parameters(std::istream& in);

void save_parameters(const std::filesystem::path& path, const ParameterSet& params);
ParameterSet load_parameters(const std::filesystem::path& path);

}  // namespace loco
