#include "loco/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace loco {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint codec assumes little-endian");

constexpr std::array<char, 8> kMagic = {'L', 'O', 'C', 'O', 'C', 'K', 'P', 'T'};
constexpr std::uint64_t kMaxExtent = std::uint64_t{1} << 32;

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in, const char* what) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) {
    throw CheckpointError(std::string("checkpoint truncated while reading ") + what);
  }
  return v;
}

}  // namespace

void write_parameters(std::ostream& out, const ParameterSet& params) {
  out.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, params.size());
  for (const auto& name : params.names()) {
    const Tensor& t = params.value(name);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t e : t.shape()) put<std::uint64_t>(out, e);
    out.write(reinterpret_cast<const char*>(t.raw()),
              static_cast<std::streamsize>(t.size() * sizeof(double)));
  }
  if (!out) throw CheckpointError("failed writing checkpoint");
}

ParameterSet read_parameters(std::istream& in) {
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
    throw CheckpointError("not a parameter checkpoint (bad magic)");
  }
  const auto version = get<std::uint32_t>(in, "version");
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto count = get<std::uint64_t>(in, "entry count");
  ParameterSet params;
  for (std::uint64_t k = 0; k < count; ++k) {
    const auto name_len = get<std::uint32_t>(in, "name length");
    if (name_len > 4096) throw CheckpointError("implausible parameter name length");
    std::string name(name_len, '\0');
    if (!in.read(name.data(), name_len)) throw CheckpointError("checkpoint truncated in name");
    const auto rank = get<std::uint32_t>(in, "rank");
    if (rank == 0 || rank > 8) throw CheckpointError("implausible rank for '" + name + "'");
    std::vector<std::size_t> shape;
    std::uint64_t total = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      const auto e = get<std::uint64_t>(in, "extent");
      if (e == 0 || e > kMaxExtent) throw CheckpointError("bad extent for '" + name + "'");
      total *= e;
      if (total > kMaxExtent) throw CheckpointError("parameter '" + name + "' too large");
      shape.push_back(static_cast<std::size_t>(e));
    }
    std::vector<double> data(static_cast<std::size_t>(total));
    if (!in.read(reinterpret_cast<char*>(data.data()),
                 static_cast<std::streamsize>(data.size() * sizeof(double)))) {
      throw CheckpointError("checkpoint truncated in values of '" + name + "'");
    }
    params.add(name, Tensor(std::move(shape), std::move(data)));
  }
  return params;
}

void save_parameters(const std::filesystem::path& path, const ParameterSet& params) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot open '" + path.string() + "' for writing");
  write_parameters(out, params);
}

ParameterSet load_parameters(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open '" + path.string() + "'");
  return read_parameters(in);
}

}  // namespace loco
