#include "dro/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace dro::nn {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

constexpr char kMagic[4] = {'D', 'R', 'O', 'T'};
constexpr std::uint32_t kMaxRank = 8;

template <typename T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& in, const std::string& path) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T)))
    throw InputError("checkpoint " + path + " is truncated");
  return v;
}

}  // namespace

void save_tensors(const std::string& path, const std::vector<Tensor>& tensors) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write checkpoint " + path);
  out.write(kMagic, 4);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, tensors.size());
  for (const Tensor& t : tensors) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape) put<std::uint64_t>(out, d);
    out.write(reinterpret_cast<const char*>(t.data()),
              static_cast<std::streamsize>(t.size() * sizeof(double)));
  }
  if (!out) throw InputError("failed writing checkpoint " + path);
}

std::vector<Tensor> load_tensors(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open checkpoint " + path);
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw InputError(path + " is not a checkpoint file");
  const auto version = get<std::uint32_t>(in, path);
  if (version != kCheckpointVersion)
    throw InputError("checkpoint " + path + " has unsupported version " + std::to_string(version));
  const auto count = get<std::uint64_t>(in, path);
  std::vector<Tensor> tensors;
  for (std::uint64_t k = 0; k < count; ++k) {
    const auto rank = get<std::uint32_t>(in, path);
    if (rank > kMaxRank) throw InputError("checkpoint " + path + " has a corrupt tensor header");
    Shape shape(rank);
    for (auto& d : shape) d = get<std::uint64_t>(in, path);
    Tensor t(shape);
    if (!in.read(reinterpret_cast<char*>(t.data()),
                 static_cast<std::streamsize>(t.size() * sizeof(double))))
      throw InputError("checkpoint " + path + " is truncated");
    tensors.push_back(std::move(t));
  }
  return tensors;
}

}  // namespace dro::nn
