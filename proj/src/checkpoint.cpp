#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>

#include "adacon/error.hpp"
#include "adacon/model.hpp"

namespace adacon {

namespace {

constexpr std::array<char, 8> kMagic = {'A', 'D', 'A', 'C', 'O', 'N', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& os, T value) {
  auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(value);
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  os.write(reinterpret_cast<const char*>(bytes.data()), bytes.size());
}

template <typename T>
T get(std::istream& is) {
  std::array<unsigned char, sizeof(T)> bytes{};
  if (!is.read(reinterpret_cast<char*>(bytes.data()), bytes.size())) throw Error("truncated checkpoint");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  return std::bit_cast<T>(bytes);
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("cannot write checkpoint: " + path.string());
  os.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(os, kVersion);

  const ModelSpec& s = params.spec;
  put<std::uint64_t>(os, static_cast<std::uint64_t>(s.input_dim));
  put<std::uint64_t>(os, s.hidden.size());
  for (Eigen::Index w : s.hidden) put<std::uint64_t>(os, static_cast<std::uint64_t>(w));
  put<std::uint64_t>(os, static_cast<std::uint64_t>(s.projection_dim));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(s.activation));

  const Eigen::VectorXd flat = params.flatten();
  put<std::uint64_t>(os, static_cast<std::uint64_t>(flat.size()));
  for (Eigen::Index k = 0; k < flat.size(); ++k) put<double>(os, flat[k]);
  if (!os) throw Error("cannot write checkpoint: " + path.string());
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open checkpoint: " + path.string());

  std::array<char, 8> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kMagic) throw Error("not a checkpoint: " + path.string());
  if (get<std::uint32_t>(is) != kVersion) throw Error("unsupported checkpoint version");

  ModelSpec spec;
  spec.input_dim = static_cast<Eigen::Index>(get<std::uint64_t>(is));
  const auto depth = get<std::uint64_t>(is);
  if (depth > 1024) throw Error("corrupt checkpoint header");
  spec.hidden.clear();
  for (std::uint64_t k = 0; k < depth; ++k) spec.hidden.push_back(static_cast<Eigen::Index>(get<std::uint64_t>(is)));
  spec.projection_dim = static_cast<Eigen::Index>(get<std::uint64_t>(is));
  const auto act = get<std::uint32_t>(is);
  if (act > static_cast<std::uint32_t>(Activation::Identity)) throw Error("corrupt checkpoint header");
  spec.activation = static_cast<Activation>(act);

  ModelParams params = init_params(spec, 0);
  const auto count = get<std::uint64_t>(is);
  if (count != static_cast<std::uint64_t>(params.parameter_count())) throw Error("checkpoint size does not match header");
  Eigen::VectorXd flat(static_cast<Eigen::Index>(count));
  for (Eigen::Index k = 0; k < flat.size(); ++k) flat[k] = get<double>(is);
  params.assign(flat);
  return params;
}

ModelParams load_checkpoint(const std::filesystem::path& path, const ModelSpec& expected) {
  ModelParams params = load_checkpoint(path);
  if (!(params.spec == expected)) throw Error("checkpoint spec does not match the expected model: " + path.string());
  return params;
}

}  // namespace adacon
