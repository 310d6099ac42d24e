#include "genaug/serialize.hpp"

#include "genaug/binio.hpp"
#include "genaug/errors.hpp"

namespace genaug {

namespace {
constexpr char kMagic[4] = {'G', 'W', 'T', 'S'};
constexpr std::uint32_t kVersion = 1;
}  // namespace

void save_weights(const NamedTensors& tensors, const std::filesystem::path& path) {
  AtomicFileWriter writer(path);
  std::ostream& out = writer.stream();
  write_magic(out, kMagic);
  write_u32(out, kVersion);
  write_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, tensor] : tensors) {
    if (name.size() > 0xffff) throw ContractError("tensor name too long");
    write_u16(out, static_cast<std::uint16_t>(name.size()));
    write_bytes(out, name.data(), name.size());
    write_u8(out, static_cast<std::uint8_t>(tensor.shape().size()));
    for (std::size_t d : tensor.shape()) {
      write_u32(out, static_cast<std::uint32_t>(d));
    }
    for (double v : tensor.values()) write_f64(out, v);
  }
  writer.commit();
}

NamedTensors load_weights(const std::filesystem::path& path) {
  std::ifstream in = open_for_reading(path);
  expect_magic(in, kMagic, "weights");
  const std::uint32_t version = read_u32(in);
  if (version != kVersion) {
    throw IoError("unsupported weights version " + std::to_string(version));
  }
  const std::uint32_t count = read_u32(in);
  NamedTensors tensors;
  tensors.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint16_t name_len = read_u16(in);
    std::string name(name_len, '\0');
    read_bytes(in, name.data(), name_len);
    const std::uint8_t rank = read_u8(in);
    Shape shape(rank);
    std::size_t numel = 1;
    for (std::uint8_t d = 0; d < rank; ++d) {
      shape[d] = read_u32(in);
      numel *= shape[d];
    }
    std::vector<double> values(numel);
    for (double& v : values) v = read_f64(in);
    tensors.emplace_back(std::move(name), Tensor(std::move(shape), std::move(values)));
  }
  return tensors;
}

const Tensor& find_tensor(const NamedTensors& tensors, const std::string& name) {
  for (const auto& [n, t] : tensors) {
    if (n == name) return t;
  }
  throw IoError("tensor \"" + name + "\" missing from weights");
}

}  // namespace genaug
