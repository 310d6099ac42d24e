#include "genaug/dataset.hpp"

#include <string>

#include "genaug/binio.hpp"
#include "genaug/errors.hpp"

namespace genaug {

namespace {
constexpr char kMagic[4] = {'G', 'D', 'S', 'T'};
constexpr std::uint32_t kVersion = 1;
}  // namespace

LabeledDataset make_shapes_dataset(std::size_t n_classes, std::size_t n_per_class,
                                   std::size_t size, std::uint64_t seed,
                                   Split split) {
  if (n_classes < 2 || n_classes > max_shape_classes()) {
    throw ConfigError("n_classes must be in [2, " +
                      std::to_string(max_shape_classes()) + "], got " +
                      std::to_string(n_classes));
  }
  if (n_per_class < 2) {
    throw ConfigError("n_per_class must be at least 2, got " +
                      std::to_string(n_per_class));
  }
  if (size < 16) {
    throw ConfigError("image size must be at least 16, got " +
                      std::to_string(size));
  }
  LabeledDataset ds;
  ds.split = split;
  ds.n_classes = n_classes;
  const std::size_t n = n_classes * n_per_class;
  ds.images.reserve(n);
  ds.labels.reserve(n);
  ds.latents.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int class_id = static_cast<int>(i % n_classes);
    SampleRng rng(seed, RngStream::dataset_latents,
                  static_cast<std::uint64_t>(split), i);
    ShapeLatent latent = draw_latent(class_id, rng);
    ds.images.push_back(render_shape(latent, size));
    ds.labels.push_back(class_id);
    ds.latents.push_back(latent);
  }
  return ds;
}

void save_dataset(const LabeledDataset& ds, const std::filesystem::path& path) {
  if (ds.images.empty()) throw ConfigError("refusing to save an empty dataset");
  const std::size_t h = ds.images.front().height;
  const std::size_t w = ds.images.front().width;
  if (ds.labels.size() != ds.images.size() ||
      ds.latents.size() != ds.images.size()) {
    throw ContractError("dataset arrays out of sync");
  }
  AtomicFileWriter writer(path);
  std::ostream& out = writer.stream();
  write_magic(out, kMagic);
  write_u32(out, kVersion);
  write_u8(out, static_cast<std::uint8_t>(ds.split));
  write_u32(out, static_cast<std::uint32_t>(ds.images.size()));
  write_u16(out, static_cast<std::uint16_t>(h));
  write_u16(out, static_cast<std::uint16_t>(w));
  write_u8(out, 3);
  write_u32(out, static_cast<std::uint32_t>(ds.n_classes));
  for (std::size_t i = 0; i < ds.images.size(); ++i) {
    const Image& img = ds.images[i];
    if (img.height != h || img.width != w) {
      throw ContractError("dataset images must share one size");
    }
    write_u32(out, static_cast<std::uint32_t>(ds.labels[i]));
    const ShapeLatent& lt = ds.latents[i];
    write_i32(out, lt.class_id);
    write_f64(out, lt.rotation);
    write_f64(out, lt.scale);
    write_f64(out, lt.tx);
    write_f64(out, lt.ty);
    write_bytes(out, lt.fg.data(), 3);
    write_bytes(out, lt.bg.data(), 3);
    write_u64(out, lt.texture_seed);
    write_bytes(out, img.pixels.data(), img.pixels.size());
  }
  writer.commit();
}

LabeledDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in = open_for_reading(path);
  expect_magic(in, kMagic, "dataset");
  const std::uint32_t version = read_u32(in);
  if (version != kVersion) {
    throw IoError("unsupported dataset version " + std::to_string(version));
  }
  LabeledDataset ds;
  ds.split = static_cast<Split>(read_u8(in));
  const std::uint32_t n = read_u32(in);
  const std::uint16_t h = read_u16(in);
  const std::uint16_t w = read_u16(in);
  const std::uint8_t channels = read_u8(in);
  if (channels != 3) throw IoError("dataset must have 3 channels");
  ds.n_classes = read_u32(in);
  ds.images.reserve(n);
  ds.labels.reserve(n);
  ds.latents.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::uint32_t label = read_u32(in);
    if (label >= ds.n_classes) throw IoError("label out of range in dataset");
    ShapeLatent lt;
    lt.class_id = read_i32(in);
    lt.rotation = read_f64(in);
    lt.scale = read_f64(in);
    lt.tx = read_f64(in);
    lt.ty = read_f64(in);
    read_bytes(in, lt.fg.data(), 3);
    read_bytes(in, lt.bg.data(), 3);
    lt.texture_seed = read_u64(in);
    Image img(h, w);
    read_bytes(in, img.pixels.data(), img.pixels.size());
    ds.labels.push_back(static_cast<int>(label));
    ds.latents.push_back(lt);
    ds.images.push_back(std::move(img));
  }
  return ds;
}

}  // namespace genaug
