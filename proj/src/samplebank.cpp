#include "genaug/samplebank.hpp"

#include <cstdlib>
#include <string>
#include <thread>

#include <json.hpp>
#include <opencv2/imgcodecs.hpp>

#include "genaug/binio.hpp"
#include "genaug/errors.hpp"

namespace genaug {

namespace {
constexpr char kMagic[4] = {'G', 'B', 'N', 'K'};
constexpr std::uint32_t kVersion = 1;

std::size_t env_threads() {
  const char* raw = std::getenv("GENAUG_THREADS");
  if (raw == nullptr) return 1;
  const long n = std::strtol(raw, nullptr, 10);
  return n > 1 ? static_cast<std::size_t>(n) : 1;
}
}  // namespace

SampleBank::SampleBank(std::uint32_t k, std::vector<std::uint64_t> ids,
                       std::vector<Image> variants)
    : k_(k), ids_(std::move(ids)), variants_(std::move(variants)) {
  if (k_ == 0) throw ConfigError("bank needs at least one variant per source");
  if (variants_.size() != ids_.size() * k_) {
    throw ContractError("bank variant count must be n_sources * k");
  }
  if (!variants_.empty()) {
    height_ = variants_.front().height;
    width_ = variants_.front().width;
    for (const Image& img : variants_) {
      if (img.height != height_ || img.width != width_) {
        throw ContractError("bank variants must share one size");
      }
    }
  }
  index_.reserve(ids_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (!index_.emplace(ids_[i], i * k_).second) {
      throw ContractError("duplicate source id in bank");
    }
  }
}

const Image& SampleBank::variant(std::uint64_t source_id,
                                 std::uint32_t which) const {
  const auto it = index_.find(source_id);
  if (it == index_.end()) {
    throw MissingVariantError("source id " + std::to_string(source_id) +
                              " not in bank");
  }
  if (which >= k_) throw ContractError("variant index out of range");
  return variants_[it->second + which];
}

SampleBank build_bank(const LabeledDataset& dataset, const VariantGenerator& generator,
                      std::uint32_t k, std::uint64_t seed) {
  if (k < 1) throw ConfigError("bank needs at least one variant per source");
  if (dataset.size() == 0) throw ConfigError("cannot build a bank from an empty dataset");
  const std::size_t n = dataset.size();
  std::vector<std::uint64_t> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = i;

  std::vector<Image> variants(n * k, Image(8, 8));
  const auto fill_source = [&](std::size_t i) {
    for (std::uint32_t j = 0; j < k; ++j) {
      SampleRng rng(seed, RngStream::bank_build, ids[i], j);
      variants[i * k + j] = generator(dataset.latents[i], rng);
    }
  };

  const std::size_t threads = std::min(env_threads(), n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fill_source(i);
  } else {
    // Sources are independent (seeds keyed by source id), so any partition
    // yields the same bank.
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        for (std::size_t i = t; i < n; i += threads) fill_source(i);
      });
    }
    for (std::thread& th : pool) th.join();
  }
  return SampleBank(k, std::move(ids), std::move(variants));
}

const Image& sample_variant(const SampleBank& bank, std::uint64_t source_id,
                            SampleRng& rng) {
  if (!bank.contains(source_id)) {
    throw MissingVariantError("source id " + std::to_string(source_id) +
                              " not in bank");
  }
  const std::uint32_t which =
      static_cast<std::uint32_t>(rng.uniform_int(bank.k()));
  return bank.variant(source_id, which);
}

void save_bank(const SampleBank& bank, const std::filesystem::path& path) {
  if (bank.n_sources() == 0) throw ConfigError("refusing to save an empty bank");
  AtomicFileWriter writer(path);
  std::ostream& out = writer.stream();
  write_magic(out, kMagic);
  write_u32(out, kVersion);
  write_u32(out, static_cast<std::uint32_t>(bank.n_sources()));
  write_u32(out, bank.k());
  write_u16(out, static_cast<std::uint16_t>(bank.height()));
  write_u16(out, static_cast<std::uint16_t>(bank.width()));
  write_u8(out, 3);
  // Index entries hold absolute file offsets into the payload.
  const std::uint64_t header_bytes = 4 + 4 + 4 + 4 + 2 + 2 + 1;
  const std::uint64_t index_bytes = 16 * bank.n_sources();
  const std::uint64_t image_bytes = bank.height() * bank.width() * 3;
  const std::uint64_t source_bytes = image_bytes * bank.k();
  for (std::size_t i = 0; i < bank.n_sources(); ++i) {
    write_u64(out, bank.ids()[i]);
    write_u64(out, header_bytes + index_bytes + i * source_bytes);
  }
  for (std::size_t i = 0; i < bank.n_sources(); ++i) {
    for (std::uint32_t j = 0; j < bank.k(); ++j) {
      const Image& img = bank.variant(bank.ids()[i], j);
      write_bytes(out, img.pixels.data(), img.pixels.size());
    }
  }
  writer.commit();
}

SampleBank load_bank(const std::filesystem::path& path) {
  std::ifstream in = open_for_reading(path);
  expect_magic(in, kMagic, "sample bank");
  const std::uint32_t version = read_u32(in);
  if (version != kVersion) {
    throw IoError("unsupported bank version " + std::to_string(version));
  }
  const std::uint32_t n = read_u32(in);
  const std::uint32_t k = read_u32(in);
  const std::uint16_t h = read_u16(in);
  const std::uint16_t w = read_u16(in);
  const std::uint8_t channels = read_u8(in);
  if (channels != 3) throw IoError("bank must have 3 channels");
  std::vector<std::uint64_t> ids(n);
  std::vector<std::uint64_t> offsets(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    ids[i] = read_u64(in);
    offsets[i] = read_u64(in);
  }
  std::vector<Image> variants;
  variants.reserve(static_cast<std::size_t>(n) * k);
  for (std::uint32_t i = 0; i < n; ++i) {
    in.seekg(static_cast<std::streamoff>(offsets[i]));
    if (!in) throw IoError("bad payload offset in bank");
    for (std::uint32_t j = 0; j < k; ++j) {
      Image img(h, w);
      read_bytes(in, img.pixels.data(), img.pixels.size());
      variants.push_back(std::move(img));
    }
  }
  return SampleBank(k, std::move(ids), std::move(variants));
}

SampleBank import_bank(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw IoError("cannot open: " + manifest_path.string());
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad bank manifest: " + std::string(e.what()));
  }
  if (!manifest.contains("k") || !manifest.contains("sources")) {
    throw ConfigError("bank manifest needs \"k\" and \"sources\"");
  }
  const std::uint32_t k = manifest.at("k").get<std::uint32_t>();
  if (k < 1) throw ConfigError("bank manifest k must be at least 1");
  const auto base = manifest_path.parent_path();
  std::vector<std::uint64_t> ids;
  std::vector<Image> variants;
  for (const auto& source : manifest.at("sources")) {
    ids.push_back(source.at("id").get<std::uint64_t>());
    const auto& paths = source.at("variants");
    if (paths.size() != k) {
      throw ConfigError("source " + std::to_string(ids.back()) + " has " +
                        std::to_string(paths.size()) + " variants, expected " +
                        std::to_string(k));
    }
    for (const auto& rel : paths) {
      const auto img_path = base / rel.get<std::string>();
      cv::Mat bgr = cv::imread(img_path.string(), cv::IMREAD_COLOR);
      if (bgr.empty()) throw IoError("cannot read image: " + img_path.string());
      Image img(static_cast<std::size_t>(bgr.rows),
                static_cast<std::size_t>(bgr.cols));
      for (int y = 0; y < bgr.rows; ++y) {
        for (int x = 0; x < bgr.cols; ++x) {
          const cv::Vec3b px = bgr.at<cv::Vec3b>(y, x);
          img.at(y, x, 0) = px[2];
          img.at(y, x, 1) = px[1];
          img.at(y, x, 2) = px[0];
        }
      }
      variants.push_back(std::move(img));
    }
  }
  return SampleBank(k, std::move(ids), std::move(variants));
}

}  // namespace genaug
