#include "genaug/config.hpp"

#include <cstdio>
#include <ctime>
#include <fstream>
#include <set>
#include <sstream>

#include "genaug/binio.hpp"
#include "genaug/errors.hpp"

namespace genaug {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::set<std::string>& allowed,
                const char* where) {
  if (!j.is_object()) {
    throw ConfigError(std::string(where) + " must be a JSON object");
  }
  for (const auto& item : j.items()) {
    if (!allowed.count(item.key())) {
      throw ConfigError(std::string("unknown key '") + item.key() + "' in " +
                        where);
    }
  }
}

template <typename T>
void read_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void read_size(const json& j, const char* key, std::size_t& out) {
  if (!j.contains(key)) return;
  const auto& v = j.at(key);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
    throw ConfigError(std::string(key) + " must be a non-negative integer");
  }
  out = v.get<std::size_t>();
}

}  // namespace

json artifact_versions() {
  return json{{"tool", kToolVersion},
              {"dataset", 1},
              {"bank", 1},
              {"weights", 1},
              {"checkpoint_meta", 1}};
}

json transform_to_json(const TransformSpec& spec) {
  json j;
  j["kind"] = transform_kind_name(spec.kind);
  j["prob"] = spec.prob;
  switch (spec.kind) {
    case TransformKind::random_resized_crop:
      j["min_scale"] = spec.min_scale;
      j["max_scale"] = spec.max_scale;
      break;
    case TransformKind::color_jitter:
      j["brightness"] = spec.brightness;
      j["contrast"] = spec.contrast;
      j["saturation"] = spec.saturation;
      j["hue"] = spec.hue;
      break;
    case TransformKind::gaussian_blur:
      j["sigma_min"] = spec.sigma_min;
      j["sigma_max"] = spec.sigma_max;
      break;
    case TransformKind::solarize:
      j["threshold"] = spec.threshold;
      break;
    case TransformKind::grayscale:
    case TransformKind::horizontal_flip:
      break;
  }
  return j;
}

TransformSpec transform_from_json(const json& j) {
  check_keys(j,
             {"kind", "prob", "min_scale", "max_scale", "brightness",
              "contrast", "saturation", "hue", "sigma_min", "sigma_max",
              "threshold"},
             "transform");
  if (!j.contains("kind")) throw ConfigError("transform needs a 'kind'");
  TransformSpec spec;
  spec.kind = transform_kind_from_name(j.at("kind").get<std::string>());
  read_if(j, "prob", spec.prob);
  read_if(j, "min_scale", spec.min_scale);
  read_if(j, "max_scale", spec.max_scale);
  read_if(j, "brightness", spec.brightness);
  read_if(j, "contrast", spec.contrast);
  read_if(j, "saturation", spec.saturation);
  read_if(j, "hue", spec.hue);
  read_if(j, "sigma_min", spec.sigma_min);
  read_if(j, "sigma_max", spec.sigma_max);
  read_if(j, "threshold", spec.threshold);
  return spec;
}

json pipeline_to_json(const PipelineSpec& spec) {
  json views1 = json::array(), views2 = json::array();
  for (const auto& t : spec.view1) views1.push_back(transform_to_json(t));
  for (const auto& t : spec.view2) views2.push_back(transform_to_json(t));
  return json{{"generative",
               {{"p0", spec.p0},
                {"on_view", generative_on_view_name(spec.on_view)}}},
              {"view1", views1},
              {"view2", views2},
              {"output_size", spec.output_size}};
}

PipelineSpec pipeline_from_json(const json& j) {
  check_keys(j, {"generative", "view1", "view2", "output_size", "preset"},
             "augmentation");
  PipelineSpec spec;
  if (j.contains("preset")) {
    std::size_t out = spec.output_size;
    read_size(j, "output_size", out);
    spec = pipeline_preset(j.at("preset").get<std::string>(), out);
  }
  if (j.contains("generative")) {
    const json& g = j.at("generative");
    check_keys(g, {"p0", "on_view"}, "augmentation.generative");
    read_if(g, "p0", spec.p0);
    if (g.contains("on_view")) {
      std::string name = g.at("on_view").get<std::string>();
      if (name == "both") name = "both_views";
      if (name == "one") name = "view1_only";
      spec.on_view = generative_on_view_from_name(name);
    }
  }
  if (j.contains("view1")) {
    spec.view1.clear();
    for (const json& t : j.at("view1")) spec.view1.push_back(transform_from_json(t));
  }
  if (j.contains("view2")) {
    spec.view2.clear();
    for (const json& t : j.at("view2")) spec.view2.push_back(transform_from_json(t));
  }
  read_size(j, "output_size", spec.output_size);
  return spec;
}

namespace {

json encoder_to_json(const EncoderSpec& spec) {
  return json{{"kind", encoder_kind_name(spec.kind)},
              {"input_size", spec.input_size},
              {"input_channels", spec.input_channels},
              {"conv_channels", spec.conv_channels},
              {"fc_dims", spec.fc_dims},
              {"mlp_dims", spec.mlp_dims}};
}

void encoder_from_json(const json& j, EncoderSpec& spec) {
  check_keys(j,
             {"kind", "input_size", "input_channels", "conv_channels",
              "fc_dims", "mlp_dims"},
             "encoder");
  if (j.contains("kind")) {
    spec.kind = encoder_kind_from_name(j.at("kind").get<std::string>());
  }
  read_size(j, "input_size", spec.input_size);
  read_size(j, "input_channels", spec.input_channels);
  read_if(j, "conv_channels", spec.conv_channels);
  read_if(j, "fc_dims", spec.fc_dims);
  read_if(j, "mlp_dims", spec.mlp_dims);
}

json heads_to_json(const HeadsSpec& heads) {
  return json{{"proj_hidden", heads.proj_hidden},
              {"proj_out", heads.proj_out},
              {"has_predictor", heads.has_predictor},
              {"pred_hidden", heads.pred_hidden}};
}

void heads_from_json(const json& j, HeadsSpec& heads) {
  check_keys(j, {"proj_hidden", "proj_out", "has_predictor", "pred_hidden"},
             "heads");
  read_size(j, "proj_hidden", heads.proj_hidden);
  read_size(j, "proj_out", heads.proj_out);
  read_if(j, "has_predictor", heads.has_predictor);
  read_size(j, "pred_hidden", heads.pred_hidden);
}

}  // namespace

json train_config_to_json(const TrainConfig& config) {
  return json{{"method", method_name(config.method)},
              {"encoder", encoder_to_json(config.encoder)},
              {"heads", heads_to_json(config.heads)},
              {"epochs", config.epochs},
              {"batch_size", config.batch_size},
              {"base_lr", config.base_lr},
              {"weight_decay", config.weight_decay},
              {"warmup_epochs", config.warmup_epochs},
              {"optimizer", optimizer_kind_name(config.optimizer)},
              {"momentum", config.momentum},
              {"seed", config.seed},
              {"augmentation", pipeline_to_json(config.pipeline)},
              {"temperature", config.temperature},
              {"m_base", config.m_base},
              {"m_final", config.m_final},
              {"queue_size", config.queue_size},
              {"lambda_offdiag", config.lambda_offdiag},
              {"loss_scale", config.loss_scale},
              {"barlow_eps", config.barlow_eps},
              {"clip_norm", config.clip_norm}};
}

TrainConfig train_config_from_json(const json& j) {
  check_keys(j,
             {"method", "encoder", "heads", "epochs", "batch_size", "base_lr",
              "weight_decay", "warmup_epochs", "optimizer", "momentum", "seed",
              "augmentation", "temperature", "m_base", "m_final", "queue_size",
              "lambda_offdiag", "loss_scale", "barlow_eps", "clip_norm"},
             "train config");
  Method method = Method::simclr;
  if (j.contains("method")) {
    method = method_from_name(j.at("method").get<std::string>());
  }
  TrainConfig config = default_train_config(method);
  if (j.contains("encoder")) encoder_from_json(j.at("encoder"), config.encoder);
  if (j.contains("heads")) heads_from_json(j.at("heads"), config.heads);
  read_size(j, "epochs", config.epochs);
  read_size(j, "batch_size", config.batch_size);
  read_if(j, "base_lr", config.base_lr);
  read_if(j, "weight_decay", config.weight_decay);
  read_size(j, "warmup_epochs", config.warmup_epochs);
  if (j.contains("optimizer")) {
    config.optimizer =
        optimizer_kind_from_name(j.at("optimizer").get<std::string>());
  }
  read_if(j, "momentum", config.momentum);
  read_if(j, "seed", config.seed);
  if (j.contains("augmentation")) {
    const json& aug = j.at("augmentation");
    json base = pipeline_to_json(config.pipeline);
    config.pipeline = pipeline_from_json(
        aug.contains("preset") ? aug : merge_json(base, aug));
  }
  read_if(j, "temperature", config.temperature);
  read_if(j, "m_base", config.m_base);
  read_if(j, "m_final", config.m_final);
  read_size(j, "queue_size", config.queue_size);
  read_if(j, "lambda_offdiag", config.lambda_offdiag);
  read_if(j, "loss_scale", config.loss_scale);
  read_if(j, "barlow_eps", config.barlow_eps);
  read_if(j, "clip_norm", config.clip_norm);

  // Keep the encoder and the augmentation output in lockstep when only one
  // side was pinned explicitly.
  const bool enc_size_set =
      j.contains("encoder") && j.at("encoder").contains("input_size");
  const bool out_size_set =
      j.contains("augmentation") && j.at("augmentation").contains("output_size");
  if (enc_size_set && !out_size_set) {
    config.pipeline.output_size = config.encoder.input_size;
  } else if (out_size_set && !enc_size_set) {
    config.encoder.input_size = config.pipeline.output_size;
  }
  return config;
}

json probe_config_to_json(const ProbeConfig& config) {
  return json{{"optimizer", optimizer_kind_name(config.optimizer)},
              {"base_lr", config.base_lr},
              {"weight_decay", config.weight_decay},
              {"batch_size", config.batch_size},
              {"warmup_epochs", config.warmup_epochs},
              {"epochs", config.epochs},
              {"momentum", config.momentum},
              {"seed", config.seed}};
}

ProbeConfig probe_config_from_json(const json& j) {
  check_keys(j,
             {"optimizer", "base_lr", "weight_decay", "batch_size",
              "warmup_epochs", "epochs", "momentum", "seed"},
             "probe config");
  ProbeConfig config;
  if (j.contains("optimizer")) {
    config.optimizer =
        optimizer_kind_from_name(j.at("optimizer").get<std::string>());
  }
  read_if(j, "base_lr", config.base_lr);
  read_if(j, "weight_decay", config.weight_decay);
  read_size(j, "batch_size", config.batch_size);
  read_size(j, "warmup_epochs", config.warmup_epochs);
  read_size(j, "epochs", config.epochs);
  read_if(j, "momentum", config.momentum);
  read_if(j, "seed", config.seed);
  return config;
}

json merge_json(const json& base, const json& overrides) {
  if (!base.is_object() || !overrides.is_object()) return overrides;
  json out = base;
  for (const auto& item : overrides.items()) {
    if (out.contains(item.key())) {
      out[item.key()] = merge_json(out[item.key()], item.value());
    } else {
      out[item.key()] = item.value();
    }
  }
  return out;
}

json load_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("malformed JSON in " + path + ": " + e.what());
  }
}

void save_json_file(const json& j, const std::string& path) {
  AtomicFileWriter writer(path);
  const std::string dump = j.dump(2);
  writer.stream().write(dump.data(), static_cast<std::streamsize>(dump.size()));
  writer.stream().put('\n');
  writer.commit();
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t config_hash(const json& resolved) {
  return fnv1a64(resolved.dump());
}

std::uint64_t train_config_hash(const TrainConfig& config) {
  return config_hash(train_config_to_json(config));
}

std::uint64_t probe_config_hash(const ProbeConfig& config) {
  return config_hash(probe_config_to_json(config));
}

std::string iso8601_utc_now() {
  const std::time_t now = std::time(nullptr);
  std::tm tm_utc{};
  gmtime_r(&now, &tm_utc);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

json manifest_to_json(const RunManifest& manifest) {
  return json{{"command", manifest.command},
              {"arguments", manifest.arguments},
              {"config_hash", hex64(manifest.config_hash)},
              {"seed", manifest.seed},
              {"inputs", manifest.inputs},
              {"outputs", manifest.outputs},
              {"started_at", manifest.started_at},
              {"finished_at", manifest.finished_at},
              {"versions", artifact_versions()}};
}

void write_manifest(const RunManifest& manifest, const std::string& path) {
  save_json_file(manifest_to_json(manifest), path);
}

}  // namespace genaug
