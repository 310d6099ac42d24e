#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "genaug/binio.hpp"
#include "genaug/config.hpp"
#include "genaug/dataset.hpp"
#include "genaug/errors.hpp"
#include "genaug/eval.hpp"
#include "genaug/model.hpp"
#include "genaug/pipeline.hpp"
#include "genaug/samplebank.hpp"
#include "genaug/shapes.hpp"
#include "genaug/ssl.hpp"
#include "genaug/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace genaug;

namespace {

struct Common {
  std::string config_path;
  std::uint64_t seed = 1;
  std::string out = ".";
  bool force = false;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "JSON config file (flags override it)");
  cmd->add_option("--seed", c.seed, "run seed")->capture_default_str();
  cmd->add_option("--out", c.out, "output directory")->capture_default_str();
  cmd->add_flag("--force", c.force, "overwrite existing outputs");
}

json load_config_or_empty(const Common& c) {
  return c.config_path.empty() ? json::object() : load_json_file(c.config_path);
}

void refuse_existing(const std::vector<fs::path>& outputs, bool force) {
  if (force) return;
  for (const fs::path& p : outputs) {
    if (fs::exists(p)) {
      throw ConfigError("output exists: " + p.string() + " (use --force)");
    }
  }
}

std::string file_content_id(const fs::path& path) {
  std::ifstream in = open_for_reading(path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return hex64(fnv1a64(buf.str()));
}

std::string format_double(double v, const char* fmt = "%.6f") {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

// RFC-4180 line endings; all fields here are comma- and quote-free.
void write_csv(const fs::path& path, const std::string& header,
               const std::vector<std::string>& rows) {
  AtomicFileWriter writer(path);
  writer.stream() << header << "\r\n";
  for (const std::string& row : rows) writer.stream() << row << "\r\n";
  writer.commit();
}

std::string standard_preset_for(Method m) {
  return m == Method::barlow_twins
             ? "barlow_standard"
             : std::string(method_name(m)) + "_standard";
}

std::size_t square_image_size(const LabeledDataset& ds, const char* what) {
  if (ds.size() == 0) throw ConfigError(std::string(what) + " is empty");
  const Image& img = ds.images.front();
  if (img.height != img.width) {
    throw ConfigError(std::string(what) + " images are not square");
  }
  return img.height;
}

json report_to_json(const DissimilarityReport& r) {
  return json{{"measure", measure_name(r.measure)},
              {"mean", r.mean},
              {"ci", {r.ci_lower, r.ci_upper}},
              {"n", r.n_resamples},
              {"level", r.level}};
}

RunManifest start_manifest(const std::string& command, const Common& c,
                           int argc, char** argv) {
  RunManifest m;
  m.command = command;
  m.seed = c.seed;
  m.started_at = iso8601_utc_now();
  for (int i = 1; i < argc; ++i) m.arguments.emplace_back(argv[i]);
  return m;
}

void finish_manifest(RunManifest& m, const fs::path& path) {
  m.finished_at = iso8601_utc_now();
  write_manifest(m, path);
}

// ---------------------------------------------------------------------------
// synth-data
// ---------------------------------------------------------------------------

struct SynthOpts {
  Common common;
  std::size_t classes = 10;
  std::size_t per_class = 200;
  std::size_t eval_per_class = 0;  // 0 -> per_class / 4
  std::size_t size = 32;
};

int cmd_synth_data(const SynthOpts& o, int argc, char** argv) {
  const fs::path out_dir = o.common.out;
  const fs::path train_path = out_dir / "train.gdst";
  const fs::path eval_path = out_dir / "eval.gdst";
  const fs::path cfg_path = out_dir / "synth_data_config.json";
  fs::create_directories(out_dir);
  refuse_existing({train_path, eval_path}, o.common.force);

  const std::size_t eval_per_class =
      o.eval_per_class ? o.eval_per_class : std::max<std::size_t>(2, o.per_class / 4);
  const json resolved{{"classes", o.classes},
                      {"per_class", o.per_class},
                      {"eval_per_class", eval_per_class},
                      {"size", o.size},
                      {"seed", o.common.seed}};

  RunManifest manifest = start_manifest("synth-data", o.common, argc, argv);
  manifest.config_hash = config_hash(resolved);

  const LabeledDataset train = make_shapes_dataset(
      o.classes, o.per_class, o.size, o.common.seed, Split::train);
  const LabeledDataset eval = make_shapes_dataset(
      o.classes, eval_per_class, o.size, o.common.seed, Split::eval);
  save_dataset(train, train_path);
  save_dataset(eval, eval_path);
  save_json_file(resolved, cfg_path);

  manifest.outputs = {train_path.string(), eval_path.string(), cfg_path.string()};
  finish_manifest(manifest, out_dir / "synth_data_manifest.json");
  std::cout << "wrote " << train.size() << " train / " << eval.size()
            << " eval images to " << out_dir.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// gen-bank
// ---------------------------------------------------------------------------

struct GenBankOpts {
  Common common;
  std::string dataset;
  std::uint32_t k = 10;
  std::string import_manifest;
};

int cmd_gen_bank(const GenBankOpts& o, int argc, char** argv) {
  const fs::path out_dir = o.common.out;
  const fs::path bank_path = out_dir / "bank.gbnk";
  const fs::path cfg_path = out_dir / "gen_bank_config.json";
  fs::create_directories(out_dir);
  refuse_existing({bank_path}, o.common.force);

  RunManifest manifest = start_manifest("gen-bank", o.common, argc, argv);
  json resolved;
  SampleBank bank;
  if (!o.import_manifest.empty()) {
    resolved = json{{"import", o.import_manifest}};
    manifest.inputs = {o.import_manifest};
    bank = import_bank(o.import_manifest);
  } else {
    const fs::path dataset_path =
        o.dataset.empty() ? out_dir / "train.gdst" : fs::path(o.dataset);
    const LabeledDataset dataset = load_dataset(dataset_path);
    const std::size_t size = square_image_size(dataset, "dataset");
    resolved = json{{"k", o.k},
                    {"seed", o.common.seed},
                    {"dataset", file_content_id(dataset_path)}};
    manifest.inputs = {dataset_path.string()};
    const VariantGenerator generator = [size](const ShapeLatent& latent,
                                              SampleRng& rng) {
      return oracle_regenerate(latent, rng, size);
    };
    bank = build_bank(dataset, generator, o.k, o.common.seed);
  }
  manifest.config_hash = config_hash(resolved);
  save_bank(bank, bank_path);
  save_json_file(resolved, cfg_path);

  manifest.outputs = {bank_path.string(), cfg_path.string()};
  finish_manifest(manifest, out_dir / "gen_bank_manifest.json");
  std::cout << "wrote bank of " << bank.n_variants() << " variants ("
            << bank.n_sources() << " sources x k=" << bank.k() << ") to "
            << bank_path.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// pretrain
// ---------------------------------------------------------------------------

struct PretrainOpts {
  Common common;
  std::string method = "simclr";
  std::string dataset;
  std::string bank;
  double p0 = 0.0;
  std::string on_view = "both";
  std::string strategy;
  std::size_t epochs = 0;
  std::size_t batch_size = 0;
  double base_lr = 0.0;
  std::size_t warmup_epochs = 0;
  std::size_t image_size = 0;
  std::string encoder;
};

int cmd_pretrain(const PretrainOpts& o, const CLI::App* cmd, int argc, char** argv) {
  const fs::path out_dir = o.common.out;
  const fs::path weights_path = out_dir / "checkpoint.gwts";
  const fs::path meta_path = out_dir / "checkpoint.json";
  const fs::path metrics_path = out_dir / "metrics.csv";
  const fs::path cfg_path = out_dir / "pretrain_config.json";
  fs::create_directories(out_dir);
  refuse_existing({weights_path, meta_path, metrics_path}, o.common.force);

  json overrides = json::object();
  if (cmd->count("--method")) overrides["method"] = o.method;
  if (cmd->count("--epochs")) overrides["epochs"] = o.epochs;
  if (cmd->count("--batch-size")) overrides["batch_size"] = o.batch_size;
  if (cmd->count("--base-lr")) overrides["base_lr"] = o.base_lr;
  if (cmd->count("--warmup-epochs")) overrides["warmup_epochs"] = o.warmup_epochs;
  if (cmd->count("--seed")) overrides["seed"] = o.common.seed;
  if (cmd->count("--encoder")) overrides["encoder"]["kind"] = o.encoder;
  if (cmd->count("--image-size")) {
    overrides["encoder"]["input_size"] = o.image_size;
    overrides["augmentation"]["output_size"] = o.image_size;
  }
  if (cmd->count("--p0")) overrides["augmentation"]["generative"]["p0"] = o.p0;
  if (cmd->count("--on-view")) {
    overrides["augmentation"]["generative"]["on_view"] = o.on_view;
  }
  const json merged = merge_json(load_config_or_empty(o.common), overrides);
  TrainConfig config = train_config_from_json(merged);

  const fs::path dataset_path =
      o.dataset.empty() ? out_dir / "train.gdst" : fs::path(o.dataset);
  const LabeledDataset dataset = load_dataset(dataset_path);
  const bool size_set =
      (merged.contains("encoder") && merged.at("encoder").contains("input_size")) ||
      (merged.contains("augmentation") &&
       merged.at("augmentation").contains("output_size"));
  if (!size_set) {
    const std::size_t size = square_image_size(dataset, "dataset");
    config.encoder.input_size = size;
    config.pipeline.output_size = size;
  }
  if (!o.strategy.empty()) {
    config.pipeline = strategy_pipeline(
        o.strategy, standard_preset_for(config.method), config.pipeline.p0,
        config.pipeline.on_view, config.pipeline.output_size);
  }
  validate_train_config(config);

  RunManifest manifest = start_manifest("pretrain", o.common, argc, argv);
  manifest.seed = config.seed;
  manifest.config_hash = train_config_hash(config);
  manifest.inputs = {dataset_path.string()};

  std::optional<SampleBank> bank;
  if (config.pipeline.p0 > 0.0) {
    const fs::path bank_path =
        o.bank.empty() ? out_dir / "bank.gbnk" : fs::path(o.bank);
    bank = load_bank(bank_path);
    manifest.inputs.push_back(bank_path.string());
  }

  const TrainState state = pretrain(config, dataset, bank ? &*bank : nullptr);
  save_json_file(train_config_to_json(config), cfg_path);
  save_checkpoint(state, weights_path, meta_path, manifest.config_hash);
  write_metrics_csv(state.metrics, metrics_path);

  manifest.outputs = {weights_path.string(), meta_path.string(),
                      metrics_path.string(), cfg_path.string()};
  finish_manifest(manifest, out_dir / "pretrain_manifest.json");
  std::cout << "pretrained " << method_name(config.method) << " for "
            << state.epochs_done << " epochs; final loss "
            << (state.metrics.empty() ? 0.0 : state.metrics.back().loss)
            << "; checkpoint " << weights_path.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// probe
// ---------------------------------------------------------------------------

struct ProbeOpts {
  Common common;
  std::string checkpoint;
  std::string train_config;
  std::string train_data;
  std::string eval_data;
  bool random_encoder = false;
  std::string method = "simclr";
  std::size_t epochs = 0;
  std::size_t batch_size = 0;
  double base_lr = 0.0;
};

TrainState load_checkpoint_with_config(const fs::path& weights_path,
                                       fs::path config_path) {
  if (config_path.empty()) {
    config_path = weights_path.parent_path() / "pretrain_config.json";
  }
  const TrainConfig config = train_config_from_json(load_json_file(config_path));
  fs::path meta_path = weights_path;
  meta_path.replace_extension(".json");
  return load_checkpoint(config, weights_path, meta_path,
                         train_config_hash(config));
}

int cmd_probe(const ProbeOpts& o, const CLI::App* cmd, int argc, char** argv) {
  const fs::path out_dir = o.common.out;
  const fs::path result_path = out_dir / "probe.json";
  const fs::path cfg_path = out_dir / "probe_config.json";
  fs::create_directories(out_dir);
  refuse_existing({result_path}, o.common.force);

  json overrides = json::object();
  if (cmd->count("--epochs")) overrides["epochs"] = o.epochs;
  if (cmd->count("--batch-size")) overrides["batch_size"] = o.batch_size;
  if (cmd->count("--base-lr")) overrides["base_lr"] = o.base_lr;
  if (cmd->count("--seed")) overrides["seed"] = o.common.seed;
  ProbeConfig probe_config =
      probe_config_from_json(merge_json(load_config_or_empty(o.common), overrides));

  const fs::path train_path =
      o.train_data.empty() ? out_dir / "train.gdst" : fs::path(o.train_data);
  const fs::path eval_path =
      o.eval_data.empty() ? out_dir / "eval.gdst" : fs::path(o.eval_data);
  const LabeledDataset train_ds = load_dataset(train_path);
  const LabeledDataset eval_ds = load_dataset(eval_path);
  const std::string train_id = file_content_id(train_path);
  const std::string eval_id = file_content_id(eval_path);

  RunManifest manifest = start_manifest("probe", o.common, argc, argv);
  manifest.inputs = {train_path.string(), eval_path.string()};

  std::string encoder_id;
  std::optional<TrainState> state;
  if (o.random_encoder) {
    TrainConfig config =
        default_train_config(method_from_name(o.method),
                             square_image_size(train_ds, "train data"));
    config.seed = o.common.seed;
    state = init_train_state(config);
    encoder_id = "random-frozen:" + o.method + ":" + std::to_string(o.common.seed);
  } else {
    const fs::path weights_path =
        o.checkpoint.empty() ? out_dir / "checkpoint.gwts" : fs::path(o.checkpoint);
    state = load_checkpoint_with_config(weights_path, o.train_config);
    encoder_id = "ckpt:" + hex64(train_config_hash(state->config));
    manifest.inputs.push_back(weights_path.string());
  }

  const ReprMatrix train_reps = extract_representations(
      state->model.encoder, train_ds, encoder_id, train_id);
  const ReprMatrix eval_reps = extract_representations(
      state->model.encoder, eval_ds, encoder_id, eval_id);
  const ProbeResult result = linear_probe(train_reps, train_ds.labels,
                                          eval_reps, eval_ds.labels, probe_config);

  const json resolved{{"probe", probe_config_to_json(probe_config)},
                      {"encoder", encoder_id},
                      {"train_data", train_id},
                      {"eval_data", eval_id}};
  manifest.config_hash = config_hash(resolved);
  save_json_file(resolved, cfg_path);

  json out{{"top1", result.top1},
           {"top5", result.top5 < 0.0 ? json() : json(result.top5)},
           {"n_eval", result.n_eval},
           {"config_hash", hex64(manifest.config_hash)}};
  save_json_file(out, result_path);

  manifest.outputs = {result_path.string(), cfg_path.string()};
  finish_manifest(manifest, out_dir / "probe_manifest.json");
  std::cout << out.dump(2) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// compare
// ---------------------------------------------------------------------------

struct CompareOpts {
  Common common;
  std::string checkpoint_a;
  std::string config_a;
  std::string checkpoint_b;
  std::string config_b;
  std::string reference;
  std::string method = "simclr";
  std::string eval_data;
  std::string eval_data_b;
  std::size_t n_resamples = 100;
  double level = 0.95;
};

int cmd_compare(const CompareOpts& o, int argc, char** argv) {
  const fs::path out_dir = o.common.out;
  const fs::path json_path = out_dir / "compare.json";
  const fs::path csv_path = out_dir / "compare.csv";
  fs::create_directories(out_dir);
  refuse_existing({json_path, csv_path}, o.common.force);

  if (o.checkpoint_a.empty()) throw ConfigError("--checkpoint-a is required");
  if (o.checkpoint_b.empty() == o.reference.empty()) {
    throw ConfigError("pass exactly one of --checkpoint-b and --reference");
  }

  const fs::path eval_path =
      o.eval_data.empty() ? out_dir / "eval.gdst" : fs::path(o.eval_data);
  const LabeledDataset eval_ds = load_dataset(eval_path);
  const std::string eval_id = file_content_id(eval_path);
  if (!o.eval_data_b.empty()) {
    const std::string id_b = file_content_id(o.eval_data_b);
    if (id_b != eval_id) {
      throw ConfigError("eval datasets differ: " + eval_path.string() +
                        " (id " + eval_id + ") vs " + o.eval_data_b + " (id " +
                        id_b + ")");
    }
  }

  RunManifest manifest = start_manifest("compare", o.common, argc, argv);
  manifest.inputs = {eval_path.string(), o.checkpoint_a};

  const TrainState state_a =
      load_checkpoint_with_config(o.checkpoint_a, o.config_a);
  const std::string id_a = "ckpt:" + hex64(train_config_hash(state_a.config));
  const ReprMatrix reps_a =
      extract_representations(state_a.model.encoder, eval_ds, id_a, eval_id);

  ReprMatrix reps_b;
  if (!o.checkpoint_b.empty()) {
    const TrainState state_b =
        load_checkpoint_with_config(o.checkpoint_b, o.config_b);
    const std::string id_b = "ckpt:" + hex64(train_config_hash(state_b.config));
    reps_b = extract_representations(state_b.model.encoder, eval_ds, id_b, eval_id);
    manifest.inputs.push_back(o.checkpoint_b);
  } else if (o.reference == "random-frozen") {
    TrainConfig config = default_train_config(
        method_from_name(o.method), square_image_size(eval_ds, "eval data"));
    config.seed = o.common.seed;
    const TrainState state_b = init_train_state(config);
    reps_b = extract_representations(
        state_b.model.encoder, eval_ds,
        "random-frozen:" + o.method + ":" + std::to_string(o.common.seed), eval_id);
  } else if (o.reference == "oracle-latent") {
    reps_b = latent_representations(eval_ds, eval_id);
  } else {
    throw ConfigError("unknown --reference: " + o.reference +
                      " (expected random-frozen or oracle-latent)");
  }

  const std::string pair = reps_a.encoder_id + " vs " + reps_b.encoder_id;
  const DissimilarityReport cka = bootstrap_ci(
      reps_a, reps_b, Measure::cka, o.n_resamples, o.level, o.common.seed);
  const DissimilarityReport opd = bootstrap_ci(
      reps_a, reps_b, Measure::opd, o.n_resamples, o.level, o.common.seed);

  const json resolved{{"pair", pair},
                      {"eval_data", eval_id},
                      {"n_resamples", o.n_resamples},
                      {"level", o.level},
                      {"seed", o.common.seed}};
  manifest.config_hash = config_hash(resolved);

  const json out{{"pair", pair},
                 {"cka", report_to_json(cka)},
                 {"opd", report_to_json(opd)}};
  save_json_file(out, json_path);
  write_csv(csv_path,
            "pair,cka_mean,cka_ci_lower,cka_ci_upper,opd_mean,opd_ci_lower,"
            "opd_ci_upper",
            {pair + "," + format_double(cka.mean, "%.10g") + "," +
             format_double(cka.ci_lower, "%.10g") + "," +
             format_double(cka.ci_upper, "%.10g") + "," +
             format_double(opd.mean, "%.10g") + "," +
             format_double(opd.ci_lower, "%.10g") + "," +
             format_double(opd.ci_upper, "%.10g")});

  manifest.outputs = {json_path.string(), csv_path.string()};
  finish_manifest(manifest, out_dir / "compare_manifest.json");
  std::cout << out.dump(2) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

struct SweepOpts {
  Common common;
  int rq = 1;
  std::vector<double> ps;
  std::vector<std::string> views;
  std::vector<std::string> methods;
  std::vector<std::string> strategies;
  std::vector<std::uint64_t> seeds;
  std::string dataset;
  std::string eval_data;
  std::string bank;
  std::size_t epochs = 0;
  std::size_t batch_size = 0;
  std::size_t probe_epochs = 0;
  std::size_t n_resamples = 100;
  double level = 0.95;
};

struct CellKey {
  std::string method;
  std::string strategy;
  double p = 0.0;
  std::string view;
  std::uint64_t seed = 0;

  std::string dir_name() const {
    return method + "_" + strategy + "_p" + format_double(p, "%g") + "_" +
           view + "_s" + std::to_string(seed);
  }
};

class BankLoader {
 public:
  explicit BankLoader(fs::path path) : path_(std::move(path)) {}

  const SampleBank* get() {
    if (!tried_) {
      tried_ = true;
      try {
        bank_ = load_bank(path_);
      } catch (const Error& e) {
        error_ = e.what();
      }
    }
    if (!error_.empty()) throw IoError(error_);
    return &*bank_;
  }

 private:
  fs::path path_;
  bool tried_ = false;
  std::optional<SampleBank> bank_;
  std::string error_;
};

GenerativeOnView view_from_cli(const std::string& name) {
  if (name == "one") return GenerativeOnView::view1_only;
  if (name == "both") return GenerativeOnView::both_views;
  throw ConfigError("unknown view regime: " + name + " (expected one or both)");
}

int cmd_sweep(const SweepOpts& opts, int argc, char** argv) {
  SweepOpts o = opts;
  if (o.rq < 1 || o.rq > 4) throw ConfigError("--rq must be 1, 2, 3, or 4");
  if (o.seeds.empty()) {
    o.seeds = o.rq == 3 ? std::vector<std::uint64_t>{1, 2}
                        : std::vector<std::uint64_t>{1, 2, 3};
  }
  if (o.methods.empty()) {
    o.methods = o.rq == 2 ? method_names() : std::vector<std::string>{"simclr"};
  }
  if (o.strategies.empty()) {
    o.strategies = o.rq == 4 ? strategy_names()
                             : (o.rq == 2 ? std::vector<std::string>{
                                                "baseline", "gen_standard"}
                                          : std::vector<std::string>{
                                                "gen_standard"});
  }
  if (o.ps.empty()) {
    o.ps = o.rq == 1 ? std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0}
                     : std::vector<double>{0.5};
  }
  if (o.views.empty()) {
    o.views = o.rq == 1 ? std::vector<std::string>{"one", "both"}
                        : std::vector<std::string>{"both"};
  }

  const fs::path out_dir = o.common.out;
  const fs::path csv_path = out_dir / (o.rq == 3 ? "rq3_table.csv" : "sweep.csv");
  const fs::path curve_path = out_dir / "rq1_curve.json";
  fs::create_directories(out_dir);
  std::vector<fs::path> primary{csv_path};
  if (o.rq == 1) primary.push_back(curve_path);
  refuse_existing(primary, o.common.force);

  const fs::path train_path =
      o.dataset.empty() ? out_dir / "train.gdst" : fs::path(o.dataset);
  const fs::path eval_path =
      o.eval_data.empty() ? out_dir / "eval.gdst" : fs::path(o.eval_data);
  const fs::path bank_path =
      o.bank.empty() ? out_dir / "bank.gbnk" : fs::path(o.bank);
  const LabeledDataset train_ds = load_dataset(train_path);
  const LabeledDataset eval_ds = load_dataset(eval_path);
  const std::string train_id = file_content_id(train_path);
  const std::string eval_id = file_content_id(eval_path);
  const std::size_t image_size = square_image_size(train_ds, "train data");
  if (square_image_size(eval_ds, "eval data") != image_size) {
    throw ConfigError("train and eval image sizes differ");
  }
  BankLoader bank(bank_path);

  const json base_json = load_config_or_empty(o.common);
  ProbeConfig probe_config;
  if (o.probe_epochs) probe_config.epochs = o.probe_epochs;

  const auto make_cell_config = [&](const CellKey& key) {
    json merged = base_json;
    merged["method"] = key.method;
    TrainConfig config = train_config_from_json(merged);
    config.encoder.input_size = image_size;
    if (o.epochs) {
      config.epochs = o.epochs;
      // keep the desk preset's 10% warmup ratio when shrinking the schedule
      config.warmup_epochs = std::min(config.warmup_epochs, o.epochs / 10);
    }
    if (o.batch_size) config.batch_size = o.batch_size;
    config.seed = key.seed;
    config.pipeline = strategy_pipeline(
        key.strategy, standard_preset_for(config.method), key.p,
        view_from_cli(key.view), image_size);
    if (config.pipeline.p0 == 0.0) {
      // The slot never fires; canonicalize so equivalent cells share a hash.
      config.pipeline.on_view = GenerativeOnView::both_views;
    }
    validate_train_config(config);
    return config;
  };

  const auto run_cell = [&](const TrainConfig& config, const CellKey& key) {
    const SampleBank* cell_bank =
        config.pipeline.p0 > 0.0 ? bank.get() : nullptr;
    const TrainState state = pretrain(config, train_ds, cell_bank);
    const fs::path cell_dir = out_dir / "cells" / key.dir_name();
    fs::create_directories(cell_dir);
    const std::uint64_t hash = train_config_hash(config);
    save_json_file(train_config_to_json(config), cell_dir / "pretrain_config.json");
    save_checkpoint(state, cell_dir / "checkpoint.gwts",
                    cell_dir / "checkpoint.json", hash);
    write_metrics_csv(state.metrics, cell_dir / "metrics.csv");
    const std::string encoder_id = "ckpt:" + hex64(hash);
    const ReprMatrix train_reps = extract_representations(
        state.model.encoder, train_ds, encoder_id, train_id);
    const ReprMatrix eval_reps = extract_representations(
        state.model.encoder, eval_ds, encoder_id, eval_id);
    return linear_probe(train_reps, train_ds.labels, eval_reps, eval_ds.labels,
                        probe_config);
  };

  RunManifest manifest = start_manifest("sweep", o.common, argc, argv);
  manifest.inputs = {train_path.string(), eval_path.string()};
  const json plan{{"rq", o.rq},           {"methods", o.methods},
                  {"strategies", o.strategies}, {"p", o.ps},
                  {"views", o.views},     {"seeds", o.seeds},
                  {"epochs", o.epochs},   {"batch_size", o.batch_size},
                  {"probe", probe_config_to_json(probe_config)},
                  {"base_config", base_json}};
  manifest.config_hash = config_hash(plan);
  save_json_file(plan, out_dir / "sweep_config.json");

  if (o.rq == 3) {
    if (o.seeds.size() < 2) throw ConfigError("--rq 3 needs at least 2 seeds");
    const std::string strategy = o.strategies.front();
    const std::string method = o.methods.front();
    const double p = o.ps.front();
    const std::string view = o.views.front();
    std::vector<ReprMatrix> reps;
    std::vector<std::string> names;
    for (std::size_t i = 0; i < 2; ++i) {
      const CellKey key{method, strategy, p, view, o.seeds[i]};
      const TrainConfig config = make_cell_config(key);
      const SampleBank* cell_bank =
          config.pipeline.p0 > 0.0 ? bank.get() : nullptr;
      const TrainState state = pretrain(config, train_ds, cell_bank);
      const fs::path cell_dir = out_dir / "cells" / key.dir_name();
      fs::create_directories(cell_dir);
      const std::uint64_t hash = train_config_hash(config);
      save_json_file(train_config_to_json(config),
                     cell_dir / "pretrain_config.json");
      save_checkpoint(state, cell_dir / "checkpoint.gwts",
                      cell_dir / "checkpoint.json", hash);
      write_metrics_csv(state.metrics, cell_dir / "metrics.csv");
      names.push_back("seed" + std::to_string(o.seeds[i]));
      reps.push_back(extract_representations(state.model.encoder, eval_ds,
                                             "ckpt:" + hex64(hash), eval_id));
    }
    reps.push_back(latent_representations(eval_ds, eval_id));
    names.push_back("oracle-latent");

    std::vector<std::string> rows;
    const std::size_t pairs[3][2] = {{0, 1}, {0, 2}, {1, 2}};
    for (const auto& pr : pairs) {
      const std::string pair = names[pr[0]] + "-vs-" + names[pr[1]];
      const DissimilarityReport cka =
          bootstrap_ci(reps[pr[0]], reps[pr[1]], Measure::cka, o.n_resamples,
                       o.level, o.common.seed);
      const DissimilarityReport opd =
          bootstrap_ci(reps[pr[0]], reps[pr[1]], Measure::opd, o.n_resamples,
                       o.level, o.common.seed);
      rows.push_back(pair + "," + format_double(cka.mean, "%.10g") + "," +
                     format_double(cka.ci_lower, "%.10g") + "," +
                     format_double(cka.ci_upper, "%.10g") + "," +
                     format_double(opd.mean, "%.10g") + "," +
                     format_double(opd.ci_lower, "%.10g") + "," +
                     format_double(opd.ci_upper, "%.10g"));
    }
    write_csv(csv_path,
              "pair,cka_mean,cka_ci_lower,cka_ci_upper,opd_mean,opd_ci_lower,"
              "opd_ci_upper",
              rows);
    manifest.outputs = {csv_path.string(), (out_dir / "sweep_config.json").string()};
    finish_manifest(manifest, out_dir / "sweep_manifest.json");
    std::cout << "wrote " << rows.size() << " comparison rows to "
              << csv_path.string() << "\n";
    return 0;
  }

  std::map<std::uint64_t, ProbeResult> cache;
  std::vector<std::string> rows;
  // top1 sums/counts for the RQ1 curve: [view][p index]
  std::map<std::string, std::vector<double>> curve_sum;
  std::map<std::string, std::vector<std::size_t>> curve_count;
  for (const std::string& view : o.views) {
    curve_sum[view].assign(o.ps.size(), 0.0);
    curve_count[view].assign(o.ps.size(), 0);
  }

  for (const std::string& method : o.methods) {
    for (const std::string& strategy : o.strategies) {
      for (std::size_t pi = 0; pi < o.ps.size(); ++pi) {
        for (const std::string& view : o.views) {
          for (const std::uint64_t seed : o.seeds) {
            const CellKey key{method, strategy, o.ps[pi], view, seed};
            const double effective_p = strategy == "baseline" ? 0.0 : key.p;
            const std::string prefix = method + "," + strategy + "," +
                                       format_double(effective_p, "%g") + "," +
                                       view + "," + std::to_string(seed);
            try {
              const TrainConfig config = make_cell_config(key);
              const std::uint64_t hash = train_config_hash(config);
              ProbeResult result;
              const auto hit = cache.find(hash);
              if (hit != cache.end()) {
                result = hit->second;
              } else {
                result = run_cell(config, key);
                cache.emplace(hash, result);
              }
              std::string row = prefix + "," + format_double(result.top1) + ",";
              if (result.top5 >= 0.0) row += format_double(result.top5);
              rows.push_back(row + ",ok");
              curve_sum[view][pi] += result.top1;
              curve_count[view][pi] += 1;
            } catch (const Error& e) {
              std::cerr << "cell " << key.dir_name() << " failed: " << e.what()
                        << "\n";
              rows.push_back(prefix + ",,,failed");
            }
          }
        }
      }
    }
  }

  write_csv(csv_path, "method,strategy,p,view_regime,seed,top1,top5,status",
            rows);
  manifest.outputs = {csv_path.string(), (out_dir / "sweep_config.json").string()};

  if (o.rq == 1) {
    json curves = json::object();
    for (const std::string& view : o.views) {
      json values = json::array();
      for (std::size_t pi = 0; pi < o.ps.size(); ++pi) {
        if (curve_count[view][pi] == 0) {
          values.push_back(nullptr);
        } else {
          values.push_back(curve_sum[view][pi] /
                           static_cast<double>(curve_count[view][pi]));
        }
      }
      curves[view] = values;
    }
    const json curve{{"method", o.methods.front()},
                     {"p", o.ps},
                     {"seeds", o.seeds},
                     {"top1_mean", curves}};
    save_json_file(curve, curve_path);
    manifest.outputs.push_back(curve_path.string());
  }

  finish_manifest(manifest, out_dir / "sweep_manifest.json");
  std::cout << "wrote " << rows.size() << " rows to " << csv_path.string()
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    CLI::App app{"desk-scale joint-embedding SSL laboratory"};
    app.set_version_flag("--version", kToolVersion);
    app.require_subcommand(1);
    int rc = 0;

    SynthOpts synth;
    CLI::App* synth_cmd =
        app.add_subcommand("synth-data", "generate the shapes dataset");
    add_common(synth_cmd, synth.common);
    synth_cmd->add_option("--classes", synth.classes, "number of shape classes")
        ->capture_default_str();
    synth_cmd->add_option("--per-class", synth.per_class,
                          "train images per class")
        ->capture_default_str();
    synth_cmd->add_option("--eval-per-class", synth.eval_per_class,
                          "eval images per class (default per-class / 4)");
    synth_cmd->add_option("--size", synth.size, "image side in pixels")
        ->capture_default_str();
    synth_cmd->callback([&] { rc = cmd_synth_data(synth, argc, argv); });

    GenBankOpts gen;
    CLI::App* gen_cmd =
        app.add_subcommand("gen-bank", "build the offline variant bank");
    add_common(gen_cmd, gen.common);
    gen_cmd->add_option("--dataset", gen.dataset,
                        "source dataset (default <out>/train.gdst)");
    gen_cmd->add_option("--k", gen.k, "variants per source")
        ->capture_default_str();
    gen_cmd->add_option("--import", gen.import_manifest,
                        "import variants listed in a JSON manifest");
    gen_cmd->callback([&] { rc = cmd_gen_bank(gen, argc, argv); });

    PretrainOpts pre;
    CLI::App* pre_cmd = app.add_subcommand("pretrain", "pretrain an encoder");
    add_common(pre_cmd, pre.common);
    pre_cmd->add_option("--method", pre.method, "ssl method")
        ->capture_default_str();
    pre_cmd->add_option("--dataset", pre.dataset,
                        "train dataset (default <out>/train.gdst)");
    pre_cmd->add_option("--bank", pre.bank,
                        "variant bank (default <out>/bank.gbnk)");
    pre_cmd->add_option("--p0", pre.p0, "generative substitution probability");
    pre_cmd->add_option("--on-view", pre.on_view,
                        "apply the generative slot to: one | both");
    pre_cmd->add_option("--augmentation", pre.strategy,
                        "augmentation strategy: baseline | only_generative | "
                        "gen_random_crop | gen_standard");
    pre_cmd->add_option("--epochs", pre.epochs, "training epochs");
    pre_cmd->add_option("--batch-size", pre.batch_size, "batch size");
    pre_cmd->add_option("--base-lr", pre.base_lr, "base learning rate");
    pre_cmd->add_option("--warmup-epochs", pre.warmup_epochs, "warmup epochs");
    pre_cmd->add_option("--image-size", pre.image_size,
                        "encoder input side (default: dataset size)");
    pre_cmd->add_option("--encoder", pre.encoder,
                        "encoder kind: conv_small | mlp | identity");
    pre_cmd->callback([&] { rc = cmd_pretrain(pre, pre_cmd, argc, argv); });

    ProbeOpts probe;
    CLI::App* probe_cmd =
        app.add_subcommand("probe", "linear-probe a frozen encoder");
    add_common(probe_cmd, probe.common);
    probe_cmd->add_option("--checkpoint", probe.checkpoint,
                          "checkpoint weights (default <out>/checkpoint.gwts)");
    probe_cmd->add_option("--train-config", probe.train_config,
                          "training config JSON (default: sibling "
                          "pretrain_config.json)");
    probe_cmd->add_option("--train-data", probe.train_data,
                          "probe train split (default <out>/train.gdst)");
    probe_cmd->add_option("--eval-data", probe.eval_data,
                          "probe eval split (default <out>/eval.gdst)");
    probe_cmd->add_flag("--random-encoder", probe.random_encoder,
                        "probe a freshly initialized encoder instead of a "
                        "checkpoint");
    probe_cmd->add_option("--method", probe.method,
                          "method preset for --random-encoder")
        ->capture_default_str();
    probe_cmd->add_option("--epochs", probe.epochs, "probe epochs");
    probe_cmd->add_option("--batch-size", probe.batch_size, "probe batch size");
    probe_cmd->add_option("--base-lr", probe.base_lr, "probe base lr");
    probe_cmd->callback([&] { rc = cmd_probe(probe, probe_cmd, argc, argv); });

    SweepOpts sweep;
    CLI::App* sweep_cmd =
        app.add_subcommand("sweep", "run an experiment grid");
    add_common(sweep_cmd, sweep.common);
    sweep_cmd->add_option("--rq", sweep.rq, "research question: 1, 2, 3, or 4")
        ->required();
    sweep_cmd->add_option("--p", sweep.ps, "generative probabilities")
        ->delimiter(',');
    sweep_cmd->add_option("--views", sweep.views, "view regimes: one, both")
        ->delimiter(',');
    sweep_cmd->add_option("--methods", sweep.methods, "ssl methods")
        ->delimiter(',');
    sweep_cmd->add_option("--strategies", sweep.strategies,
                          "augmentation strategies")
        ->delimiter(',');
    sweep_cmd->add_option("--seeds", sweep.seeds, "run seeds")->delimiter(',');
    sweep_cmd->add_option("--dataset", sweep.dataset,
                          "train dataset (default <out>/train.gdst)");
    sweep_cmd->add_option("--eval-data", sweep.eval_data,
                          "eval dataset (default <out>/eval.gdst)");
    sweep_cmd->add_option("--bank", sweep.bank,
                          "variant bank (default <out>/bank.gbnk)");
    sweep_cmd->add_option("--epochs", sweep.epochs, "override training epochs");
    sweep_cmd->add_option("--batch-size", sweep.batch_size,
                          "override batch size");
    sweep_cmd->add_option("--probe-epochs", sweep.probe_epochs,
                          "override probe epochs");
    sweep_cmd->add_option("--n-resamples", sweep.n_resamples,
                          "bootstrap resamples (rq 3)")
        ->capture_default_str();
    sweep_cmd->add_option("--level", sweep.level, "bootstrap CI level (rq 3)")
        ->capture_default_str();
    sweep_cmd->callback([&] { rc = cmd_sweep(sweep, argc, argv); });

    CompareOpts cmp;
    CLI::App* cmp_cmd = app.add_subcommand(
        "compare", "CKA/OPD dissimilarity between two encoders");
    add_common(cmp_cmd, cmp.common);
    cmp_cmd->add_option("--checkpoint-a", cmp.checkpoint_a, "first checkpoint");
    cmp_cmd->add_option("--config-a", cmp.config_a,
                        "first training config JSON");
    cmp_cmd->add_option("--checkpoint-b", cmp.checkpoint_b, "second checkpoint");
    cmp_cmd->add_option("--config-b", cmp.config_b,
                        "second training config JSON");
    cmp_cmd->add_option("--reference", cmp.reference,
                        "reference encoder: random-frozen | oracle-latent");
    cmp_cmd->add_option("--method", cmp.method,
                        "method preset for random-frozen")
        ->capture_default_str();
    cmp_cmd->add_option("--eval-data", cmp.eval_data,
                        "eval dataset (default <out>/eval.gdst)");
    cmp_cmd->add_option("--eval-data-b", cmp.eval_data_b,
                        "second eval dataset (must hold identical data)");
    cmp_cmd->add_option("--n-resamples", cmp.n_resamples, "bootstrap resamples")
        ->capture_default_str();
    cmp_cmd->add_option("--level", cmp.level, "bootstrap CI level")
        ->capture_default_str();
    cmp_cmd->callback([&] { rc = cmd_compare(cmp, argc, argv); });

    try {
      app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
      const int code = app.exit(e);
      return code == 0 ? 0 : 2;
    }
    return rc;
  } catch (const NumericalAbort& e) {
    std::cerr << "numerical abort at step " << e.step << " (lr " << e.lr
              << "): " << e.what() << "\nrecent losses:";
    for (double l : e.loss_trace) std::cerr << " " << l;
    std::cerr << "\n";
    return 4;
  } catch (const NumericError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 4;
  } catch (const DegenerateInputError& e) {
    std::cerr << "degenerate input: " << e.what() << "\n";
    return 4;
  } catch (const NormalizationError& e) {
    std::cerr << "normalization error: " << e.what() << "\n";
    return 4;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return 3;
  } catch (const MissingVariantError& e) {
    std::cerr << "missing variant: " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
}
