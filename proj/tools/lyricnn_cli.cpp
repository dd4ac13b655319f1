// Command-line front end: prepare | train | predict | evaluate | gradcheck.
//
// Every command writes a run manifest next to its primary output so the
// artifact can be reproduced from the recorded inputs, seed and settings.
// Exit codes: 0 success, 1 validation/IO error, 2 numerical failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "lyricnn/lyricnn.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitNumeric = 2;

// Settings that may also come from the optional JSON config file.
// Precedence: command-line flag > config file > built-in default.
struct ConfigBinding {
  std::string key;
  CLI::Option* option = nullptr;
  std::function<void(const json&)> assign;
};

class ConfigOverlay {
 public:
  template <typename T>
  CLI::Option* bind(CLI::App* cmd, const std::string& flag, T& target, const std::string& help) {
    CLI::Option* option = cmd->add_option(flag, target, help);
    bindings_.push_back(ConfigBinding{
        flag.substr(2), option, [&target](const json& value) { target = value.get<T>(); }});
    return option;
  }

  CLI::Option* bind_flag(CLI::App* cmd, const std::string& flag, bool& target,
                         const std::string& help) {
    CLI::Option* option = cmd->add_flag(flag, target, help);
    bindings_.push_back(ConfigBinding{
        flag.substr(2), option, [&target](const json& value) { target = value.get<bool>(); }});
    return option;
  }

  void apply(const json& config) {
    for (auto& binding : bindings_) {
      if (binding.option->count() == 0 && config.contains(binding.key))
        binding.assign(config.at(binding.key));
    }
  }

  json resolved(const json& extra = json::object()) const {
    json out = extra;
    for (const auto& binding : bindings_) out[binding.key] = nullptr;
    return out;
  }

 private:
  std::vector<ConfigBinding> bindings_;
};

json load_config_file(const std::string& path) {
  if (path.empty()) return json::object();
  json config = json::parse(lyricnn::read_file(path), nullptr, false);
  if (config.is_discarded() || !config.is_object())
    throw lyricnn::ValidationError("config file must hold a JSON object: " + path);
  return config;
}

void write_manifest(const fs::path& primary_output, const std::string& command,
                    const json& inputs, const json& outputs, const json& settings,
                    const json& stats = json()) {
  json manifest;
  manifest["command"] = command;
  manifest["tool_version"] = lyricnn::kVersion;
  manifest["inputs"] = inputs;
  manifest["outputs"] = outputs;
  manifest["settings"] = settings;
  if (!stats.is_null()) manifest["stats"] = stats;
  lyricnn::atomic_write_file(primary_output.string() + ".manifest.json", manifest.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// prepare

struct PrepareArgs {
  std::string tsv_path;
  std::string taxonomy_path;
  std::string out_path;
  bool keep_negatives = false;
};

int run_prepare(const PrepareArgs& args) {
  const auto taxonomy = lyricnn::parse_source_taxonomy(lyricnn::read_file(args.taxonomy_path));
  const auto comments = lyricnn::parse_goemotions_tsv(lyricnn::read_file(args.tsv_path), taxonomy);

  std::vector<lyricnn::LabeledExample> examples;
  std::size_t kept = 0, filtered = 0;
  std::array<std::size_t, lyricnn::kEmotionCount> per_emotion{};
  for (const auto& comment : comments) {
    auto example = lyricnn::map_labels(comment, taxonomy);
    if (example) {
      ++kept;
      for (std::size_t u = 0; u < lyricnn::kEmotionCount; ++u) per_emotion[u] += example->target[u];
      examples.push_back(std::move(*example));
    } else {
      ++filtered;
      if (args.keep_negatives)
        examples.push_back(lyricnn::map_labels_keep_negatives(comment, taxonomy));
    }
  }
  if (examples.empty())
    throw lyricnn::ValidationError("prepare: no examples survived label projection");

  lyricnn::atomic_write_file(args.out_path, lyricnn::to_prepared_jsonl(examples));

  json stats;
  stats["total_rows"] = comments.size();
  stats["kept"] = kept;
  stats["filtered"] = filtered;
  stats["written"] = examples.size();
  json counts;
  for (std::size_t u = 0; u < lyricnn::kEmotionCount; ++u)
    counts[std::string(lyricnn::emotion_names()[u])] = per_emotion[u];
  stats["per_emotion"] = counts;

  write_manifest(args.out_path, "prepare",
                 json{{"tsv", args.tsv_path}, {"taxonomy", args.taxonomy_path}},
                 json{{"prepared", args.out_path}},
                 json{{"keep-negatives", args.keep_negatives}}, stats);

  std::cout << "total rows:  " << comments.size() << "\n"
            << "kept:        " << kept << "\n"
            << "filtered:    " << filtered << "\n"
            << "written:     " << examples.size() << "\n";
  for (std::size_t u = 0; u < lyricnn::kEmotionCount; ++u)
    std::cout << "  " << lyricnn::emotion_names()[u] << ": " << per_emotion[u] << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  std::string data_path;
  std::string model_path;
  std::string history_path;  // defaults to <model>.history.csv
  std::string vocab_export_path;
  lyricnn::TrainConfig train_config;
  std::size_t seq_len = 128;
  std::size_t embed_size = 64;
  std::size_t conv_filters = 100;
  std::size_t kernel_size = 4;
  std::size_t pool_size = 2;
  double dropout_p = 0.2;
  std::size_t min_freq = 2;
  std::size_t max_vocab = 20000;
};

json train_settings_json(const TrainArgs& args) {
  return json{{"learning-rate", args.train_config.learning_rate},
              {"beta1", args.train_config.beta1},
              {"beta2", args.train_config.beta2},
              {"adam-epsilon", args.train_config.adam_epsilon},
              {"batch-size", args.train_config.batch_size},
              {"epochs", args.train_config.epochs},
              {"seed", args.train_config.seed},
              {"val-fraction", args.train_config.val_fraction},
              {"seq-len", args.seq_len},
              {"embed-size", args.embed_size},
              {"filters", args.conv_filters},
              {"kernel-size", args.kernel_size},
              {"pool-size", args.pool_size},
              {"dropout", args.dropout_p},
              {"min-freq", args.min_freq},
              {"max-vocab", args.max_vocab}};
}

int run_train(const TrainArgs& args) {
  args.train_config.validate();
  const auto examples = lyricnn::parse_prepared_jsonl(lyricnn::read_file(args.data_path));
  if (examples.empty()) throw lyricnn::ValidationError("train: prepared dataset is empty");

  auto [train_examples, val_examples] =
      lyricnn::split_dataset(examples, args.train_config.val_fraction, args.train_config.seed);

  std::vector<std::vector<std::string>> corpus;
  corpus.reserve(train_examples.size());
  for (const auto& example : train_examples) corpus.push_back(lyricnn::tokenize(example.text));
  const auto vocab = lyricnn::Vocabulary::build(corpus, args.min_freq, args.max_vocab);

  lyricnn::ModelConfig config;
  config.vocab_size = vocab.size();
  config.embed_size = args.embed_size;
  config.seq_len = args.seq_len;
  config.conv_filters = args.conv_filters;
  config.kernel_size = args.kernel_size;
  config.pool_size = args.pool_size;
  config.dropout_p = args.dropout_p;
  config.validate();

  lyricnn::ModelBundle bundle{config, lyricnn::init_params(config, args.train_config.seed), vocab};

  const auto train_encoded = lyricnn::encode_examples(train_examples, vocab, config.seq_len);
  const auto val_encoded = lyricnn::encode_examples(val_examples, vocab, config.seq_len);

  std::cerr << "training on " << train_encoded.size() << " examples, validating on "
            << val_encoded.size() << " (vocab " << vocab.size() << ")\n";
  const auto history =
      lyricnn::train(train_encoded, val_encoded, bundle, args.train_config, &std::cerr);

  lyricnn::save_model(bundle, args.model_path);
  const std::string history_path =
      args.history_path.empty() ? args.model_path + ".history.csv" : args.history_path;
  lyricnn::atomic_write_file(history_path, lyricnn::history_to_csv(history));
  if (!args.vocab_export_path.empty())
    lyricnn::atomic_write_file(args.vocab_export_path, vocab.to_json().dump(2) + "\n");

  write_manifest(args.model_path, "train", json{{"data", args.data_path}},
                 json{{"model", args.model_path}, {"history", history_path}},
                 train_settings_json(args));
  std::cout << "model written to " << args.model_path << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// predict

struct PredictArgs {
  std::string model_path;
  std::string text;
  std::string songs_path;
  std::string out_path;
  std::size_t k = 3;
};

// Prediction input only needs id + lyrics; other song fields are optional.
std::vector<std::pair<std::string, std::string>> parse_predict_songs(std::string_view contents) {
  std::vector<std::pair<std::string, std::string>> songs;
  std::size_t line_no = 0;
  for (std::string_view line : lyricnn::detail::split_lines(contents)) {
    ++line_no;
    if (line.empty()) continue;
    json row = json::parse(line, nullptr, false);
    if (row.is_discarded() || !row.is_object() || !row.contains("id") || !row.contains("lyrics"))
      throw lyricnn::ValidationError("songs line " + std::to_string(line_no) +
                                     ": expected JSON object with id and lyrics");
    songs.emplace_back(row.at("id").get<std::string>(), row.at("lyrics").get<std::string>());
  }
  if (songs.empty()) throw lyricnn::ValidationError("predict: no songs in input");
  return songs;
}

json prediction_to_json(const std::string& id, const std::array<double, 8>& probs, std::size_t k) {
  const auto ranking = lyricnn::rank_emotions(probs);
  json entries = json::array();
  for (std::size_t r = 0; r < k; ++r) {
    entries.push_back(json{{"emotion", lyricnn::to_string(ranking[r])},
                           {"probability", probs[lyricnn::index_of(ranking[r])]}});
  }
  json row;
  if (!id.empty()) row["id"] = id;
  row["top"] = entries;
  return row;
}

int run_predict(const PredictArgs& args) {
  if (args.k < 1 || args.k > lyricnn::kEmotionCount)
    throw lyricnn::ValidationError("predict: k out of range [1, 8]");
  if (args.text.empty() == args.songs_path.empty())
    throw lyricnn::ValidationError("predict: pass exactly one of --text or --songs");

  const auto bundle = lyricnn::load_model(args.model_path);

  std::string out;
  if (!args.text.empty()) {
    const auto probs = lyricnn::predict_text(bundle, args.text);
    const auto ranking = lyricnn::rank_emotions(probs);
    std::ostringstream line;
    line.precision(6);
    for (std::size_t r = 0; r < args.k; ++r) {
      line << lyricnn::to_string(ranking[r]) << " "
           << probs[lyricnn::index_of(ranking[r])] << "\n";
    }
    out = line.str();
  } else {
    for (const auto& [id, lyrics] : parse_predict_songs(lyricnn::read_file(args.songs_path))) {
      out += prediction_to_json(id, lyricnn::predict_text(bundle, lyrics), args.k).dump();
      out += '\n';
    }
  }

  if (args.out_path.empty()) {
    std::cout << out;
  } else {
    lyricnn::atomic_write_file(args.out_path, out);
    write_manifest(args.out_path, "predict",
                   json{{"model", args.model_path},
                        {"songs", args.songs_path.empty() ? json() : json(args.songs_path)}},
                   json{{"predictions", args.out_path}}, json{{"k", args.k}});
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateArgs {
  std::string model_path;
  std::string songs_path;
  std::string train_data_path;  // optional, enables the prior baseline
  std::string out_path;
  std::size_t k = 3;
};

int run_evaluate(const EvaluateArgs& args) {
  if (args.k < 1 || args.k > lyricnn::kEmotionCount)
    throw lyricnn::ValidationError("evaluate: k out of range [1, 8]");

  const auto bundle = lyricnn::load_model(args.model_path);
  const auto songs = lyricnn::parse_eval_songs(lyricnn::read_file(args.songs_path));
  if (songs.empty()) throw lyricnn::ValidationError("evaluate: no songs in input");

  std::vector<lyricnn::Prediction> predictions;
  predictions.reserve(songs.size());
  for (const auto& song : songs) predictions.push_back(lyricnn::predict_song(bundle, song));

  std::optional<lyricnn::PriorBaseline> baseline;
  if (!args.train_data_path.empty()) {
    const auto train_examples =
        lyricnn::parse_prepared_jsonl(lyricnn::read_file(args.train_data_path));
    baseline = lyricnn::prior_baseline(train_examples);
  }

  const auto report =
      lyricnn::evaluate_songs(predictions, songs, args.k, baseline ? &*baseline : nullptr);
  const fs::path summary_path = lyricnn::emit_report(report, args.out_path);

  write_manifest(args.out_path, "evaluate",
                 json{{"model", args.model_path},
                      {"songs", args.songs_path},
                      {"train-data",
                       args.train_data_path.empty() ? json() : json(args.train_data_path)}},
                 json{{"report", args.out_path}, {"summary", summary_path.string()}},
                 json{{"k", args.k}});

  std::cout << "overlap@" << args.k << " = " << report.overlap_at_k;
  if (!std::isnan(report.baseline_overlap_at_k))
    std::cout << " (baseline " << report.baseline_overlap_at_k << ")";
  std::cout << " over " << report.n << " songs\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// gradcheck

struct GradcheckArgs {
  std::uint64_t seed = 1;
  double step = 1e-4;
  std::size_t vocab_size = 20;
  std::size_t embed_size = 4;
  std::size_t seq_len = 12;
  std::size_t conv_filters = 8;
  std::size_t batch_size = 4;
  bool fault_sign_flip = false;
};

int run_gradcheck(const GradcheckArgs& args) {
  lyricnn::ModelConfig config;
  config.vocab_size = args.vocab_size;
  config.embed_size = args.embed_size;
  config.seq_len = args.seq_len;
  config.conv_filters = args.conv_filters;
  config.validate();

  // Synthetic vocabulary (w0, w1, ...) and a seeded random batch.
  std::vector<std::string> tokens = {lyricnn::Vocabulary::kPadToken,
                                     lyricnn::Vocabulary::kUnkToken};
  for (std::size_t i = 2; i < args.vocab_size; ++i) tokens.push_back("w" + std::to_string(i));
  auto vocab = lyricnn::Vocabulary::from_tokens(std::move(tokens));

  lyricnn::ModelBundle bundle{config, lyricnn::init_params(config, args.seed), std::move(vocab)};

  lyricnn::SplitMix64 rng(lyricnn::derive_seed(args.seed, 0xBA7C4));
  std::vector<lyricnn::EncodedExample> batch(args.batch_size);
  for (auto& example : batch) {
    example.ids.resize(config.seq_len);
    for (auto& id : example.ids)
      id = static_cast<std::uint32_t>(rng.next_below(config.vocab_size));
    bool any = false;
    for (auto& t : example.target) any |= (t = static_cast<std::uint8_t>(rng.next() & 1));
    if (!any) example.target[0] = 1;
  }

  const double max_rel_error =
      lyricnn::gradient_check(bundle, batch, args.step, args.seed, args.fault_sign_flip);
  std::cout.precision(12);
  std::cout << "max relative error: " << max_rel_error << "\n";
  if (!(max_rel_error < 1e-4)) {
    std::cerr << "gradcheck failed: max relative error " << max_rel_error << " >= 1e-4\n";
    return kExitNumeric;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lyricnn: multi-label text-emotion classifier (1-D CNN, from scratch)"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path,
                 "optional JSON config file; flags override its values")
      ->expected(1);

  PrepareArgs prepare_args;
  ConfigOverlay prepare_overlay;
  auto* prepare = app.add_subcommand("prepare", "project a GoEmotions-format corpus onto the 8 emotions");
  prepare->add_option("--tsv", prepare_args.tsv_path, "GoEmotions TSV (text, label ids, record id)")
      ->required();
  prepare->add_option("--taxonomy", prepare_args.taxonomy_path, "emotions file, one name per line")
      ->required();
  prepare->add_option("--out", prepare_args.out_path, "output JSONL path")->required();
  prepare_overlay.bind_flag(prepare, "--keep-negatives", prepare_args.keep_negatives,
                            "keep non-matching comments as all-zero negatives");

  TrainArgs train_args;
  ConfigOverlay train_overlay;
  auto* train = app.add_subcommand("train", "train a model on prepared JSONL");
  train->add_option("--data", train_args.data_path, "prepared JSONL from `prepare`")->required();
  train->add_option("--out", train_args.model_path, "output model path")->required();
  train->add_option("--history", train_args.history_path,
                    "training history CSV (default <model>.history.csv)");
  train->add_option("--export-vocab", train_args.vocab_export_path,
                    "also write the vocabulary as JSON {token: id}");
  train_overlay.bind(train, "--learning-rate", train_args.train_config.learning_rate, "Adam learning rate");
  train_overlay.bind(train, "--beta1", train_args.train_config.beta1, "Adam beta1");
  train_overlay.bind(train, "--beta2", train_args.train_config.beta2, "Adam beta2");
  train_overlay.bind(train, "--adam-epsilon", train_args.train_config.adam_epsilon, "Adam epsilon");
  train_overlay.bind(train, "--batch-size", train_args.train_config.batch_size, "mini-batch size");
  train_overlay.bind(train, "--epochs", train_args.train_config.epochs, "training epochs");
  train_overlay.bind(train, "--seed", train_args.train_config.seed, "seed for split/init/shuffles/dropout");
  train_overlay.bind(train, "--val-fraction", train_args.train_config.val_fraction,
                     "validation fraction in (0,1)");
  train_overlay.bind(train, "--seq-len", train_args.seq_len, "token sequence length");
  train_overlay.bind(train, "--embed-size", train_args.embed_size, "embedding width");
  train_overlay.bind(train, "--filters", train_args.conv_filters, "conv filters per layer");
  train_overlay.bind(train, "--kernel-size", train_args.kernel_size, "conv kernel size");
  train_overlay.bind(train, "--pool-size", train_args.pool_size, "max-pool window");
  train_overlay.bind(train, "--dropout", train_args.dropout_p, "dropout rate");
  train_overlay.bind(train, "--min-freq", train_args.min_freq, "min token frequency for the vocabulary");
  train_overlay.bind(train, "--max-vocab", train_args.max_vocab, "max vocabulary size incl. PAD/UNK");

  PredictArgs predict_args;
  ConfigOverlay predict_overlay;
  auto* predict = app.add_subcommand("predict", "rank emotions for a lyric or a songs file");
  predict->add_option("--model", predict_args.model_path, "trained model file")->required();
  predict->add_option("--text", predict_args.text, "one lyric passed inline");
  predict->add_option("--songs", predict_args.songs_path, "JSONL with id and lyrics per line");
  predict->add_option("--out", predict_args.out_path, "write JSONL here instead of stdout");
  predict_overlay.bind(predict, "--k", predict_args.k, "how many emotions to report");

  EvaluateArgs evaluate_args;
  ConfigOverlay evaluate_overlay;
  auto* evaluate = app.add_subcommand("evaluate", "score songs against human labels (overlap@k)");
  evaluate->add_option("--model", evaluate_args.model_path, "trained model file")->required();
  evaluate->add_option("--songs", evaluate_args.songs_path,
                       "JSONL with id,title,artist,lyrics,human_labels")
      ->required();
  evaluate->add_option("--out", evaluate_args.out_path, "report CSV path")->required();
  evaluate->add_option("--train-data", evaluate_args.train_data_path,
                       "prepared JSONL for the prior baseline (optional)");
  evaluate_overlay.bind(evaluate, "--k", evaluate_args.k, "rank cutoff");

  GradcheckArgs gradcheck_args;
  ConfigOverlay gradcheck_overlay;
  auto* gradcheck =
      app.add_subcommand("gradcheck", "finite-difference check of the full-model gradients");
  gradcheck_overlay.bind(gradcheck, "--seed", gradcheck_args.seed, "seed for params and batch");
  gradcheck_overlay.bind(gradcheck, "--step", gradcheck_args.step, "central-difference step");
  gradcheck_overlay.bind(gradcheck, "--vocab-size", gradcheck_args.vocab_size, "tiny-model vocab");
  gradcheck_overlay.bind(gradcheck, "--embed-size", gradcheck_args.embed_size, "tiny-model embedding");
  gradcheck_overlay.bind(gradcheck, "--seq-len", gradcheck_args.seq_len, "tiny-model sequence length");
  gradcheck_overlay.bind(gradcheck, "--filters", gradcheck_args.conv_filters, "tiny-model filters");
  gradcheck_overlay.bind(gradcheck, "--batch", gradcheck_args.batch_size, "batch size");
  gradcheck->add_flag("--fault-sign-flip", gradcheck_args.fault_sign_flip,
                      "test hook: flip analytic gradient signs so the check fails");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitValidation;
  }

  try {
    const json config = load_config_file(config_path);
    if (prepare->parsed()) {
      prepare_overlay.apply(config);
      return run_prepare(prepare_args);
    }
    if (train->parsed()) {
      train_overlay.apply(config);
      return run_train(train_args);
    }
    if (predict->parsed()) {
      predict_overlay.apply(config);
      return run_predict(predict_args);
    }
    if (evaluate->parsed()) {
      evaluate_overlay.apply(config);
      return run_evaluate(evaluate_args);
    }
    if (gradcheck->parsed()) {
      gradcheck_overlay.apply(config);
      return run_gradcheck(gradcheck_args);
    }
  } catch (const lyricnn::NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitValidation;
}
