// Copyright 2026 The s2t Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>

#include "s2t/audio.hpp"
#include "s2t/bleu.hpp"
#include "s2t/checkpoint.hpp"
#include "s2t/config.hpp"
#include "s2t/corpus.hpp"
#include "s2t/errors.hpp"
#include "s2t/lm.hpp"
#include "s2t/search.hpp"
#include "s2t/trainer.hpp"

namespace s2t::cli {

namespace fs = std::filesystem;

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

class OutputFile {
 public:
  OutputFile(const std::string& path, std::ostream& fallback) {
    if (path.empty() || path == "-") {
      stream_ = &fallback;
      return;
    }
    file_.open(path, std::ios::trunc);
    if (!file_) throw DataError("cannot write " + path);
    stream_ = &file_;
  }
  std::ostream& operator*() { return *stream_; }

 private:
  std::ofstream file_;
  std::ostream* stream_ = nullptr;
};

std::vector<audio::FeatureSequence> read_features(const std::string& path) {
  std::vector<audio::FeatureSequence> out;
  for (auto& record : audio::read_feature_archive(path)) out.push_back(std::move(record.features));
  return out;
}

// ---- train ----

struct LoadedData {
  std::optional<Vocabulary> source_vocab;
  Vocabulary target_vocab;
  std::optional<audio::FeatureStats> stats;
  ParallelCorpus train;
  std::optional<ParallelCorpus> dev;
};

std::optional<std::size_t> vocab_limit(std::size_t n) {
  if (n == 0) return std::nullopt;
  return n;
}

void require_path(const std::string& value, const char* key) {
  if (value.empty()) throw UsageError(std::string("missing required setting ") + key);
}

// Builds a corpus from parallel sides, skipping pairs with an empty side.
ParallelCorpus build_corpus(std::vector<Source> sources, const std::vector<TokenSequence>& targets,
                            const Vocabulary& target_vocab, const std::string& source_path,
                            const std::string& target_path, bool keep_references, std::ostream& err) {
  if (sources.size() != targets.size()) {
    throw DataError("line count mismatch: " + target_path + " has " + std::to_string(targets.size()) +
                    " lines but " + source_path + " has " + std::to_string(sources.size()) + " items");
  }
  ParallelCorpus corpus;
  std::size_t skipped = 0;
  for (std::size_t i = 0; i < sources.size(); ++i) {
    const auto* features = std::get_if<audio::FeatureSequence>(&sources[i]);
    const bool empty_source = features ? features->frames == 0 : std::get<TokenIds>(sources[i]).empty();
    if (empty_source || targets[i].empty()) {
      ++skipped;
      continue;
    }
    corpus.examples.push_back({std::move(sources[i]), target_vocab.encode(targets[i])});
    if (keep_references) corpus.references.push_back({targets[i]});
  }
  if (skipped) err << "skipped " << skipped << " pairs with an empty side in " << source_path << "\n";
  return corpus;
}

std::vector<Source> text_sources(const std::vector<TokenSequence>& lines, const Vocabulary& vocab) {
  std::vector<Source> out;
  for (const auto& l : lines) out.emplace_back(vocab.encode(l));
  return out;
}

std::vector<Source> speech_sources(const std::vector<audio::FeatureSequence>& seqs,
                                   const audio::FeatureStats& stats) {
  std::vector<Source> out;
  for (const auto& s : seqs) {
    if (s.dim != stats.mean.size()) {
      throw DataError("feature dimension " + std::to_string(s.dim) + " does not match " +
                      std::to_string(stats.mean.size()));
    }
    out.emplace_back(audio::normalize_features(s, stats));
  }
  return out;
}

// Vocabularies and stats come from `existing` when resuming, else from the training data.
LoadedData load_training_data(const RunConfig& config, const Checkpoint* existing, std::ostream& err) {
  require_path(config.train_source, "train-source");
  require_path(config.train_target, "train-target");
  LoadedData data;
  const auto train_targets = read_tokenized(config.train_target);
  data.target_vocab = existing ? existing->target_vocab
                               : Vocabulary::build(train_targets, vocab_limit(config.max_target_vocab));

  std::vector<Source> train_sources;
  if (config.task == TaskKind::kText) {
    const auto lines = read_tokenized(config.train_source);
    data.source_vocab = existing ? existing->source_vocab : Vocabulary::build(lines, vocab_limit(config.max_source_vocab));
    train_sources = text_sources(lines, *data.source_vocab);
  } else {
    const auto seqs = read_features(config.train_source);
    if (seqs.empty()) throw DataError("empty feature archive " + config.train_source);
    data.stats = existing ? existing->feature_stats : audio::compute_feature_stats(seqs);
    train_sources = speech_sources(seqs, *data.stats);
  }
  data.train = build_corpus(std::move(train_sources), train_targets, data.target_vocab, config.train_source,
                            config.train_target, false, err);

  if (!config.dev_source.empty() || !config.dev_target.empty()) {
    require_path(config.dev_source, "dev-source");
    require_path(config.dev_target, "dev-target");
    const auto dev_targets = read_tokenized(config.dev_target);
    std::vector<Source> dev_sources = config.task == TaskKind::kText
                                          ? text_sources(read_tokenized(config.dev_source), *data.source_vocab)
                                          : speech_sources(read_features(config.dev_source), *data.stats);
    data.dev = build_corpus(std::move(dev_sources), dev_targets, data.target_vocab, config.dev_source,
                            config.dev_target, true, err);
  }
  return data;
}

int cmd_train(const std::string& config_path, const std::map<std::string, std::string>& overrides,
              const std::string& resume, std::ostream& out, std::ostream& err) {
  Checkpoint checkpoint;
  std::optional<Checkpoint> existing;
  RunConfig config;
  if (!resume.empty()) {
    existing = load_checkpoint(resume);
    config = existing->config;
  }
  if (!config_path.empty()) config.apply_text(RunConfig::load(config_path).to_text());
  for (const auto& [key, value] : overrides) config.set(key, value);
  config.validate();

  LoadedData data = load_training_data(config, existing ? &*existing : nullptr, err);
  if (existing) {
    checkpoint = std::move(*existing);
    checkpoint.config = config;
    const ModelConfig mc = checkpoint.model_config();
    check_parameters(mc, checkpoint.model.params);
    checkpoint.model.config = mc;
  } else {
    checkpoint = make_checkpoint(config, data.source_vocab, data.target_vocab, data.stats);
  }

  const fs::path dir = config.output_dir;
  fs::create_directories(dir);
  std::ofstream log(dir / "train.log", existing ? std::ios::app : std::ios::trunc);
  if (!log) throw DataError("cannot write " + (dir / "train.log").string());
  if (!existing) log << kTrainLogHeader << "\n";
  out << kTrainLogHeader << "\n";

  TrainOptions options;
  options.until_step = config.steps;
  options.output_dir = dir;
  options.sink = [&](const TrainLogRecord& r) {
    const auto line = r.to_line();
    out << line << "\n" << std::flush;
    log << line << "\n" << std::flush;
  };
  try {
    train(checkpoint, data.train, data.dev ? &*data.dev : nullptr, options);
  } catch (const DivergenceError& e) {
    log << "# diverged: " << e.what() << "\n";
    throw;
  }
  return kOk;
}

// ---- translate ----

struct Ensemble {
  std::vector<Checkpoint> members;
  std::vector<const Seq2Seq*> models;
};

Ensemble load_ensemble(const std::vector<std::string>& paths) {
  Ensemble e;
  for (const auto& p : paths) e.members.push_back(load_checkpoint(p));
  for (std::size_t i = 1; i < e.members.size(); ++i) {
    if (e.members[i].model.config.task != e.members[0].model.config.task) {
      throw DataError("task mismatch between " + paths[0] + " and " + paths[i]);
    }
    if (!(e.members[i].target_vocab == e.members[0].target_vocab)) {
      throw DataError("target vocabulary mismatch between " + paths[0] + " and " + paths[i]);
    }
  }
  for (const auto& m : e.members) e.models.push_back(&m.model);
  return e;
}

// Per-model sources for every input item; text inputs keep their raw tokens.
struct InputItems {
  std::vector<std::vector<Source>> per_model;
  std::vector<TokenSequence> text;
  std::vector<bool> empty;
};

InputItems read_inputs(const Ensemble& ensemble, const std::string& path) {
  InputItems items;
  const bool speech = ensemble.members[0].model.config.task == TaskKind::kSpeech;
  if (!speech) {
    std::ifstream probe(path, std::ios::binary);
    char magic[8] = {};
    if (probe.read(magic, 8) && std::string(magic, 8) == "S2TFEAT1") {
      throw DataError(path + " is a feature archive but the checkpoint is a text model");
    }
    items.text = read_tokenized(path);
    for (const auto& line : items.text) {
      std::vector<Source> sources;
      for (const auto& m : ensemble.members) sources.emplace_back(m.source_vocab->encode(line));
      items.per_model.push_back(std::move(sources));
      items.empty.push_back(line.empty());
    }
  } else {
    const auto seqs = read_features(path);
    for (const auto& s : seqs) {
      std::vector<Source> sources;
      for (const auto& m : ensemble.members) sources.push_back(speech_sources({s}, *m.feature_stats)[0]);
      items.per_model.push_back(std::move(sources));
      items.empty.push_back(s.frames == 0);
    }
  }
  return items;
}

struct TranslateFlags {
  std::vector<std::string> checkpoints;
  std::string input;
  std::string output;
  std::size_t beam = 8;
  std::string lm_path;
  double lm_weight = 0.2;
  bool rescore_only = false;
  std::size_t max_len = 0;
  bool length_normalize = false;
  std::vector<double> weights;
};

int cmd_translate(const TranslateFlags& f, std::ostream& out) {
  if (f.beam == 0) throw UsageError("--beam must be at least 1");
  const Ensemble ensemble = load_ensemble(f.checkpoints);
  std::optional<TrigramModel> lm;
  if (!f.lm_path.empty()) lm = TrigramModel::load(f.lm_path);
  const InputItems items = read_inputs(ensemble, f.input);
  const Vocabulary& vocab = ensemble.members[0].target_vocab;

  SearchOptions options;
  options.beam_size = f.beam;
  options.max_length = f.max_len;
  options.length_normalize = f.length_normalize;
  options.rescore_only = f.rescore_only;
  FusionWeights weights{f.weights, f.lm_weight};
  const bool greedy = f.beam == 1 && !lm && ensemble.models.size() == 1 && !f.length_normalize;

  OutputFile sink(f.output, out);
  for (std::size_t i = 0; i < items.per_model.size(); ++i) {
    if (items.empty[i]) {
      *sink << "\n";
      continue;
    }
    const Translation t = greedy ? greedy_decode(*ensemble.models[0], items.per_model[i][0], f.max_len)
                                 : beam_search(ensemble.models, items.per_model[i], options,
                                               lm ? &*lm : nullptr, weights);
    *sink << join_tokens(vocab.decode(t.tokens)) << "\n";
  }
  return kOk;
}

// ---- evaluate ----

int cmd_evaluate(const std::string& hyp_path, const std::vector<std::string>& ref_paths, std::ostream& out) {
  const auto hyps = read_tokenized(hyp_path);
  std::vector<std::vector<TokenSequence>> refs(hyps.size());
  for (const auto& path : ref_paths) {
    const auto lines = read_tokenized(path);
    if (lines.size() != hyps.size()) {
      throw DataError("line count mismatch: " + path + " has " + std::to_string(lines.size()) + " lines, " +
                      hyp_path + " has " + std::to_string(hyps.size()));
    }
    for (std::size_t i = 0; i < lines.size(); ++i) refs[i].push_back(lines[i]);
  }
  const BleuResult r = bleu_multi_reference(hyps, refs);
  out << "BLEU = " << fixed(r.score, 2) << "\n";
  out << "precisions =";
  for (double p : r.precisions) out << " " << fixed(100.0 * p, 2);
  out << "\n";
  out << "brevity_penalty = " << fixed(r.brevity_penalty, 4) << "\n";
  out << "length_ratio = " << fixed(r.length_ratio, 4) << " (hyp " << r.hypothesis_length << ", ref "
      << r.reference_length << ")\n";
  return kOk;
}

// ---- lm-train ----

int cmd_lm_train(const std::string& checkpoint_path, const std::string& input, const std::string& output,
                 std::ostream& out) {
  const Checkpoint checkpoint = load_checkpoint(checkpoint_path);
  std::vector<TokenIds> corpus;
  for (const auto& line : read_tokenized(input)) corpus.push_back(checkpoint.target_vocab.encode(line));
  const auto lm = train_trigram(corpus, checkpoint.target_vocab.size());
  lm.save(output);
  out << "trained trigram LM on " << corpus.size() << " sentences (" << lm.total() << " tokens)\n";
  return kOk;
}

// ---- dump-attention ----

int cmd_dump_attention(const std::string& checkpoint_path, const std::string& input, std::size_t index,
                       const std::string& reference, const std::string& output, std::ostream& out) {
  const Checkpoint checkpoint = load_checkpoint(checkpoint_path);
  Ensemble ensemble;
  ensemble.members.push_back(checkpoint);
  ensemble.models.push_back(&ensemble.members[0].model);
  const InputItems items = read_inputs(ensemble, input);
  if (index >= items.per_model.size()) {
    throw DataError("item " + std::to_string(index) + " out of range: " + input + " has " +
                    std::to_string(items.per_model.size()) + " items");
  }
  if (items.empty[index]) throw DataError("item " + std::to_string(index) + " of " + input + " is empty");
  const Source& source = items.per_model[index][0];
  const Seq2Seq& model = ensemble.members[0].model;
  const Vocabulary& vocab = checkpoint.target_vocab;

  std::vector<std::vector<double>> rows;
  std::vector<std::string> labels;
  if (!reference.empty()) {
    const auto ref = tokenize(reference);
    rows = teacher_forced_attention(model, source, vocab.encode(ref));
    labels = ref;
    labels.push_back("</s>");
  } else {
    const Translation t = greedy_decode(model, source);
    rows = t.attention;
    for (int id : t.tokens) labels.push_back(vocab.token(id));
    if (t.finished) labels.push_back("</s>");
  }

  std::vector<std::string> columns;
  const std::size_t positions = rows.empty() ? 0 : rows[0].size();
  const bool speech = model.config.task == TaskKind::kSpeech;
  const std::size_t stride = speech ? model.config.encoder().min_input_length() : 1;
  for (std::size_t i = 0; i < positions; ++i) {
    if (!speech && i < items.text[index].size()) {
      columns.push_back(items.text[index][i]);
    } else {
      columns.push_back("frame" + std::to_string(i * stride));
    }
  }

  OutputFile sink(output, out);
  *sink << "token";
  for (const auto& c : columns) *sink << "\t" << c;
  *sink << "\n";
  for (std::size_t r = 0; r < rows.size(); ++r) {
    *sink << labels[r];
    for (double w : rows[r]) *sink << "\t" << fixed(w, 10);
    *sink << "\n";
  }
  return kOk;
}

// ---- extract-features ----

int cmd_extract_features(const std::string& input_dir, const std::string& output, std::ostream& out) {
  if (!fs::is_directory(input_dir)) throw DataError("not a directory: " + input_dir);
  std::vector<fs::path> wavs;
  for (const auto& e : fs::directory_iterator(input_dir)) {
    auto ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (e.is_regular_file() && ext == ".wav") wavs.push_back(e.path());
  }
  std::sort(wavs.begin(), wavs.end());
  std::vector<audio::FeatureRecord> records;
  for (const auto& path : wavs) {
    try {
      records.push_back({path.stem().string(), audio::extract_features(audio::load_pcm_wav(path))});
    } catch (const DataError& e) {
      throw DataError(path.string() + ": " + e.what());
    }
  }
  audio::write_feature_archive(output, records);
  out << "wrote " << records.size() << " utterances to " << output << "\n";
  return kOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Attention-based sequence-to-sequence translation of text and speech"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every command");

  auto* train = app.add_subcommand("train", "Train a model; writes checkpoints and a step/loss log");
  std::string config_path, resume;
  std::map<std::string, std::string> overrides;
  train->add_option("--config", config_path, "key=value config file")->check(CLI::ExistingFile);
  train->add_option("--resume", resume, "Continue from this checkpoint")->check(CLI::ExistingFile);
  std::map<std::string, std::string> flag_values;
  for (const auto& key : RunConfig::keys()) {
    train->add_option("--" + key, flag_values[key], "Config override for '" + key + "'");
  }

  auto* translate = app.add_subcommand("translate", "Decode an input file with one or more checkpoints");
  TranslateFlags tf;
  translate->add_option("-c,--checkpoint", tf.checkpoints, "Checkpoint (repeat for an ensemble)")
      ->required()
      ->check(CLI::ExistingFile);
  translate->add_option("-i,--input", tf.input, "Text file or feature archive")->required()->check(CLI::ExistingFile);
  translate->add_option("-o,--output", tf.output, "Output file (default stdout)");
  translate->add_option("--beam", tf.beam, "Beam size (1 with one model and no LM is greedy)")
      ->capture_default_str();
  translate->add_option("--lm", tf.lm_path, "Trigram LM file")->check(CLI::ExistingFile);
  translate->add_option("--lm-weight", tf.lm_weight, "LM weight")->capture_default_str();
  translate->add_flag("--rescore-only", tf.rescore_only, "Apply the LM to finished hypotheses only");
  translate->add_option("--max-len", tf.max_len, "Maximum decoder steps (0: 2 * source length + 10)")
      ->capture_default_str();
  translate->add_flag("--length-normalize", tf.length_normalize, "Rank finished hypotheses by per-token score");
  translate->add_option("--weights", tf.weights, "Per-checkpoint ensemble weights (default uniform)");

  auto* evaluate = app.add_subcommand("evaluate", "Corpus BLEU of a hypothesis file against 1..R references");
  std::string hyp;
  std::vector<std::string> refs;
  evaluate->add_option("--hyp", hyp, "Hypothesis file")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--ref", refs, "Reference file (repeat for multiple references)")
      ->required()
      ->check(CLI::ExistingFile);

  auto* lm_train = app.add_subcommand("lm-train", "Train a trigram LM over a checkpoint's target vocabulary");
  std::string lm_checkpoint, lm_input, lm_output;
  lm_train->add_option("-c,--checkpoint", lm_checkpoint, "Checkpoint providing the vocabulary")
      ->required()
      ->check(CLI::ExistingFile);
  lm_train->add_option("-i,--input", lm_input, "Training text")->required()->check(CLI::ExistingFile);
  lm_train->add_option("-o,--output", lm_output, "LM file to write")->required();

  auto* dump = app.add_subcommand("dump-attention", "Write one item's attention matrix as TSV");
  std::string dump_checkpoint, dump_input, dump_reference, dump_output;
  std::size_t dump_index = 0;
  dump->add_option("-c,--checkpoint", dump_checkpoint, "Checkpoint")->required()->check(CLI::ExistingFile);
  dump->add_option("-i,--input", dump_input, "Text file or feature archive")->required()->check(CLI::ExistingFile);
  dump->add_option("--index", dump_index, "Item index in the input")->capture_default_str();
  dump->add_option("--reference", dump_reference, "Reference target; teacher-forced when given, greedy otherwise");
  dump->add_option("-o,--output", dump_output, "Output file (default stdout)");

  auto* extract = app.add_subcommand("extract-features", "MFCC features of a WAV directory into an archive");
  std::string wav_dir, archive;
  extract->add_option("-i,--input-dir", wav_dir, "Directory of 16-bit PCM WAV files")->required();
  extract->add_option("-o,--output", archive, "Feature archive to write")->required();

  std::vector<const char*> argv{"s2t"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (train->parsed()) {
      for (const auto& key : RunConfig::keys()) {
        if (train->count("--" + key)) overrides[key] = flag_values[key];
      }
      return cmd_train(config_path, overrides, resume, out, err);
    }
    if (translate->parsed()) return cmd_translate(tf, out);
    if (evaluate->parsed()) return cmd_evaluate(hyp, refs, out);
    if (lm_train->parsed()) return cmd_lm_train(lm_checkpoint, lm_input, lm_output, out);
    if (dump->parsed()) {
      return cmd_dump_attention(dump_checkpoint, dump_input, dump_index, dump_reference, dump_output, out);
    }
    if (extract->parsed()) return cmd_extract_features(wav_dir, archive, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const DivergenceError& e) {
    err << "diverged: " << e.what() << "\n";
    return kDivergence;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kData;
  } catch (const ShapeError& e) {
    err << "data error: " << e.what() << "\n";
    return kData;
  } catch (const fs::filesystem_error& e) {
    err << "data error: " << e.what() << "\n";
    return kData;
  }
  return kUsage;
}

}  // namespace s2t::cli
