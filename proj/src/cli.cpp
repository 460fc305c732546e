// Copyright 2026 The twtr Authors
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

#include "twtr/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iterator>
#include <memory>
#include <sstream>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "twtr/checkpoint.hpp"
#include "twtr/corpus.hpp"
#include "twtr/demo_corpus.hpp"
#include "twtr/encoders.hpp"
#include "twtr/event_structures.hpp"
#include "twtr/model.hpp"
#include "twtr/synthesis.hpp"
#include "twtr/train_eval.hpp"

namespace twtr {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Settings

Settings::Settings() {
  values_ = {
      {"model.d_model", "512"},
      {"model.aoa_layers", "2"},
      {"model.aoa_heads", "4"},
      {"model.fuse_layers", "1"},
      {"model.fuse_heads", "4"},
      {"model.ffn_mult", "2"},
      {"model.max_text_tokens", "64"},
      {"model.max_sequence", "64"},
      {"model.text_positions", "true"},
      {"model.threshold", "0.5"},
      {"encoder.kind", "stub"},
      {"encoder.d_t", "768"},
      {"encoder.seed", "17"},
      {"tagger.kind", "stub"},
      {"tagger.table", ""},
      {"train.learning_rate", "0.0005"},
      {"train.batch_size", "16"},
      {"train.reference_fan_in", "64"},
      {"train.epochs", "50"},
      {"train.max_frames", "18"},
      {"train.patience", "10"},
      {"train.target_accuracy", ""},
      {"synth.top_k", "10"},
      {"synth.policy", "prefer_argument"},
      {"synth.evidence_sentences", "1"},
      {"ablate.frames", "1,6,18"},
  };
}

void Settings::merge_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputNotFound("input not found: " + path.string());
  std::string line;
  std::size_t line_no = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(path.string() + ":" + std::to_string(line_no) + ": expected key = value");
    }
    set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

void Settings::set(const std::string& key, const std::string& value) {
  auto it = values_.find(key);
  if (it == values_.end()) throw Error("unknown setting '" + key + "'");
  it->second = value;
}

const std::string& Settings::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw Error("unknown setting '" + key + "'");
  return it->second;
}

namespace {

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  std::istringstream in(text);
  T v{};
  in >> v;
  if (!in || !in.eof()) throw Error("setting '" + key + "' is not a valid number: '" + text + "'");
  return v;
}

}  // namespace

int Settings::get_int(const std::string& key) const { return parse_number<int>(key, get(key)); }
std::uint64_t Settings::get_u64(const std::string& key) const { return parse_number<std::uint64_t>(key, get(key)); }
double Settings::get_double(const std::string& key) const { return parse_number<double>(key, get(key)); }

bool Settings::get_bool(const std::string& key) const {
  const auto& v = get(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw Error("setting '" + key + "' is not a boolean: '" + v + "'");
}

std::uint64_t Settings::hash() const { return fnv1a64(json(values_).dump()); }

namespace {

// ---------------------------------------------------------------------------
// Helpers

std::string hex(std::uint64_t v) {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << v;
  return s.str();
}

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string file_id(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return "";
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return hex(fnv1a64(bytes));
}

void require_file(const fs::path& path) {
  if (!fs::exists(path)) throw InputNotFound("input not found: " + path.string());
}

std::vector<std::size_t> parse_counts(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) out.push_back(parse_number<std::size_t>("frame count", part));
  if (out.empty()) throw Error("empty frame count list");
  return out;
}

struct Run {
  std::string command;
  Settings settings;
  std::optional<std::uint64_t> seed;
  std::vector<fs::path> inputs;
  std::vector<fs::path> outputs;
  std::string started = utc_now();
  std::ostream& out;
  std::ostream& err;

  /// Writes the run manifest beside the first output, or into the cache
  /// directory when the command has no file output.
  void write_manifest(int exit_code) const {
    json j;
    j["command"] = command;
    j["exit_code"] = exit_code;
    j["config_hash"] = hex(settings.hash());
    j["settings"] = settings.values();
    if (seed) j["seed"] = *seed;
    j["inputs"] = json::array();
    for (const auto& p : inputs) j["inputs"].push_back({{"path", p.string()}, {"id", file_id(p)}});
    j["outputs"] = json::array();
    for (const auto& p : outputs) j["outputs"].push_back({{"path", p.string()}, {"id", file_id(p)}});
    j["started_at"] = started;
    j["finished_at"] = utc_now();
    fs::path target;
    if (!outputs.empty() && exit_code == 0) {
      target = outputs.front().string() + ".manifest.json";
    } else {
      const char* cache = std::getenv("TWTR_CACHE_DIR");
      const fs::path dir = cache && *cache ? fs::path(cache) : fs::path(".twtr_cache");
      fs::create_directories(dir);
      target = dir / (command + "-" + hex(fnv1a64(j["inputs"].dump() + j["config_hash"].dump())) + ".manifest.json");
    }
    std::ofstream f(target);
    if (!f) throw Error("cannot write manifest " + target.string());
    f << j.dump(2) << '\n';
  }
};

EncoderConfig encoder_config(const Settings& s, const Corpus& corpus) {
  EncoderConfig e;
  e.kind = s.get("encoder.kind");
  if (e.kind != "stub") throw Error("unsupported text encoder '" + e.kind + "'");
  e.d_t = s.get_int("encoder.d_t");
  e.seed = s.get_u64("encoder.seed");
  e.n_patches = corpus.n_patches();
  e.d_v = corpus.d_v();
  return e;
}

std::unique_ptr<EventTagger> tagger_from(const Settings& s) {
  return make_tagger(s.get("tagger.kind"), s.get("tagger.table"));
}

ModelConfig model_config(const Settings& s, const EncoderConfig& e, std::uint64_t seed) {
  ModelConfig m;
  m.d_model = s.get_int("model.d_model");
  m.aoa_layers = s.get_int("model.aoa_layers");
  m.aoa_heads = s.get_int("model.aoa_heads");
  m.fuse_layers = s.get_int("model.fuse_layers");
  m.fuse_heads = s.get_int("model.fuse_heads");
  m.ffn_mult = s.get_int("model.ffn_mult");
  m.max_text_tokens = s.get_int("model.max_text_tokens");
  m.max_sequence = s.get_int("model.max_sequence");
  m.text_positions = s.get_bool("model.text_positions");
  m.threshold = s.get_double("model.threshold");
  m.d_text = e.d_t;
  m.d_visual = e.d_v;
  m.n_patches = e.n_patches;
  m.seed = seed;
  m.validate();
  return m;
}

TrainConfig train_config(const Settings& s, std::uint64_t seed) {
  TrainConfig t;
  t.learning_rate = s.get_double("train.learning_rate");
  t.batch_size = static_cast<std::size_t>(s.get_int("train.batch_size"));
  t.reference_fan_in = static_cast<std::size_t>(s.get_int("train.reference_fan_in"));
  t.epochs = static_cast<std::size_t>(s.get_int("train.epochs"));
  t.max_frames = static_cast<std::size_t>(s.get_int("train.max_frames"));
  t.patience = static_cast<std::size_t>(s.get_int("train.patience"));
  if (!s.get("train.target_accuracy").empty()) t.target_train_accuracy = s.get_double("train.target_accuracy");
  t.seed = seed;
  t.validate();
  return t;
}

Corpus load_corpus(const fs::path& path, std::ostream& err) {
  auto r = ingest(path);
  for (const auto& issue : r.rejections) {
    err << "rejected line " << issue.line << " (" << issue.post_id << "): " << issue.reason << '\n';
  }
  return std::move(r.corpus);
}

EncodedSet encode_subset(const Corpus& corpus, const std::vector<std::string>& ids, const FeatureBuilder& fb) {
  return encode_posts(corpus.subset(ids), fb);
}

// ---------------------------------------------------------------------------
// Commands

int cmd_demo(Run& run, const fs::path& out_path, const DemoCorpusConfig& config) {
  run.seed = config.seed;
  serialize(make_demo_corpus(config), out_path);
  run.outputs = {out_path};
  run.out << "records\t" << config.n_posts << '\n';
  return kExitOk;
}

int cmd_ingest(Run& run, const fs::path& input, const fs::path& out_path, bool drop_unverified, bool keep_dup,
               bool keep_unverifiable) {
  run.inputs = {input};
  auto r = ingest(input, IngestOptions{drop_unverified});
  for (const auto& issue : r.rejections) {
    run.err << "rejected line " << issue.line << " (" << issue.post_id << "): " << issue.reason << '\n';
  }
  Corpus corpus = std::move(r.corpus);
  const std::size_t read = corpus.size();
  if (!keep_dup) corpus = dedup_by_video(corpus);
  const std::size_t after_dedup = corpus.size();
  std::size_t removed = 0;
  if (!keep_unverifiable) {
    const auto tagger = tagger_from(run.settings);
    auto f = filter_verifiable(corpus, *tagger);
    for (const auto& issue : f.removed) run.err << "removed " << issue.post_id << ": " << issue.reason << '\n';
    for (const auto& issue : f.flagged) run.err << "flagged " << issue.post_id << ": " << issue.reason << '\n';
    removed = f.removed.size() + f.flagged.size();
    corpus = std::move(f.corpus);
  }
  serialize(corpus, out_path);
  run.outputs = {out_path};
  run.out << "read\t" << read << "\nrejected\t" << r.rejections.size() << "\nduplicate_videos\t"
          << read - after_dedup << "\nunverifiable\t" << removed << "\nkept\t" << corpus.size() << '\n';
  return kExitOk;
}

int cmd_split(Run& run, const fs::path& corpus_path, std::uint64_t seed, const fs::path& out_path) {
  run.inputs = {corpus_path};
  run.seed = seed;
  const auto corpus = load_corpus(corpus_path, run.err);
  const auto s = split(corpus, seed);
  save_split(s, out_path);
  run.outputs = {out_path};
  run.out << "train\t" << s.train.size() << "\nval\t" << s.val.size() << "\ntest\t" << s.test.size() << '\n';
  return kExitOk;
}

int cmd_synthesize(Run& run, const fs::path& corpus_path, const std::string& mix_text, std::uint64_t seed,
                   const fs::path& out_path, fs::path report_path) {
  run.inputs = {corpus_path};
  run.seed = seed;
  if (report_path.empty()) report_path = out_path.string() + ".report.jsonl";
  const auto corpus = load_corpus(corpus_path, run.err);
  const auto mix = parse_mix(mix_text);
  const auto tagger = tagger_from(run.settings);
  const auto masker = StubMaskedLM::covid_default();
  const auto nli = StubNLI::covid_default();
  const StubSentenceEmbedder sentences(encoder_config(run.settings, corpus));
  const PooledFrameEmbedder videos;
  SynthesisConfig sc;
  sc.top_k = static_cast<std::size_t>(run.settings.get_int("synth.top_k"));
  const auto& policy = run.settings.get("synth.policy");
  if (policy == "prefer_argument") {
    sc.policy = SpanPolicy::prefer_argument;
  } else if (policy == "random") {
    sc.policy = SpanPolicy::random;
  } else {
    throw Error("unknown span policy '" + policy + "'");
  }
  sc.seed = seed;
  sc.evidence_sentences = static_cast<std::size_t>(run.settings.get_int("synth.evidence_sentences"));
  const Generators g{*tagger, masker, nli, sentences, videos, corpus_vocabulary(corpus), sc};

  SynthesisReport report;
  Corpus result;
  try {
    result = build_balanced_dataset(corpus, g, mix, seed, &report);
  } catch (const SynthesisShortfall&) {
    report.write_jsonl(report_path);
    run.outputs = {report_path};
    throw;
  }
  serialize(result, out_path);
  report.write_jsonl(report_path);
  run.outputs = {out_path, report_path};
  std::map<Taxonomy, std::size_t> counts;
  for (const auto& p : result.posts()) ++counts[p.taxonomy];
  for (const auto& [t, n] : counts) run.out << to_string(t) << '\t' << n << '\n';
  return kExitOk;
}

int cmd_train(Run& run, const fs::path& corpus_path, const fs::path& split_path, std::uint64_t seed,
              const fs::path& out_path, const fs::path& curve_path) {
  run.inputs = {corpus_path, split_path};
  run.seed = seed;
  require_file(split_path);
  const auto corpus = load_corpus(corpus_path, run.err);
  const auto parts = load_split(split_path);
  const auto enc = encoder_config(run.settings, corpus);
  const auto model = model_config(run.settings, enc, seed);
  const auto training = train_config(run.settings, seed);
  const StubTextEncoder text(enc);
  const auto tagger = tagger_from(run.settings);
  const FeatureBuilder fb(text, *tagger, model.max_text_tokens);

  const auto result = train(encode_subset(corpus, parts.train, fb), encode_subset(corpus, parts.val, fb),
                            ModelParameters::initialize(model), training);
  save_checkpoint(out_path, Checkpoint{result.params, enc});
  run.outputs = {out_path};
  if (!curve_path.empty()) {
    std::ofstream f(curve_path);
    if (!f) throw Error("cannot write " + curve_path.string());
    f << "epoch\ttrain_loss\ttrain_accuracy\tval_accuracy\n" << std::setprecision(10);
    for (const auto& e : result.curve) {
      f << e.epoch << '\t' << e.train_loss << '\t' << e.train_accuracy << '\t';
      if (e.val_accuracy) f << *e.val_accuracy;
      f << '\n';
    }
    run.outputs.push_back(curve_path);
  }
  run.out << "epochs\t" << result.curve.size() << "\nbest_epoch\t" << result.best_epoch << "\ncheckpoint\t"
          << file_id(out_path) << '\n';
  return kExitOk;
}

json eval_json(const EvalResult& r) {
  json per;
  for (const auto& [t, b] : r.per_taxonomy) {
    per[std::string(to_string(t))] = {{"count", b.count}, {"correct", b.correct}};
  }
  return {{"accuracy", r.accuracy},
          {"precision", r.precision},
          {"recall", r.recall},
          {"f1", r.f1},
          {"explanation_accuracy", r.explanation_accuracy},
          {"confusion",
           {{"tp", r.confusion.tp}, {"fp", r.confusion.fp}, {"fn", r.confusion.fn}, {"tn", r.confusion.tn}}},
          {"per_taxonomy", per}};
}

int cmd_evaluate(Run& run, const fs::path& ckpt_path, const fs::path& corpus_path, const fs::path& split_path,
                 const std::string& part, const fs::path& out_path) {
  run.inputs = {ckpt_path, corpus_path};
  const auto ck = load_checkpoint(ckpt_path);
  const auto corpus = load_corpus(corpus_path, run.err);
  std::vector<std::string> ids;
  if (split_path.empty()) {
    for (const auto& p : corpus.posts()) ids.push_back(p.post_id);
  } else {
    require_file(split_path);
    run.inputs.push_back(split_path);
    const auto parts = load_split(split_path);
    if (part == "train") {
      ids = parts.train;
    } else if (part == "val") {
      ids = parts.val;
    } else if (part == "test") {
      ids = parts.test;
    } else {
      throw Error("unknown split part '" + part + "'");
    }
  }
  if (ids.empty()) throw EmptyEvaluation("evaluation split is empty");
  const StubTextEncoder text(ck.encoder);
  const auto tagger = tagger_from(run.settings);
  const FeatureBuilder fb(text, *tagger, ck.params.config().max_text_tokens);
  const auto max_frames = train_config(run.settings, 0).max_frames;
  const auto r = evaluate(ck.params, cap_frames(encode_subset(corpus, ids, fb), max_frames));
  const auto j = eval_json(r);
  if (!out_path.empty()) {
    std::ofstream f(out_path);
    if (!f) throw Error("cannot write " + out_path.string());
    f << j.dump(2) << '\n';
    run.outputs = {out_path};
  }
  run.out << std::fixed << std::setprecision(4) << "records\t" << r.confusion.total() << "\naccuracy\t" << r.accuracy
          << "\nf1\t" << r.f1 << "\nexplanation_accuracy\t" << r.explanation_accuracy << '\n';
  return kExitOk;
}

int cmd_explain(Run& run, const fs::path& ckpt_path, const fs::path& corpus_path, const std::string& post_id) {
  run.inputs = {ckpt_path, corpus_path};
  const auto ck = load_checkpoint(ckpt_path);
  const auto corpus = load_corpus(corpus_path, run.err);
  const auto* post = corpus.find(post_id);
  if (!post) throw InputNotFound("input not found: post '" + post_id + "'");
  const StubTextEncoder text(ck.encoder);
  const auto tagger = tagger_from(run.settings);
  const FeatureBuilder fb(text, *tagger, ck.params.config().max_text_tokens);
  const auto max_frames = static_cast<std::size_t>(run.settings.get_int("train.max_frames"));
  const auto v = forward(fb.build(*post, max_frames), ck.params);
  run.out << std::fixed << std::setprecision(6) << "post_id\t" << post_id << "\nlabel\t" << to_string(v.predicted_label)
          << "\np_inconsistent\t" << v.p_inconsistent << "\nc_vs\t" << v.scores.c_vs << "\nc_vc\t" << v.scores.c_vc
          << "\nc_cs\t" << v.scores.c_cs << "\nexplanation\t" << to_string(v.explanation) << '\n';
  return kExitOk;
}

int cmd_ablate(Run& run, const std::string& kind, const fs::path& corpus_path, const fs::path& split_path,
               std::uint64_t seed, const fs::path& out_path) {
  run.inputs = {corpus_path, split_path};
  run.seed = seed;
  require_file(split_path);
  const auto corpus = load_corpus(corpus_path, run.err);
  const auto parts = load_split(split_path);
  const auto enc = encoder_config(run.settings, corpus);
  const StubTextEncoder text(enc);
  const auto tagger = tagger_from(run.settings);
  Experiment e;
  e.model = model_config(run.settings, enc, seed);
  e.training = train_config(run.settings, seed);
  const FeatureBuilder fb(text, *tagger, e.model.max_text_tokens);
  e.train = encode_subset(corpus, parts.train, fb);
  e.val = encode_subset(corpus, parts.val, fb);
  e.test = encode_subset(corpus, parts.test, fb);
  if (e.test.empty()) throw EmptyEvaluation("test split is empty");

  AblationTable table;
  std::string first = "model";
  if (kind == "frames") {
    table = ablate_frames(e, parse_counts(run.settings.get("ablate.frames")));
    first = "frames";
  } else if (kind == "modules") {
    table = ablate_modules(e);
  } else if (kind == "pairs") {
    table = ablate_modality_pairs(e);
  } else {
    throw Error("unknown ablation kind '" + kind + "'");
  }
  std::ofstream f(out_path);
  if (!f) throw Error("cannot write " + out_path.string());
  write_table_tsv(table, first, f);
  f.close();
  run.outputs = {out_path};
  write_table_tsv(table, first, run.out);
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multimodal consistency checking for short-video posts"};
  app.name("twtr-cli");
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "Settings file of key = value lines");
    sub->add_option("--set", overrides, "Override one setting, key=value (repeatable)");
  };

  std::string input, output, corpus_path, split_path, ckpt_path, report_path, curve_path, post_id, part = "test";
  std::string mix = "1,1,1", kind, frames;
  std::uint64_t seed = 0;
  bool drop_unverified = false, keep_dup = false, keep_unverifiable = false;
  DemoCorpusConfig demo;
  std::map<std::string, std::string> flag_settings;
  auto setting_flag = [&](CLI::App* sub, const std::string& flag, const std::string& key, const std::string& help) {
    sub->add_option_function<std::string>(
        flag, [&flag_settings, key](const std::string& v) { flag_settings[key] = v; }, help);
  };

  auto* demo_cmd = app.add_subcommand("demo", "Write a synthetic pristine corpus");
  common(demo_cmd);
  demo_cmd->add_option("--out", output, "Corpus file to write")->required();
  demo_cmd->add_option("--n", demo.n_posts, "Number of posts");
  demo_cmd->add_option("--n-patches", demo.n_patches, "Patches per frame");
  demo_cmd->add_option("--d-v", demo.d_v, "Patch feature width");
  demo_cmd->add_option("--frames", demo.frames_per_video, "Frames per video");
  demo_cmd->add_option("--missing-speech-every", demo.missing_speech_every, "Every k-th post has no speech");
  demo_cmd->add_option("--seed", demo.seed, "Random seed");

  auto* ingest_cmd = app.add_subcommand("ingest", "Validate, deduplicate and filter a corpus");
  common(ingest_cmd);
  ingest_cmd->add_option("--input", input, "Raw corpus file")->required();
  ingest_cmd->add_option("--out", output, "Clean corpus file to write")->required();
  ingest_cmd->add_flag("--drop-unverified", drop_unverified, "Drop posts from unverified accounts");
  ingest_cmd->add_flag("--keep-duplicate-videos", keep_dup, "Skip the one-post-per-video rule");
  ingest_cmd->add_flag("--keep-unverifiable", keep_unverifiable, "Skip the event-structure filter");

  auto* split_cmd = app.add_subcommand("split", "Stratified 80/10/10 split");
  common(split_cmd);
  split_cmd->add_option("--corpus", corpus_path, "Corpus file")->required();
  split_cmd->add_option("--seed", seed, "Random seed")->required();
  split_cmd->add_option("--out", output, "Split file to write")->required();

  auto* synth_cmd = app.add_subcommand("synthesize", "Generate inconsistent posts");
  common(synth_cmd);
  synth_cmd->add_option("--corpus", corpus_path, "Pristine corpus file")->required();
  synth_cmd->add_option("--mix", mix, "Claim,speech,video weights");
  synth_cmd->add_option("--seed", seed, "Random seed")->required();
  synth_cmd->add_option("--out", output, "Balanced corpus file to write")->required();
  synth_cmd->add_option("--report", report_path, "Provenance report (JSON lines)");
  setting_flag(synth_cmd, "--top-k", "synth.top_k", "Masked-LM candidates per span");
  setting_flag(synth_cmd, "--policy", "synth.policy", "Span policy: prefer_argument or random");

  auto* train_cmd = app.add_subcommand("train", "Train a model");
  common(train_cmd);
  train_cmd->add_option("--corpus", corpus_path, "Corpus file")->required();
  train_cmd->add_option("--split", split_path, "Split file")->required();
  train_cmd->add_option("--seed", seed, "Random seed")->required();
  train_cmd->add_option("--out", output, "Checkpoint to write")->required();
  train_cmd->add_option("--curve", curve_path, "Loss curve table to write");
  setting_flag(train_cmd, "--epochs", "train.epochs", "Maximum epochs");
  setting_flag(train_cmd, "--lr", "train.learning_rate", "Adam learning rate");
  setting_flag(train_cmd, "--batch-size", "train.batch_size", "Minibatch size");
  setting_flag(train_cmd, "--max-frames", "train.max_frames", "Frames kept per video");

  auto* eval_cmd = app.add_subcommand("evaluate", "Accuracy, F1 and explanation accuracy");
  common(eval_cmd);
  eval_cmd->add_option("--checkpoint", ckpt_path, "Checkpoint")->required();
  eval_cmd->add_option("--corpus", corpus_path, "Corpus file")->required();
  eval_cmd->add_option("--split", split_path, "Split file (default: whole corpus)");
  eval_cmd->add_option("--part", part, "train, val or test")->check(CLI::IsMember({"train", "val", "test"}));
  eval_cmd->add_option("--out", output, "Metrics JSON to write");
  setting_flag(eval_cmd, "--max-frames", "train.max_frames", "Frames kept per video");

  auto* explain_cmd = app.add_subcommand("explain", "Verdict and flagged modality for one post");
  common(explain_cmd);
  explain_cmd->add_option("--checkpoint", ckpt_path, "Checkpoint")->required();
  explain_cmd->add_option("--corpus", corpus_path, "Corpus file")->required();
  explain_cmd->add_option("--post-id", post_id, "Post to explain")->required();
  setting_flag(explain_cmd, "--max-frames", "train.max_frames", "Frames kept per video");

  auto* ablate_cmd = app.add_subcommand("ablate", "Ablation tables");
  common(ablate_cmd);
  ablate_cmd->add_option("--kind", kind, "frames, modules or pairs")
      ->required()
      ->check(CLI::IsMember({"frames", "modules", "pairs"}));
  ablate_cmd->add_option("--corpus", corpus_path, "Corpus file")->required();
  ablate_cmd->add_option("--split", split_path, "Split file")->required();
  ablate_cmd->add_option("--seed", seed, "Random seed")->required();
  ablate_cmd->add_option("--out", output, "Table to write")->required();
  setting_flag(ablate_cmd, "--frames", "ablate.frames", "Comma-separated frame counts");
  setting_flag(ablate_cmd, "--epochs", "train.epochs", "Maximum epochs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  auto* sub = app.get_subcommands().front();
  Run run{sub->get_name(), Settings{}, std::nullopt, {}, {}, utc_now(), out, err};
  int code = kExitUsage;
  try {
    if (!config_path.empty()) {
      run.settings.merge_file(config_path);
      run.inputs.push_back(config_path);
    }
    for (const auto& [k, v] : flag_settings) run.settings.set(k, v);
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw Error("--set expects key=value, got '" + kv + "'");
      run.settings.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (sub == demo_cmd) {
      code = cmd_demo(run, output, demo);
    } else if (sub == ingest_cmd) {
      code = cmd_ingest(run, input, output, drop_unverified, keep_dup, keep_unverifiable);
    } else if (sub == split_cmd) {
      code = cmd_split(run, corpus_path, seed, output);
    } else if (sub == synth_cmd) {
      code = cmd_synthesize(run, corpus_path, mix, seed, output, report_path);
    } else if (sub == train_cmd) {
      code = cmd_train(run, corpus_path, split_path, seed, output, curve_path);
    } else if (sub == eval_cmd) {
      code = cmd_evaluate(run, ckpt_path, corpus_path, split_path, part, output);
    } else if (sub == explain_cmd) {
      code = cmd_explain(run, ckpt_path, corpus_path, post_id);
    } else if (sub == ablate_cmd) {
      code = cmd_ablate(run, kind, corpus_path, split_path, seed, output);
    }
  } catch (const InputNotFound& e) {
    err << "error: " << e.what() << '\n';
    code = kExitInputNotFound;
  } catch (const DuplicatePostId& e) {
    err << "error: " << e.what() << '\n';
    code = kExitDuplicateIds;
  } catch (const SynthesisShortfall& e) {
    err << "error: " << e.what() << '\n';
    code = kExitSynthesisShortfall;
  } catch (const CheckpointError& e) {
    err << "error: " << e.what() << '\n';
    code = kExitBadCheckpoint;
  } catch (const EmptyEvaluation& e) {
    err << "error: " << e.what() << '\n';
    code = kExitEmptyEvaluation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    code = kExitUsage;
  }
  try {
    run.write_manifest(code);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    if (code == kExitOk) code = kExitUsage;
  }
  return code;
}

}  // namespace twtr
