#include "segfp/pipeline.h"

#include <algorithm>

#include <json.hpp>

#include "segfp/error.h"
#include "segfp/serialization.h"
#include "segfp/util.h"

namespace segfp {
namespace fs = std::filesystem;

namespace {

nlohmann::json split_manifest(const std::vector<CorpusTrack>& tracks, const fs::path& dir, const char* split) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& t : tracks) {
    char file[64];
    std::snprintf(file, sizeof file, "%s_%04u.wav", split, t.id);
    save_wav(t.clip, dir / file);
    out.push_back({{"id", t.id}, {"name", t.name}, {"file", file}});
  }
  return out;
}

std::vector<CorpusTrack> load_split(const nlohmann::json& arr, const fs::path& dir) {
  std::vector<CorpusTrack> out;
  for (const auto& e : arr) {
    CorpusTrack t;
    t.id = e.at("id").get<std::uint32_t>();
    t.name = e.at("name").get<std::string>();
    t.clip = load_wav(dir / e.at("file").get<std::string>());
    out.push_back(std::move(t));
  }
  return out;
}

void note(const ProgressFn& p, const std::string& m) {
  if (p) p(m);
}

}  // namespace

void save_corpus(const Corpus& corpus, const fs::path& dir) {
  fs::create_directories(dir);
  nlohmann::json m;
  m["train"] = split_manifest(corpus.train, dir, "train");
  m["ref"] = split_manifest(corpus.ref, dir, "ref");
  m["dist"] = split_manifest(corpus.dist, dir, "dist");
  write_file_atomic(dir / "manifest.json", m.dump(2) + "\n");
}

Corpus load_corpus(const fs::path& dir) {
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(read_file(dir / "manifest.json"));
    Corpus c;
    c.train = load_split(m.at("train"), dir);
    c.ref = load_split(m.at("ref"), dir);
    c.dist = load_split(m.at("dist"), dir);
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kIoError, "bad corpus manifest in " + dir.string() + ": " + e.what());
  }
}

Corpus load_or_generate_corpus(const ExperimentConfig& cfg) {
  const WorkspacePaths paths{cfg.workspace};
  const fs::path spec_file = paths.corpus() / "spec.json";
  const std::string spec_text = nlohmann::json(cfg.corpus).dump(2) + "\n";
  if (fs::exists(spec_file) && read_file(spec_file) == spec_text) return load_corpus(paths.corpus());
  Corpus c = generate_corpus(cfg.corpus);
  save_corpus(c, paths.corpus());
  write_file_atomic(spec_file, spec_text);
  return c;
}

std::string window_tag(double window_w) { return "w" + format_seconds(window_w); }

std::vector<AudioClip> make_training_noise(const ExperimentConfig& cfg) {
  const auto len = static_cast<std::size_t>(std::llround(cfg.corpus.clip_len_s * cfg.features.sample_rate));
  return make_noise_pool(cfg.training.noise_pool_size, len, cfg.training.noise_seed);
}

TrainResult train_window(const ExperimentConfig& cfg, const Corpus& corpus, double window_w) {
  std::vector<AudioClip> clips;
  clips.reserve(corpus.train.size());
  for (const auto& t : corpus.train) clips.push_back(t.clip);
  const auto noise = make_training_noise(cfg);
  const SegmentationParams params{window_w, cfg.segmentation.hop_h};
  return train(clips, noise, cfg.features, cfg.encoder_for(window_w), params, cfg.training.augment,
               cfg.training.train);
}

EncoderWeights train_or_load(const ExperimentConfig& cfg, const Corpus& corpus, double window_w,
                             const WorkspacePaths& paths) {
  const fs::path ckpt = paths.checkpoint(window_w);
  if (fs::exists(ckpt)) {
    EncoderWeights w = load_checkpoint(ckpt);
    if (w.config == cfg.encoder_for(window_w)) return w;
  }
  TrainResult r = train_window(cfg, corpus, window_w);
  save_checkpoint(r.weights, ckpt);
  write_file_atomic(paths.train_log(window_w), format_train_log(r.log));
  return std::move(r.weights);
}

FingerprintDB build_window_db(const ExperimentConfig& cfg, const Corpus& corpus, const EncoderWeights& weights) {
  std::vector<DbTrackInput> inputs;
  for (const auto& t : corpus.ref) inputs.push_back({t.id, t.name, &t.clip, true});
  for (const auto& t : corpus.dist) inputs.push_back({t.id, t.name, &t.clip, false});
  const SegmentationParams params{weights.config.window_w, cfg.segmentation.hop_h};
  return build_db(inputs, weights, cfg.features, params);
}

std::vector<Query> make_queries(const ExperimentConfig& cfg, const Corpus& corpus) {
  return derive_query_set(corpus.ref, cfg.evaluation.query_set, cfg.segmentation.hop_h);
}

HitReport evaluate_window(const ExperimentConfig& cfg, const FingerprintDB& db, const EncoderWeights& weights,
                          std::span<const Query> queries) {
  return evaluate(db, weights, cfg.features, queries, cfg.evaluation.l_values,
                  EvalOptions{cfg.evaluation.k_nn, cfg.evaluation.top_m});
}

HitReport run_sweep(const ExperimentConfig& cfg, const ProgressFn& progress) {
  const WorkspacePaths paths{cfg.workspace};
  const Corpus corpus = load_or_generate_corpus(cfg);
  const std::vector<Query> queries = make_queries(cfg, corpus);
  note(progress, "corpus: " + std::to_string(corpus.ref.size()) + " ref, " + std::to_string(corpus.dist.size()) +
                     " dist, " + std::to_string(queries.size()) + " queries");

  std::vector<double> ws = cfg.segmentation.w_values;
  std::sort(ws.begin(), ws.end());
  HitReport combined;
  for (double w : ws) {
    note(progress, "W=" + format_seconds(w) + ": training");
    const EncoderWeights weights = train_or_load(cfg, corpus, w, paths);
    note(progress, "W=" + format_seconds(w) + ": building database");
    const FingerprintDB db = build_window_db(cfg, corpus, weights);
    save_db(db, paths.db(w));
    note(progress, "W=" + format_seconds(w) + ": evaluating");
    const HitReport r = evaluate_window(cfg, db, weights, queries);
    write_file_atomic(paths.window_report(w), format_report_csv(r));
    combined.merge(r);
  }
  write_file_atomic(paths.report_csv(), format_report_csv(combined));
  write_file_atomic(paths.report_markdown(), format_report_markdown(combined));
  write_file_atomic(paths.report_svg(), format_report_svg(combined));
  return combined;
}

}  // namespace segfp
