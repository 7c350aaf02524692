#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "segfp/config.h"
#include "segfp/eval_harness.h"

namespace segfp {

// Corpus on disk: one float WAV per track plus manifest.json.
void save_corpus(const Corpus& corpus, const std::filesystem::path& dir);
Corpus load_corpus(const std::filesystem::path& dir);

// Generated once into <workspace>/corpus, then reused.
Corpus load_or_generate_corpus(const ExperimentConfig& cfg);

// "0.5" -> "w0.5"; used for per-window file names.
std::string window_tag(double window_w);

struct WorkspacePaths {
  std::filesystem::path root;
  std::filesystem::path corpus() const { return root / "corpus"; }
  std::filesystem::path checkpoint(double w) const { return root / "checkpoints" / (window_tag(w) + ".nfpw"); }
  std::filesystem::path train_log(double w) const { return root / "checkpoints" / (window_tag(w) + "_train_log.csv"); }
  std::filesystem::path db(double w) const { return root / "dbs" / (window_tag(w) + ".nfpd"); }
  std::filesystem::path window_report(double w) const { return root / "reports" / ("hits_" + window_tag(w) + ".csv"); }
  std::filesystem::path report_csv() const { return root / "reports" / "hits.csv"; }
  std::filesystem::path report_markdown() const { return root / "reports" / "hits.md"; }
  std::filesystem::path report_svg() const { return root / "reports" / "hits.svg"; }
};

std::vector<AudioClip> make_training_noise(const ExperimentConfig& cfg);

TrainResult train_window(const ExperimentConfig& cfg, const Corpus& corpus, double window_w);

// Loads the checkpoint if one exists for this W (and matches the config),
// otherwise trains and saves it together with its loss log.
EncoderWeights train_or_load(const ExperimentConfig& cfg, const Corpus& corpus, double window_w,
                             const WorkspacePaths& paths);

// Reference and distractor tracks, in id order.
FingerprintDB build_window_db(const ExperimentConfig& cfg, const Corpus& corpus, const EncoderWeights& weights);

std::vector<Query> make_queries(const ExperimentConfig& cfg, const Corpus& corpus);

HitReport evaluate_window(const ExperimentConfig& cfg, const FingerprintDB& db, const EncoderWeights& weights,
                          std::span<const Query> queries);

using ProgressFn = std::function<void(const std::string&)>;

// Train/build/evaluate for every configured W and write the per-W CSVs,
// the combined CSV, the markdown table and the SVG figure.
HitReport run_sweep(const ExperimentConfig& cfg, const ProgressFn& progress = {});

}  // namespace segfp
