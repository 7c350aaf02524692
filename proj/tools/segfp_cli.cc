// segfp: segment-length audio fingerprinting experiments.

#include <cstdio>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "segfp/config.h"
#include "segfp/error.h"
#include "segfp/llm_advisor.h"
#include "segfp/pipeline.h"
#include "segfp/util.h"

namespace fs = std::filesystem;
using namespace segfp;

namespace {

struct Globals {
  std::string config_path;
  int threads = -1;
};

ExperimentConfig load(const Globals& g) {
  ExperimentConfig cfg = g.config_path.empty() ? ExperimentConfig{} : load_config(g.config_path);
  if (g.config_path.empty()) cfg.validate();
  if (g.threads >= 0) cfg.threads = g.threads;
  set_max_threads(cfg.threads);
  return cfg;
}

void log_line(const std::string& m) { std::fprintf(stderr, "[segfp] %s\n", m.c_str()); }

double require_window(const ExperimentConfig& cfg, double w) {
  for (double v : cfg.segmentation.w_values) {
    if (to_micros(v) == to_micros(w)) return v;
  }
  throw Error(ErrorCode::kConfigError, "W=" + format_seconds(w) + " is not in segmentation.w_values");
}

nlohmann::json advise_entry(const std::string& model, int q, const Recommendation& rec,
                            const std::optional<HitReport>& report) {
  nlohmann::json j = {{"model", model},
                      {"question_id", q},
                      {"interval", {rec.lo, rec.hi}},
                      {"raw_span", rec.raw_span},
                      {"distance_to_empirical", nullptr}};
  if (report) j["distance_to_empirical"] = score_against_empirical(rec, *report);
  return j;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Segment-length experiments for neural audio fingerprinting"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("-c,--config", g.config_path, "Experiment config (JSON); defaults apply when omitted");
  app.add_option("--threads", g.threads, "Cap on worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);

  auto* gen = app.add_subcommand("gen-corpus", "Synthesize the train/reference/distractor corpus");

  double train_w = 1.0;
  std::string train_out;
  auto* tr = app.add_subcommand("train", "Train one encoder for segment length W");
  tr->add_option("--w", train_w, "Segment length in seconds")->required();
  tr->add_option("-o,--out", train_out, "Checkpoint path (default: workspace checkpoint for W)");

  double db_w = 1.0;
  std::string db_ckpt, db_out;
  auto* bdb = app.add_subcommand("build-db", "Fingerprint reference and distractor tracks");
  bdb->add_option("--w", db_w, "Segment length in seconds")->required();
  bdb->add_option("--checkpoint", db_ckpt, "Encoder checkpoint")->required();
  bdb->add_option("-o,--out", db_out, "Database path (default: workspace database for W)");

  std::string q_db, q_ckpt, q_wav, q_out;
  double q_l = 1.0, q_offset = 0.0;
  std::size_t q_k = 0;
  auto* qry = app.add_subcommand("query", "Identify a WAV excerpt; prints one JSON line per candidate");
  qry->add_option("--db", q_db, "Fingerprint database")->required();
  qry->add_option("--checkpoint", q_ckpt, "Encoder checkpoint")->required();
  qry->add_option("--wav", q_wav, "Query audio")->required();
  qry->add_option("--l", q_l, "Query length in seconds")->required();
  qry->add_option("--offset", q_offset, "Start of the excerpt within the WAV, seconds");
  qry->add_option("--top", q_k, "Candidates to print (default: evaluation.top_m)");
  qry->add_option("-o,--out", q_out, "Also write the JSON lines to this file");

  std::string e_db, e_ckpt, e_out;
  auto* ev = app.add_subcommand("eval", "Hit rates of one database/checkpoint over all query lengths");
  ev->add_option("--db", e_db, "Fingerprint database")->required();
  ev->add_option("--checkpoint", e_ckpt, "Encoder checkpoint")->required();
  ev->add_option("-o,--out", e_out, "Report CSV (default: workspace report for W)");

  auto* sw = app.add_subcommand("sweep", "Train, index and evaluate every W; write CSV, Markdown and SVG");

  std::string a_mode = "replay", a_report, a_out, a_model;
  int a_question = 0;
  auto* adv = app.add_subcommand("advise", "Ask the five segment-duration questions and parse the answers");
  adv->add_option("--mode", a_mode, "live or replay")->check(CLI::IsMember({"live", "replay"}));
  adv->add_option("--model", a_model, "Only this replay model");
  adv->add_option("--question", a_question, "Only this question (1-5)")->check(CLI::Range(1, kQuestionCount));
  adv->add_option("--report", a_report, "Hit report CSV for distance_to_empirical (default: sweep output)");
  adv->add_option("-o,--out", a_out, "Advisor JSON path (default: workspace reports/advice.json)");

  CLI11_PARSE(app, argc, argv);

  try {
    const ExperimentConfig cfg = load(g);
    const WorkspacePaths paths{cfg.workspace};

    if (gen->parsed()) {
      const Corpus c = generate_corpus(cfg.corpus);
      save_corpus(c, paths.corpus());
      write_file_atomic(paths.corpus() / "spec.json", nlohmann::json(cfg.corpus).dump(2) + "\n");
      log_line("wrote " + std::to_string(c.train.size() + c.ref.size() + c.dist.size()) + " tracks to " +
               paths.corpus().string());
    } else if (tr->parsed()) {
      const double w = require_window(cfg, train_w);
      const Corpus corpus = load_or_generate_corpus(cfg);
      const fs::path out = train_out.empty() ? paths.checkpoint(w) : fs::path(train_out);
      TrainResult r = train_window(cfg, corpus, w);
      save_checkpoint(r.weights, out);
      fs::path log_path = out;
      log_path.replace_extension(".train_log.csv");
      write_file_atomic(log_path, format_train_log(r.log));
      log_line("wrote " + out.string());
    } else if (bdb->parsed()) {
      const double w = require_window(cfg, db_w);
      const EncoderWeights weights = load_checkpoint(db_ckpt);
      if (to_micros(weights.config.window_w) != to_micros(w)) {
        throw Error(ErrorCode::kIncompatibleW, "checkpoint was trained for W=" +
                                                   format_seconds(weights.config.window_w));
      }
      const Corpus corpus = load_or_generate_corpus(cfg);
      const FingerprintDB db = build_window_db(cfg, corpus, weights);
      const fs::path out = db_out.empty() ? paths.db(w) : fs::path(db_out);
      save_db(db, out);
      log_line("wrote " + out.string() + " (" + std::to_string(db.rows()) + " rows)");
    } else if (qry->parsed()) {
      const FingerprintDB db = load_db(q_db);
      const EncoderWeights weights = load_checkpoint(q_ckpt);
      AudioClip clip = load_wav(q_wav);
      if (clip.sample_rate != cfg.features.sample_rate) clip = resample(clip, cfg.features.sample_rate);
      QuerySpec spec{q_l, q_offset, cfg.evaluation.k_nn, cfg.evaluation.top_m};
      if (q_k > 0) spec.top_m = q_k;
      spec.validate();
      const QueryResult r = run_query(clip, spec, db, weights, cfg.features);
      std::string lines;
      for (std::size_t i = 0; i < r.candidates.size(); ++i) {
        const Candidate& c = r.candidates[i];
        const TrackInfo* t = db.find_track(c.track_id);
        nlohmann::json j = {{"rank", i + 1},
                            {"track", t ? t->name : std::string()},
                            {"track_id", c.track_id},
                            {"start_index", c.start_index},
                            {"start_time_s", static_cast<double>(c.start_index) * db.header.hop_h},
                            {"weight", c.vote_weight}};
        lines += j.dump() + "\n";
      }
      std::fwrite(lines.data(), 1, lines.size(), stdout);
      if (!q_out.empty()) write_file_atomic(q_out, lines);
    } else if (ev->parsed()) {
      const FingerprintDB db = load_db(e_db);
      const EncoderWeights weights = load_checkpoint(e_ckpt);
      const Corpus corpus = load_or_generate_corpus(cfg);
      const std::vector<Query> queries = make_queries(cfg, corpus);
      const HitReport report = evaluate_window(cfg, db, weights, queries);
      report.check_invariants();
      const fs::path out = e_out.empty() ? paths.window_report(db.header.window_w) : fs::path(e_out);
      const std::string csv = format_report_csv(report);
      write_file_atomic(out, csv);
      std::fwrite(csv.data(), 1, csv.size(), stdout);
    } else if (sw->parsed()) {
      const HitReport report = run_sweep(cfg, log_line);
      report.check_invariants();
      const std::string md = format_report_markdown(report);
      std::fwrite(md.data(), 1, md.size(), stdout);
      log_line("wrote " + paths.report_csv().string() + ", " + paths.report_markdown().string() + ", " +
               paths.report_svg().string());
    } else if (adv->parsed()) {
      std::optional<HitReport> report;
      const fs::path report_path = a_report.empty() ? paths.report_csv() : fs::path(a_report);
      if (!a_report.empty() || fs::exists(report_path)) report = parse_report_csv(read_file(report_path));

      std::vector<int> questions;
      if (a_question > 0) {
        questions.push_back(a_question);
      } else {
        for (int q = 1; q <= kQuestionCount; ++q) questions.push_back(q);
      }

      nlohmann::json out = nlohmann::json::array();
      auto run_model = [&](LlmClient& client, const std::string& model) {
        for (int q : questions) {
          const Recommendation rec = parse_recommendation(client.send(build_prompt(q)));
          out.push_back(advise_entry(model, q, rec, report));
        }
      };
      if (a_mode == "live") {
        HttpChatClient client = HttpChatClient::from_env();
        const char* model = std::getenv("ADVISOR_MODEL");
        run_model(client, model ? model : "");
      } else {
        std::vector<std::string> models = cfg.advisor.models;
        if (!a_model.empty()) models = {a_model};
        for (const auto& m : models) {
          ReplayClient client(cfg.advisor.replay_dir, m);
          run_model(client, m);
        }
      }
      const std::string text = out.dump(2) + "\n";
      write_file_atomic(a_out.empty() ? cfg.workspace / "reports" / "advice.json" : fs::path(a_out), text);
      std::fwrite(text.data(), 1, text.size(), stdout);
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
