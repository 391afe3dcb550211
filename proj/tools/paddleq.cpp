// paddleq: command-line front end for the stroke-quality pipeline.

#include <omp.h>

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <json.hpp>
#include <string>
#include <vector>

#include "paddle/error.hpp"
#include "paddle/eval.hpp"
#include "paddle/features.hpp"
#include "paddle/ingest.hpp"
#include "paddle/kernels.hpp"
#include "paddle/models.hpp"
#include "paddle/report.hpp"
#include "paddle/segment.hpp"
#include "paddle/serve.hpp"
#include "paddle/synth.hpp"
#include "paddle/text.hpp"

namespace fs = std::filesystem;
using namespace paddle;

namespace {

struct Globals {
  std::uint64_t seed = 0;
  int jobs = 0;
};

void add_segmentation_flags(CLI::App* cmd, SegmentationParams& p) {
  cmd->add_option("--smooth-window", p.smooth_window_frames, "Moving-average window (frames, odd)")
      ->capture_default_str();
  cmd->add_option("--gap-sigma", p.gap_threshold_sigma, "Gap threshold above the mean, in std devs")
      ->capture_default_str();
  cmd->add_option("--min-gap", p.min_gap_frames, "Shortest gap that splits strokes (frames)")
      ->capture_default_str();
  cmd->add_option("--min-stroke-s", p.min_stroke_s, "Shortest accepted stroke (s)")->capture_default_str();
  cmd->add_option("--max-stroke-s", p.max_stroke_s, "Longest accepted stroke (s)")->capture_default_str();
  cmd->add_option("--catch-fraction", p.catch_search_fraction, "Share of the stroke searched for the catch end")
      ->capture_default_str();
  cmd->add_option("--min-phase", p.min_phase_frames, "Shortest accepted phase (frames)")->capture_default_str();
  cmd->add_option("--frames", p.standard_frames, "Frames kept per phase")->capture_default_str();
}

void add_hyper_flags(CLI::App* cmd, HyperParams& hp) {
  cmd->add_option("--svc-c", hp.svc_c, "SVC box constraint")->capture_default_str();
  cmd->add_option("--gamma", hp.gamma, "RBF gamma (default 1/features)");
  cmd->add_option("--svm-tol", hp.svm_tolerance, "SMO stopping tolerance")->capture_default_str();
  cmd->add_option("--rf-trees", hp.rf_trees, "Random forest trees")->capture_default_str();
  cmd->add_option("--rf-depth", hp.rf_max_depth, "Random forest max depth")->capture_default_str();
  cmd->add_option("--gb-estimators", hp.gb_estimators, "Boosting rounds")->capture_default_str();
  cmd->add_option("--gb-depth", hp.gb_max_depth, "Boosting tree depth")->capture_default_str();
  cmd->add_option("--gb-lr", hp.gb_learning_rate, "Boosting learning rate")->capture_default_str();
  cmd->add_option("--et-estimators", hp.et_estimators, "Extra trees count")->capture_default_str();
  cmd->add_option("--et-depth", hp.et_max_depth, "Extra trees max depth")->capture_default_str();
  cmd->add_option("--if-trees", hp.if_trees, "Isolation forest trees")->capture_default_str();
  cmd->add_option("--if-samples", hp.if_max_samples, "Isolation forest subsample cap")->capture_default_str();
  cmd->add_option("--nu", hp.ocsvm_nu, "One-class SVM nu")->capture_default_str();
}

ModelKind kind_arg(const std::string& s) {
  const auto k = parse_model_kind(s);
  if (!k) throw CLI::ValidationError("--model", "unknown model kind " + s);
  return *k;
}

Phase phase_arg(const std::string& s) {
  const auto p = parse_phase(s);
  if (!p) throw CLI::ValidationError("--phase", "unknown phase " + s);
  return *p;
}

// A directory holding features.csv, or the table itself.
std::array<FeatureDataset, 3> read_features(const std::string& path) {
  const auto file = fs::is_directory(path) ? path + "/features.csv" : path;
  if (!fs::exists(file))
    throw Error(ErrorCode::TooFewSamples, "no feature table at " + file, "cli");
  return read_feature_table(text::read_file(file));
}

void ensure_parent(const std::string& file) {
  const auto parent = fs::path(file).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

void print_segments(std::span<const StrokeRecord> records) {
  std::size_t accepted = 0;
  for (const auto& r : records) {
    accepted += r.accepted();
    std::printf("stroke %zu frames [%zu, %zu) %s", r.index, r.start_frame, r.end_frame,
                std::string(to_string(r.status)).c_str());
    if (!r.accepted()) std::printf(" (%s)", std::string(to_string(r.reason)).c_str());
    if (r.phases) {
      const auto& ph = *r.phases;
      std::printf(" catch [%zu, %zu) pull [%zu, %zu) recovery [%zu, %zu)", ph[0].start_frame,
                  ph[0].end_frame, ph[1].start_frame, ph[1].end_frame, ph[2].start_frame, ph[2].end_frame);
    }
    std::printf("\n");
  }
  std::printf("%zu accepted, %zu rejected\n", accepted, records.size() - accepted);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Paddling stroke quality pipeline"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand
  app.set_config("--config", "", "TOML/INI file with flag defaults (flags win)");
  Globals g;
  app.add_option("--seed", g.seed, "Seed for every random choice")->capture_default_str();
  app.add_option("--jobs", g.jobs, "Thread cap (0 = all cores)")->capture_default_str();

  // ingest
  std::string ingest_dir, ingest_out, ingest_map;
  double rate_hz = kDefaultRateHz;
  bool strict_time = false;
  auto* ingest = app.add_subcommand("ingest", "Align one trial directory into a session CSV");
  ingest->add_option("dir", ingest_dir, "Trial directory with the five slot CSVs")->required();
  ingest->add_option("--out", ingest_out, "Session CSV to write");
  ingest->add_option("--rate", rate_hz, "Grid rate (Hz)")->capture_default_str();
  ingest->add_option("--watch-map", ingest_map, "Watch column map JSON (builtin when empty)");
  ingest->add_flag("--strict-time", strict_time, "Reject unordered or duplicate timestamps");

  // segment
  std::string seg_dir, seg_out;
  bool seg_report = false;
  SegmentationParams seg_params;
  auto* segment = app.add_subcommand("segment", "Find strokes and phases in a trial directory");
  segment->add_option("dir", seg_dir, "Trial directory")->required();
  segment->add_flag("--report", seg_report, "Print one line per candidate stroke");
  segment->add_option("--out", seg_out, "Stroke record CSV to write");
  segment->add_option("--rate", rate_hz, "Grid rate (Hz)")->capture_default_str();
  add_segmentation_flags(segment, seg_params);

  // featurize
  std::vector<std::string> feat_dirs;
  std::string feat_out;
  bool feat_append = false;
  SegmentationParams feat_params;
  auto* featurize = app.add_subcommand("featurize", "Summarize accepted strokes into a feature table");
  featurize->add_option("dirs", feat_dirs, "Trial directories (labels from trial.json)")->required();
  featurize->add_option("--out", feat_out, "Feature table CSV")->required();
  featurize->add_flag("--append", feat_append, "Append to an existing table");
  featurize->add_option("--rate", rate_hz, "Grid rate (Hz)")->capture_default_str();
  add_segmentation_flags(featurize, feat_params);

  // train
  std::string train_data, train_out, train_model = "extra_trees";
  HyperParams train_hp;
  auto* train_cmd = app.add_subcommand("train", "Train one model per phase into a bundle directory");
  train_cmd->add_option("--data", train_data, "Feature table or directory holding features.csv")->required();
  train_cmd->add_option("--model", train_model, "Model kind")->capture_default_str();
  train_cmd->add_option("--out", train_out, "Bundle directory (default <data>/models)");
  add_hyper_flags(train_cmd, train_hp);

  // evaluate
  std::string eval_data, eval_out, eval_models = "all", eval_device_model;
  std::size_t eval_k = 5;
  HyperParams eval_hp;
  auto* evaluate = app.add_subcommand("evaluate", "Pooled stratified k-fold evaluation");
  evaluate->add_option("--data", eval_data, "Feature table or directory")->required();
  evaluate->add_option("--models", eval_models, "Comma list of kinds, or all")->capture_default_str();
  evaluate->add_option("--k", eval_k, "Folds")->capture_default_str();
  evaluate->add_option("--device-model", eval_device_model, "Also evaluate this kind per body site");
  evaluate->add_option("--out", eval_out, "Report JSON to write");
  add_hyper_flags(evaluate, eval_hp);

  // importance
  std::string imp_data, imp_out, imp_model = "extra_trees", imp_phase = "catch", imp_report;
  std::size_t imp_repeats = 10;
  HyperParams imp_hp;
  auto* importance = app.add_subcommand("importance", "Permutation feature importance");
  importance->add_option("--data", imp_data, "Feature table or directory")->required();
  importance->add_option("--model", imp_model, "Model kind")->capture_default_str();
  importance->add_option("--phase", imp_phase, "Phase")->capture_default_str();
  importance->add_option("--repeats", imp_repeats, "Shuffles per feature")->capture_default_str();
  importance->add_option("--out", imp_out, "Importance CSV to write");
  importance->add_option("--report", imp_report, "Evaluation report JSON to attach the result to");
  add_hyper_flags(importance, imp_hp);

  // synth
  SynthSpec synth_spec;
  std::string synth_out, synth_form = "optimal";
  std::size_t synth_dataset = 0;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic trial or labeled dataset");
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--strokes", synth_spec.n_strokes, "Strokes per trial")->capture_default_str();
  synth->add_option("--form", synth_form, "optimal or suboptimal")->capture_default_str();
  synth->add_option("--separation", synth_spec.class_separation, "Suboptimal shift scale")->capture_default_str();
  synth->add_option("--noise", synth_spec.noise_sigma, "Per-sample noise sigma")->capture_default_str();
  synth->add_option("--period", synth_spec.stroke_period_s, "Mean stroke period (s)")->capture_default_str();
  synth->add_option("--jitter", synth_spec.jitter, "Relative stroke length jitter")->capture_default_str();
  synth->add_option("--rate", synth_spec.rate_hz, "Waveform rate (Hz)")->capture_default_str();
  synth->add_option("--dataset", synth_dataset,
                    "Write a feature table with this many strokes per class instead of one trial");

  // serve
  std::string serve_models, serve_listen, serve_sessions, serve_reference, provider_url;
  bool serve_offline = false;
  auto* serve = app.add_subcommand("serve", "Run the HTTP inference service");
  serve->add_option("--models", serve_models, "Bundle directory (env PADDLEQ_MODELS)")->envname("PADDLEQ_MODELS")->required();
  serve->add_option("--listen", serve_listen, "host:port (env PADDLEQ_LISTEN, default 127.0.0.1:8080)");
  serve->add_option("--session-dir", serve_sessions, "Persist sessions here (env PADDLEQ_SESSION_DIR)");
  serve->add_option("--reference", serve_reference, "Reference stroke JSON (builtin when empty)");
  serve->add_option("--provider-url", provider_url, "Chat-completion API root (env PADDLEQ_PROVIDER_URL)");
  serve->add_flag("--offline", serve_offline, "Template feedback only (env PADDLEQ_OFFLINE)");

  // report
  std::string rep_eval, rep_out;
  auto* report_cmd = app.add_subcommand("report", "Render tables and charts from an evaluation report");
  report_cmd->add_option("--eval", rep_eval, "Evaluation report JSON")->required();
  report_cmd->add_option("--out", rep_out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (g.jobs < 0) {
    std::cerr << "error: --jobs must be >= 0\n";
    return 2;
  }
  if (g.jobs > 0) {
    kernels::set_max_threads(g.jobs);
    omp_set_num_threads(g.jobs);
  }

  try {
    LoadOptions load;
    load.rate_hz = rate_hz;
    load.strict_time = strict_time;

    if (*ingest) {
      WatchColumnMap map;
      if (!ingest_map.empty()) {
        map = WatchColumnMap::from_json(text::read_file(ingest_map));
        load.watch_map = &map;
      }
      const auto trial = load_trial_dir(ingest_dir, load);
      std::cout << trial.report_json() << '\n';
      std::printf("%zu frames, %zu channels\n", trial.session.frames(), trial.session.registry().size());
      if (!ingest_out.empty()) {
        ensure_parent(ingest_out);
        text::write_file(ingest_out, session_to_csv(trial.session));
      }
    } else if (*segment) {
      seg_params.validate();
      const auto trial = load_trial_dir(seg_dir, load);
      const auto records = segment_session(trial.session, seg_params);
      if (seg_report) print_segments(records);
      if (!seg_out.empty()) {
        ensure_parent(seg_out);
        text::write_file(seg_out, segments_to_csv(records));
      }
      if (!seg_report && seg_out.empty()) print_segments(records);
    } else if (*featurize) {
      feat_params.validate();
      std::array<FeatureDataset, 3> all;
      const auto registry = FeatureRegistry::canonical();
      if (feat_append && fs::exists(feat_out)) all = read_feature_table(text::read_file(feat_out));
      else
        for (std::size_t p = 0; p < 3; ++p) all[p] = FeatureDataset{registry, kPhases[p], {}};
      for (const auto& dir : feat_dirs) {
        const auto trial = load_trial_dir(dir, load);
        const auto records = segment_session(trial.session, feat_params);
        auto more = featurize_trial(trial.session, records, all[0].registry, feat_params);
        // Stroke ids stay unique across trials.
        std::size_t next = 0;
        for (const auto& r : all[0].rows) next = std::max(next, r.stroke + 1);
        for (auto& ds : more)
          for (auto& r : ds.rows) r.stroke += next;
        append_rows(all, more);
      }
      ensure_parent(feat_out);
      text::write_file(feat_out, write_feature_table(all));
      std::printf("%zu strokes per phase\n", all[0].size());
    } else if (*train_cmd) {
      train_hp.seed = g.seed;
      train_hp.validate();
      const auto data = read_features(train_data);
      const auto kind = kind_arg(train_model);
      if (data[0].size() < 2)
        throw Error(ErrorCode::TooFewSamples, std::to_string(data[0].size()) + " strokes to train on",
                    "train");
      const auto bundle = train_bundle(data, kind, train_hp);
      const auto out = train_out.empty()
                           ? (fs::is_directory(train_data) ? train_data : fs::path(train_data).parent_path().string()) +
                                 "/models"
                           : train_out;
      bundle.save_dir(out);
      std::printf("trained %s on %zu strokes per phase -> %s\n", std::string(to_string(kind)).c_str(),
                  data[0].size(), out.c_str());
    } else if (*evaluate) {
      eval_hp.seed = g.seed;
      eval_hp.validate();
      const auto data = read_features(eval_data);
      std::vector<ModelKind> kinds;
      if (eval_models == "all") {
        kinds.assign(kModelKinds.begin(), kModelKinds.end());
      } else {
        for (auto tok : text::split(eval_models, ',')) kinds.push_back(kind_arg(std::string(text::trim(tok))));
      }
      auto rep = evaluate_suite(data, kinds, eval_hp, eval_k, g.seed);
      if (!eval_device_model.empty()) {
        const auto kind = kind_arg(eval_device_model);
        for (auto site : kBodySites) rep.devices.push_back(evaluate_by_device(data, site, kind, eval_hp, eval_k, g.seed));
      }
      std::cout << report::model_table(rep) << report::anomaly_table(rep);
      if (!rep.devices.empty()) std::cout << report::device_table(rep);
      std::printf("digest %s\n", rep.digest().c_str());
      if (!eval_out.empty()) {
        ensure_parent(eval_out);
        text::write_file(eval_out, rep.to_json());
      }
    } else if (*importance) {
      imp_hp.seed = g.seed;
      imp_hp.validate();
      const auto data = read_features(imp_data);
      const auto phase = phase_arg(imp_phase);
      const auto& ds = data[static_cast<std::size_t>(phase)];
      const auto model = train(kind_arg(imp_model), ds, imp_hp);
      const auto res = permutation_importance(model, ds, imp_repeats, g.seed);
      std::cout << report::importance_table(res);
      if (!imp_out.empty()) {
        ensure_parent(imp_out);
        text::write_file(imp_out, importance_to_csv(res));
      }
      if (!imp_report.empty()) {
        auto rep = EvalReport::from_json(text::read_file(imp_report));
        rep.importance = res;
        text::write_file(imp_report, rep.to_json());
      }
    } else if (*synth) {
      const auto form = parse_label(synth_form);
      if (!form || *form == Label::Unlabeled) throw CLI::ValidationError("--form", "optimal or suboptimal");
      synth_spec.form = *form;
      synth_spec.seed = g.seed;
      synth_spec.validate();
      fs::create_directories(synth_out);
      if (synth_dataset > 0) {
        const auto ds = generate_dataset(synth_dataset, synth_spec, g.seed);
        text::write_file(synth_out + "/features.csv", write_feature_table(ds.phases));
        std::printf("%zu strokes per class from %zu trials -> %s/features.csv\n", synth_dataset,
                    ds.truths.size(), synth_out.c_str());
      } else {
        const auto trial = generate_trial(synth_spec);
        write_trial_dir(trial, synth_out);
        std::printf("%zu strokes, %zu frames -> %s\n", trial.truth.strokes.size(), trial.truth.frames,
                    synth_out.c_str());
      }
    } else if (*serve) {
      auto cfg = ServiceConfig::from_env();
      if (!serve_listen.empty()) {
        const auto colon = serve_listen.rfind(':');
        const auto port = colon == std::string::npos ? std::nullopt : text::parse_int(serve_listen.substr(colon + 1));
        if (!port || *port < 0 || *port > 65535) throw CLI::ValidationError("--listen", "expected host:port");
        if (colon > 0) cfg.host = serve_listen.substr(0, colon);
        cfg.port = static_cast<int>(*port);
      }
      if (!serve_sessions.empty()) cfg.session_dir = serve_sessions;
      if (!provider_url.empty()) {
        cfg.provider.base_url = provider_url;
        cfg.provider.offline = false;
      }
      if (serve_offline) cfg.provider.offline = true;
      cfg.analyze.rate_hz = rate_hz;
      auto reference = serve_reference.empty() ? builtin_reference_stroke()
                                               : reference_from_json(text::read_file(serve_reference));
      Service service(ModelBundle::load_dir(serve_models), cfg, std::move(reference));
      const int port = service.bind();
      std::printf("listening on http://%s:%d (feedback %s)\n", cfg.host.c_str(), port,
                  cfg.provider.offline ? "offline" : "via provider");
      std::fflush(stdout);
      service.run();
    } else if (*report_cmd) {
      const auto rep = EvalReport::from_json(text::read_file(rep_eval));
      fs::create_directories(rep_out);
      for (const auto& [name, body] : report::render_all(rep)) text::write_file(rep_out + "/" + name, body);
      std::cout << report::model_table(rep);
    }
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
