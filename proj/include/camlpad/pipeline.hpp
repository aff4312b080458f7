#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <future>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "camlpad/config.hpp"
#include "camlpad/datamodel.hpp"
#include "camlpad/detectors.hpp"
#include "camlpad/ensemble.hpp"
#include "camlpad/error.hpp"
#include "camlpad/evaluate.hpp"
#include "camlpad/gauge.hpp"
#include "camlpad/ingest.hpp"
#include "camlpad/preprocess.hpp"
#include "camlpad/store.hpp"
#include "camlpad/viz.hpp"

namespace camlpad {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitAlert = 2;

struct SourceRun {
  DataSourceKind source{};
  std::string window_id;
  std::size_t history_rows = 0;
  std::size_t dropped = 0;  // BRO records with another protocol tag

  // Current window only.
  std::vector<TimestampMs> timestamps;
  LabelVector iforest, hbos, cblof, ensemble;
  ScoreSet raw_scores;
  std::vector<double> ensemble_scores;

  // Both windows, in history-then-current order.
  std::vector<TimestampMs> all_timestamps;
  std::vector<double> all_ensemble_scores;

  GaugeReading gauge;
  std::map<std::string, double> history_gauges;  // per history day
};

struct RunResult {
  TimestampMs boundary = 0;
  std::vector<SourceRun> sources;
  std::vector<BucketVerdict> buckets;
  std::vector<GaugeReading> gauges;  // sources in config order, then combined
  std::vector<AlertEvent> alerts;
  nlohmann::ordered_json evaluation;

  int exit_code() const { return alerts.empty() ? kExitOk : kExitAlert; }
};

namespace detail {

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  f << text;
  if (!f) throw Error(ErrorCode::Io, "cannot write " + path.string());
}

inline TimestampMs resolve_boundary(const PipelineConfig& cfg) {
  if (cfg.boundary) return *cfg.boundary;
  const auto now = std::chrono::duration_cast<std::chrono::milliseconds>(
                       std::chrono::system_clock::now().time_since_epoch())
                       .count();
  return day_start(now);
}

inline Error with_context(const Error& e, const std::string& context) {
  return Error(e.code(), context + ": " + e.message(), e.position());
}

inline RecordBatch fetch_source(const PipelineConfig& cfg, DataSourceKind kind, TimestampMs boundary,
                                std::size_t* dropped) {
  const auto& st = cfg.settings(kind);
  StoreQuery q;
  q.index = st.index;
  q.time_from = boundary - static_cast<TimestampMs>(cfg.history_days) * kMillisPerDay;
  q.time_to = boundary + kMillisPerDay;
  q.page_size = cfg.page_size;
  q.max_records = cfg.max_records;
  q.time_field = cfg.time_field;
  RecordBatch batch = query_store(cfg.store, q, kind);
  const bool bro = kind == DataSourceKind::BroDns || kind == DataSourceKind::BroConn;
  if (bro && !st.discriminator.empty()) {
    auto split = split_bro_by_protocol(batch, st.discriminator);
    *dropped = split.dropped + (kind == DataSourceKind::BroDns ? split.conn.size() : split.dns.size());
    return kind == DataSourceKind::BroDns ? std::move(split.dns) : std::move(split.conn);
  }
  return batch;
}

inline std::vector<double> score_rows(const Matrix& m, auto&& score) {
  std::vector<double> out(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) out[r] = score(m.row(r));
  return out;
}

inline std::vector<double> concat(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> out(a);
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

inline SourceRun run_source(const PipelineConfig& cfg, DataSourceKind kind, TimestampMs boundary) {
  namespace fs = std::filesystem;
  const std::string name{to_string(kind)};
  SourceRun run;
  run.source = kind;
  run.window_id = iso_date(boundary);

  const RecordBatch batch = fetch_source(cfg, kind, boundary, &run.dropped);
  const WindowSplit split = window_split(batch, boundary, cfg.min_history);
  run.history_rows = split.history().size();

  // Encoding, imputation and scaling are fitted on history only.
  auto enc_h = encode(split.history());
  auto std_h = standardize(impute(std::move(enc_h.matrix)));
  auto enc_c = encode(split.current(), enc_h.dictionary, std_h.matrix.layout());
  auto std_c = standardize(impute(std::move(enc_c.matrix)), std_h.stats);
  const Matrix& hist = std_h.matrix.values;
  const Matrix& cur = std_c.matrix.values;

  const auto iforest = fit_iforest(hist, cfg.iforest);
  const auto hbos = fit_hbos(hist, cfg.hbos);
  CblofParams cp = cfg.cblof;
  cp.k = std::min(cp.k, count_distinct_rows(hist));
  const auto cblof = fit_cblof(hist, cp);
  const auto pca = fit_pca(hist);

  auto s_if = [&](auto row) { return score_iforest(iforest, row); };
  auto s_hb = [&](auto row) { return score_hbos(hbos, row); };
  auto s_cb = [&](auto row) { return score_cblof(cblof, row); };
  const std::vector<double> h_if = score_rows(hist, s_if), c_if = score_rows(cur, s_if);
  const std::vector<double> h_hb = score_rows(hist, s_hb), c_hb = score_rows(cur, s_hb);
  const std::vector<double> h_cb = score_rows(hist, s_cb), c_cb = score_rows(cur, s_cb);

  // Both windows share one normalization so their gauges are comparable.
  ScoreSet all;
  all.row_ids = std_h.matrix.row_ids;
  all.row_ids.insert(all.row_ids.end(), std_c.matrix.row_ids.begin(), std_c.matrix.row_ids.end());
  all.iforest = concat(h_if, c_if);
  all.hbos = concat(h_hb, c_hb);
  all.cblof = concat(h_cb, c_cb);
  all.validate();
  run.all_ensemble_scores = ensemble_score(all);
  const std::size_t nh = hist.rows();

  const auto& cur_ids = std_c.matrix.row_ids;
  run.raw_scores = ScoreSet{cur_ids, c_if, c_hb, c_cb};
  run.ensemble_scores.assign(run.all_ensemble_scores.begin() + static_cast<std::ptrdiff_t>(nh),
                             run.all_ensemble_scores.end());
  run.iforest = binarize(cur_ids, c_if, cfg.contamination);
  run.hbos = binarize(cur_ids, c_hb, cfg.contamination);
  run.cblof = binarize(cur_ids, c_cb, cfg.contamination);
  run.ensemble = vote(run.iforest, run.hbos, run.cblof);

  for (const auto& r : split.history().records) run.all_timestamps.push_back(r.timestamp);
  for (const auto& r : split.current().records) {
    run.all_timestamps.push_back(r.timestamp);
    run.timestamps.push_back(r.timestamp);
  }

  // History gauges: one window score per history day.
  std::map<std::string, std::vector<double>> per_day;
  for (std::size_t i = 0; i < nh; ++i) per_day[iso_date(run.all_timestamps[i])].push_back(run.all_ensemble_scores[i]);
  std::vector<double> history_values;
  for (const auto& [day, scores] : per_day) {
    run.history_gauges[day] = window_score(scores);
    history_values.push_back(run.history_gauges[day]);
  }
  run.gauge.scope = kind;
  run.gauge.window_id = run.window_id;
  run.gauge.score = window_score(run.ensemble_scores);
  run.gauge.history_percentile = percentile_rank(run.gauge.score, history_values);

  // Artifacts; every file below is written by this source only.
  const fs::path out = cfg.output_dir;
  const auto hist_scores = [&](const std::vector<double>& all_norm) {
    return std::vector<double>(all_norm.begin(), all_norm.begin() + static_cast<std::ptrdiff_t>(nh));
  };
  const auto cur_scores = [&](const std::vector<double>& all_norm) {
    return std::vector<double>(all_norm.begin() + static_cast<std::ptrdiff_t>(nh), all_norm.end());
  };
  const std::vector<std::pair<std::string, std::vector<double>>> shading = {
      {"hbos", normalize_scores(all.hbos)},
      {"cblof", normalize_scores(all.cblof)},
      {"iforest", normalize_scores(all.iforest)},
      {"combined", run.all_ensemble_scores}};
  for (const auto& [model, norm] : shading) {
    const auto points = build_heatmap_points(pca, hist, cur, hist_scores(norm), cur_scores(norm));
    PlotSpec spec;
    spec.title = name + " " + model + " " + run.window_id;
    write_text(out / "heatmaps" / heatmap_file_name(name, model, run.window_id), render_svg(points, spec));
  }

  write_text(out / "labels" / (name + "_iforest.jsonl"), labels_to_jsonl(run.iforest, c_if));
  write_text(out / "labels" / (name + "_hbos.jsonl"), labels_to_jsonl(run.hbos, c_hb));
  write_text(out / "labels" / (name + "_cblof.jsonl"), labels_to_jsonl(run.cblof, c_cb));
  write_text(out / "labels" / (name + "_ensemble.jsonl"),
             ensemble_labels_to_jsonl(run.ensemble, run.iforest, run.hbos, run.cblof, run.ensemble_scores));

  write_text(out / "models" / (name + "_iforest.json"), to_json(iforest).dump() + "\n");
  write_text(out / "models" / (name + "_hbos.json"), to_json(hbos).dump() + "\n");
  write_text(out / "models" / (name + "_cblof.json"), to_json(cblof).dump() + "\n");
  write_text(out / "models" / (name + "_pca.json"), to_json(pca).dump() + "\n");
  write_text(out / "models" / (name + "_dictionary.json"), enc_h.dictionary.to_json().dump() + "\n");
  return run;
}

// Rows are time buckets, columns are per-source mean ensemble scores; a
// source absent from a bucket contributes its overall mean.
inline std::string combined_heatmap(const std::vector<SourceRun>& runs, TimestampMs boundary,
                                    TimestampMs bucket_width, const std::string& window_id) {
  std::map<TimestampMs, std::vector<std::pair<double, std::size_t>>> buckets;
  std::vector<double> fallback;
  for (std::size_t s = 0; s < runs.size(); ++s) {
    const auto& run = runs[s];
    fallback.push_back(window_score(run.all_ensemble_scores));
    for (std::size_t i = 0; i < run.all_timestamps.size(); ++i) {
      auto& cells = buckets[bucket_of(run.all_timestamps[i], bucket_width)];
      cells.resize(runs.size(), {0.0, 0});
      cells[s].first += run.all_ensemble_scores[i];
      ++cells[s].second;
    }
  }
  std::vector<std::vector<double>> hist_rows, cur_rows;
  std::vector<double> hist_scores, cur_scores;
  for (const auto& [start, cells] : buckets) {
    std::vector<double> row(runs.size());
    double sum = 0.0;
    for (std::size_t s = 0; s < runs.size(); ++s) {
      row[s] = cells[s].second ? cells[s].first / static_cast<double>(cells[s].second) : fallback[s];
      sum += row[s];
    }
    const double score = sum / static_cast<double>(runs.size());
    if (start < boundary) {
      hist_rows.push_back(std::move(row));
      hist_scores.push_back(score);
    } else {
      cur_rows.push_back(std::move(row));
      cur_scores.push_back(score);
    }
  }
  const Matrix hist = Matrix::from_rows(hist_rows);
  const Matrix cur = cur_rows.empty() ? Matrix(0, runs.size()) : Matrix::from_rows(cur_rows);
  const auto pca = fit_pca(hist);
  PlotSpec spec;
  spec.title = "combined " + window_id;
  return render_svg(build_heatmap_points(pca, hist, cur, hist_scores, cur_scores), spec);
}

inline SourceEvaluation to_evaluation(const std::string& source, const LabelVector& iforest, const LabelVector& hbos,
                                      const LabelVector& cblof, const LabelVector& ensemble,
                                      std::optional<LabelVector> truth) {
  SourceEvaluation e;
  e.source = source;
  e.detectors = {{"iforest", iforest}, {"hbos", hbos}, {"cblof", cblof}};
  e.ensemble = ensemble;
  e.truth = std::move(truth);
  return e;
}

inline std::optional<LabelVector> load_truth(const std::optional<std::filesystem::path>& dir,
                                             const std::string& source) {
  if (!dir) return std::nullopt;
  const auto path = *dir / (source + ".jsonl");
  if (!std::filesystem::exists(path)) return std::nullopt;
  try {
    return labels_from_jsonl(read_file(path));
  } catch (const Error& e) {
    throw with_context(e, path.string());
  }
}

}  // namespace detail

// Checks the configuration and that every configured index is reachable.
inline void dry_run(const PipelineConfig& cfg) {
  cfg.validate();
  for (auto kind : cfg.sources) {
    const auto& st = cfg.settings(kind);
    try {
      check_index(cfg.store, st.index, cfg.time_field);
    } catch (const Error& e) {
      throw detail::with_context(e, std::string(to_string(kind)));
    }
  }
}

inline RunResult run_pipeline(const PipelineConfig& cfg) {
  namespace fs = std::filesystem;
  // Fail on a missing index before any source writes artifacts.
  dry_run(cfg);
  RunResult result;
  result.boundary = detail::resolve_boundary(cfg);
  const std::string window_id = iso_date(result.boundary);

  std::vector<std::future<SourceRun>> tasks;
  for (auto kind : cfg.sources) {
    tasks.push_back(std::async(std::launch::async, [&cfg, kind, b = result.boundary] {
      try {
        return detail::run_source(cfg, kind, b);
      } catch (const Error& e) {
        throw detail::with_context(e, std::string(to_string(kind)));
      }
    }));
  }
  // Collect every task before rethrowing so no thread outlives the config.
  std::optional<Error> failure;
  for (auto& t : tasks) {
    try {
      result.sources.push_back(t.get());
    } catch (const Error& e) {
      if (!failure) failure = e;
    }
  }
  if (failure) throw *failure;

  const fs::path out = cfg.output_dir;

  std::vector<SourceLabels> votes;
  for (const auto& run : result.sources) votes.push_back({run.source, run.timestamps, run.ensemble.labels});
  result.buckets = cross_source_vote(votes, {cfg.bucket_width, cfg.contamination, cfg.tie_breaks_anomalous});
  detail::write_text(out / "buckets.jsonl", buckets_to_jsonl(result.buckets));
  detail::write_text(out / "heatmaps" / heatmap_file_name("combined", "ensemble", window_id),
                     detail::combined_heatmap(result.sources, result.boundary, cfg.bucket_width, window_id));

  // The combined gauge averages the source gauges, day by day for history.
  std::map<std::string, std::pair<double, std::size_t>> combined_days;
  double combined_sum = 0.0;
  for (const auto& run : result.sources) {
    result.gauges.push_back(run.gauge);
    combined_sum += run.gauge.score;
    for (const auto& [day, g] : run.history_gauges) {
      combined_days[day].first += g;
      ++combined_days[day].second;
    }
  }
  std::vector<double> combined_history;
  for (const auto& [day, acc] : combined_days) combined_history.push_back(acc.first / static_cast<double>(acc.second));
  GaugeReading combined{std::nullopt, window_id, combined_sum / static_cast<double>(result.sources.size()),
                        std::nullopt};
  combined.history_percentile = percentile_rank(combined.score, combined_history);
  result.gauges.push_back(combined);

  // Gauge documents carry the window boundary so reruns stay byte-identical;
  // only alert events get a wall-clock stamp.
  for (const auto& g : result.gauges) {
    detail::write_text(out / "gauges" / (scope_name(g.scope) + "_" + safe_file_stem(g.window_id) + ".json"),
                       export_gauge_json(g, cfg.threshold_percentile, result.boundary));
    if (cfg.reindex) reindex_gauge(cfg.store, g, cfg.threshold_percentile, result.boundary);
  }

  AlertSinks sinks;
  sinks.file = cfg.alert_file ? *cfg.alert_file : out / "alerts.jsonl";
  sinks.webhook_url = resolve_webhook_url(cfg.webhook_url);
  sinks.retry = cfg.retry;
  for (const auto& g : result.gauges) {
    if (!alert_decision(g, cfg.threshold_percentile)) continue;
    AlertEvent ev;
    ev.fired_at = std::chrono::duration_cast<std::chrono::milliseconds>(
                      std::chrono::system_clock::now().time_since_epoch())
                      .count();
    ev.reading = g;
    ev.threshold_percentile = cfg.threshold_percentile;
    ev.message = scope_name(g.scope) + " gauge " + format_number(round6(g.score)) + " at history percentile " +
                 format_number(round6(*g.history_percentile)) + " (threshold " +
                 format_number(cfg.threshold_percentile) + ")";
    ev.delivery = emit_alert(ev, sinks);
    result.alerts.push_back(std::move(ev));
  }

  std::vector<SourceEvaluation> evals;
  for (const auto& run : result.sources) {
    const std::string name{to_string(run.source)};
    evals.push_back(detail::to_evaluation(name, run.iforest, run.hbos, run.cblof, run.ensemble,
                                          detail::load_truth(cfg.truth_dir, name)));
  }
  result.evaluation = evaluation_report(evals);
  detail::write_text(out / "evaluation.json", result.evaluation.dump(2) + "\n");
  return result;
}

// Rebuilds the evaluation report from a finished run's label files.
inline nlohmann::ordered_json evaluate_run(const std::filesystem::path& run_dir,
                                           const std::optional<std::filesystem::path>& truth_dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(run_dir / "labels")) {
    throw Error(ErrorCode::Io, "no labels directory under " + run_dir.string());
  }
  if (truth_dir && !fs::is_directory(*truth_dir)) {
    throw Error(ErrorCode::Io, "truth directory not found: " + truth_dir->string());
  }
  auto load = [](const fs::path& path) {
    try {
      return labels_from_jsonl(detail::read_file(path));
    } catch (const Error& e) {
      throw detail::with_context(e, path.string());
    }
  };
  std::vector<SourceEvaluation> evals;
  for (auto kind : kAllSources) {
    const std::string name{to_string(kind)};
    const fs::path ens = run_dir / "labels" / (name + "_ensemble.jsonl");
    if (!fs::exists(ens)) continue;
    std::map<std::string, LabelVector> d;
    for (const char* det : {"iforest", "hbos", "cblof"}) {
      const fs::path p = run_dir / "labels" / (name + "_" + det + ".jsonl");
      if (!fs::exists(p)) throw Error(ErrorCode::Io, "missing " + p.string());
      d[det] = load(p);
    }
    const auto ensemble = load(ens);
    for (auto& [_, v] : d) v = align_labels(v, ensemble.row_ids);
    evals.push_back(detail::to_evaluation(name, d["iforest"], d["hbos"], d["cblof"], ensemble,
                                          detail::load_truth(truth_dir, name)));
  }
  if (evals.empty()) throw Error(ErrorCode::Io, "no label files under " + (run_dir / "labels").string());
  auto report = evaluation_report(evals);
  detail::write_text(run_dir / "evaluation.json", report.dump(2) + "\n");
  return report;
}

}  // namespace camlpad
