#pragma once

// Command layer behind the CLI. Each command is a plain function so tests
// drive the same code paths as the binary. All commands work in f32, the
// checkpoint precision.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "neucflow/checkpoint.hpp"
#include "neucflow/config.hpp"
#include "neucflow/eval.hpp"
#include "neucflow/export_dot.hpp"
#include "neucflow/synthetic.hpp"
#include "neucflow/train.hpp"

namespace neucflow {

struct Dataset {
  Vocab entities, relations;
  std::vector<Triple> train, valid, test;
  Graph graph;
};

inline Dataset load_dataset(const RunConfig& cfg) {
  if (cfg.train_file.empty()) detail::fail("load_dataset", "train_file is required");
  Dataset d;
  d.train = load_triples_file(cfg.train_file, d.entities, d.relations);
  if (!cfg.valid_file.empty()) d.valid = load_triples_file(cfg.valid_file, d.entities, d.relations);
  if (!cfg.test_file.empty()) d.test = load_triples_file(cfg.test_file, d.entities, d.relations);
  d.graph = Graph::build(d.entities.size(), d.relations.size(), d.train, cfg.add_inverse_relations,
                         cfg.add_self_loops);
  return d;
}

inline ModelDims model_dims(const RunConfig& cfg, const Dataset& d) {
  ModelDims dims;
  dims.n_entities = d.entities.size();
  dims.n_relations = d.graph.num_relations();
  dims.n_dims = cfg.n_dims;
  dims.n_dims_att = cfg.n_dims_att;
  return dims;
}

namespace detail {

inline void ensure_dir(const std::string& dir) {
  if (!dir.empty()) std::filesystem::create_directories(dir);
}

inline std::string fmt_full(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

inline std::string fmt_short(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace detail

// Ordered "metric<TAB>value" report.
class MetricsReport {
 public:
  void put(const std::string& name, double v) { rows_.emplace_back(name, detail::fmt_full(v)); }
  void put_int(const std::string& name, int64_t v) { rows_.emplace_back(name, std::to_string(v)); }
  void put_text(const std::string& name, const std::string& v) { rows_.emplace_back(name, v); }

  double value(const std::string& name) const {
    for (const auto& [k, v] : rows_)
      if (k == name) return std::stod(v);
    detail::fail("MetricsReport", "no metric named " + name);
  }
  bool has(const std::string& name) const {
    for (const auto& [k, v] : rows_)
      if (k == name) return true;
    return false;
  }

  std::string text() const {
    std::ostringstream os;
    for (const auto& [k, v] : rows_) os << k << '\t' << v << '\n';
    return os.str();
  }

  void write(const std::string& path) const {
    std::ofstream os(path, std::ios::trunc);
    if (!os) detail::fail("MetricsReport", "cannot write " + path);
    os << text();
    if (!os) detail::fail("MetricsReport", "write failed for " + path);
  }

 private:
  std::vector<std::pair<std::string, std::string>> rows_;
};

inline void put_diagnostics(MetricsReport& rep, const AttentionDiagnostics& diag) {
  for (size_t t = 0; t < diag.entropy.size(); ++t) {
    std::string suffix = "_t" + std::to_string(t);
    rep.put("attn_entropy" + suffix, diag.entropy[t]);
    rep.put("attn_top1" + suffix, diag.top1[t]);
    rep.put("attn_top3" + suffix, diag.top3[t]);
    rep.put("attn_top5" + suffix, diag.top5[t]);
  }
}

struct TrainOutcome {
  EpochStats last_epoch;
  std::vector<std::string> checkpoint_files;
  std::string final_checkpoint;
  MetricsReport metrics;
  std::string loss_log_path;
};

// Train from scratch, logging per-batch loss and snapshotting the model when
// the run crosses each checkpoint mark (in epoch units). Ends with a final
// checkpoint and a validation metrics report when a validation split exists.
inline TrainOutcome cmd_train(const RunConfig& cfg, std::ostream& log = std::cerr) {
  cfg.validate();
  Dataset data = load_dataset(cfg);
  ModelDims dims = model_dims(cfg, data);
  ParamStore<float> params = init_model_params<float>(dims, cfg.seed);
  AdamState<float> opt = AdamState<float>::init(params, cfg.learning_rate, cfg.grad_clipnorm);
  TrainConfig<float> tc = cfg.train_config<float>();
  std::vector<QueryInput> queries = training_queries(data.graph);
  if (queries.empty()) detail::fail("cmd_train", "no training queries");

  detail::ensure_dir(cfg.output_dir);
  TrainOutcome out;
  out.loss_log_path = cfg.output_dir + "/loss_log.csv";
  std::ofstream loss_log(out.loss_log_path, std::ios::trunc);
  if (!loss_log) detail::fail("cmd_train", "cannot write " + out.loss_log_path);
  // wall-clock time stays out of this file so reruns reproduce it byte for byte
  loss_log << "step,loss,unvisited_rate\n";
  loss_log.precision(17);

  std::vector<double> marks = cfg.checkpoint_marks();
  std::sort(marks.begin(), marks.end());
  size_t next_mark = 0;

  CheckpointMeta meta;
  meta.dims = dims;
  meta.rng_state = cfg.seed;
  meta.config_echo = serialize_config(cfg);

  BatchHook hook = [&](const BatchEvent& ev) {
    loss_log << ev.global_step << ',' << ev.loss << ',' << ev.unvisited_rate << '\n';
    while (next_mark < marks.size() && ev.epoch_progress >= marks[next_mark] - 1e-9) {
      std::string path =
          cfg.output_dir + "/ckpt_epoch_" + detail::fmt_short(marks[next_mark]) + ".ckpt";
      meta.next_epoch = ev.epoch;
      meta.batches_done = ev.batch_index + 1;
      save_checkpoint(path, params, opt, meta);
      out.checkpoint_files.push_back(path);
      log << "checkpoint " << path << " at " << ev.epoch_progress << " epochs\n";
      ++next_mark;
    }
  };

  EpochStats stats;
  for (int64_t e = 0; e < cfg.n_epochs; ++e) {
    auto t0 = std::chrono::steady_clock::now();
    stats = train_epoch(data.graph, queries, params, opt, tc, e, hook);
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    log << "epoch " << e << " loss " << stats.mean_loss << " unvisited " << stats.unvisited_rate
        << " seconds " << secs << "\n";
  }
  out.last_epoch = stats;

  meta.next_epoch = cfg.n_epochs;
  meta.batches_done = 0;
  out.final_checkpoint = cfg.output_dir + "/model.ckpt";
  save_checkpoint(out.final_checkpoint, params, opt, meta);
  out.checkpoint_files.push_back(out.final_checkpoint);

  out.metrics.put("train_loss", stats.mean_loss);
  out.metrics.put("train_unvisited_rate", stats.unvisited_rate);
  out.metrics.put_int("train_batches", stats.batches);
  out.metrics.put_int("train_queries", stats.queries);

  if (!data.valid.empty()) {
    KnownTriples known(data.entities.size(), data.graph.num_relations());
    bool inv = data.graph.has_inverse();
    known.add_split(data.train, inv, data.graph.num_base_relations());
    known.add_split(data.valid, inv, data.graph.num_base_relations());
    known.add_split(data.test, inv, data.graph.num_base_relations());
    known.finalize();
    EvalOptions eo;
    eo.tie = tie_rule_from_string(cfg.tie_rule);
    eo.both_directions = cfg.eval_both_directions;
    eo.max_queries = cfg.eval_max_queries;
    eo.n_threads = static_cast<int>(cfg.n_threads);
    eo.seed = cfg.seed;
    EvalOutput ev = evaluate_ranking(data.graph, data.valid, known, params, cfg.horizons(), eo);
    out.metrics.put("valid_hits1", ev.metrics.h1);
    out.metrics.put("valid_hits3", ev.metrics.h3);
    out.metrics.put("valid_hits10", ev.metrics.h10);
    out.metrics.put("valid_mrr", ev.metrics.mrr);
    out.metrics.put_int("valid_cases", ev.metrics.n_cases);
    out.metrics.put("chance_mrr", zero_scorer_metrics(data.graph, data.valid, known, eo.both_directions,
                                                      eo.max_queries, eo.tie)
                                      .mrr);
    put_diagnostics(out.metrics, ev.diag);
  }
  out.metrics.write(cfg.output_dir + "/metrics.tsv");
  return out;
}

inline ParamStore<float> load_params_checked(const std::string& checkpoint_path, const RunConfig& cfg,
                                             const Dataset& data, AdamState<float>* opt_out = nullptr) {
  Checkpoint ck = load_checkpoint(checkpoint_path);
  ModelDims want = model_dims(cfg, data);
  const ModelDims& got = ck.meta.dims;
  if (got.n_entities != want.n_entities || got.n_relations != want.n_relations ||
      got.n_dims != want.n_dims || got.n_dims_att != want.n_dims_att)
    detail::fail("load_checkpoint",
                 "checkpoint shape mismatch: file has entities/relations/dims/att " +
                     std::to_string(got.n_entities) + "/" + std::to_string(got.n_relations) + "/" +
                     std::to_string(got.n_dims) + "/" + std::to_string(got.n_dims_att) +
                     ", config wants " + std::to_string(want.n_entities) + "/" +
                     std::to_string(want.n_relations) + "/" + std::to_string(want.n_dims) + "/" +
                     std::to_string(want.n_dims_att));
  if (opt_out) *opt_out = std::move(ck.opt);
  return std::move(ck.params);
}

struct EvaluateOutcome {
  MetricsReport metrics;
  EvalOutput ranking;  // empty when MAP mode ran
  MapResult map;
  bool map_mode = false;
};

// Filtered ranking on the chosen split, or MAP when a negatives file is
// configured. split: "test" (default) or "valid".
inline EvaluateOutcome cmd_evaluate(const RunConfig& cfg, const std::string& checkpoint_path,
                                    const std::string& split = "test") {
  cfg.validate();
  Dataset data = load_dataset(cfg);
  ParamStore<float> params = load_params_checked(checkpoint_path, cfg, data);

  EvalOptions eo;
  eo.tie = tie_rule_from_string(cfg.tie_rule);
  eo.both_directions = cfg.eval_both_directions;
  eo.max_queries = cfg.eval_max_queries;
  eo.n_threads = static_cast<int>(cfg.n_threads);
  eo.seed = cfg.seed;

  EvaluateOutcome out;
  if (!cfg.negatives_file.empty()) {
    out.map_mode = true;
    std::ifstream is(cfg.negatives_file);
    if (!is) detail::fail_missing("cmd_evaluate", cfg.negatives_file);
    std::vector<NegativesCase> neg =
        load_negatives(is, cfg.negatives_file, data.entities, data.relations);
    for (const NegativesCase& c : neg) {
      if (c.head >= data.graph.num_entities())
        detail::fail("cmd_evaluate", "negatives mention entity absent from the training graph: " +
                                         data.entities.name(c.head));
      if (c.rel >= data.graph.num_base_relations())
        detail::fail("cmd_evaluate", "negatives mention relation absent from the training graph: " +
                                         data.relations.name(c.rel));
      for (const auto& [cand, pos] : c.candidates)
        if (cand >= data.graph.num_entities())
          detail::fail("cmd_evaluate", "negatives mention entity absent from the training graph: " +
                                           data.entities.name(cand));
    }
    out.map = evaluate_map(data.graph, neg, params, cfg.horizons(), eo);
    out.metrics.put("map", out.map.map);
    out.metrics.put_int("map_cases", out.map.used);
    out.metrics.put_int("map_skipped", out.map.skipped);
  } else {
    const std::vector<Triple>& eval_triples =
        split == "valid" ? data.valid : (split == "test" ? data.test : data.valid);
    if (split != "valid" && split != "test")
      detail::fail("cmd_evaluate", "split must be valid or test, got " + split);
    if (eval_triples.empty()) detail::fail("cmd_evaluate", "split " + split + " is empty");
    KnownTriples known(data.entities.size(), data.graph.num_relations());
    bool inv = data.graph.has_inverse();
    known.add_split(data.train, inv, data.graph.num_base_relations());
    known.add_split(data.valid, inv, data.graph.num_base_relations());
    known.add_split(data.test, inv, data.graph.num_base_relations());
    known.finalize();
    out.ranking = evaluate_ranking(data.graph, eval_triples, known, params, cfg.horizons(), eo);
    out.metrics.put("hits1", out.ranking.metrics.h1);
    out.metrics.put("hits3", out.ranking.metrics.h3);
    out.metrics.put("hits10", out.ranking.metrics.h10);
    out.metrics.put("mrr", out.ranking.metrics.mrr);
    out.metrics.put_int("cases", out.ranking.metrics.n_cases);
    out.metrics.put("chance_mrr", zero_scorer_metrics(data.graph, eval_triples, known,
                                                      eo.both_directions, eo.max_queries, eo.tie)
                                      .mrr);
    put_diagnostics(out.metrics, out.ranking.diag);
  }
  detail::ensure_dir(cfg.output_dir);
  out.metrics.write(cfg.output_dir + "/metrics.tsv");
  return out;
}

namespace detail {

inline int64_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<int64_t> prev(b.size() + 1), cur(b.size() + 1);
  for (size_t j = 0; j <= b.size(); ++j) prev[j] = static_cast<int64_t>(j);
  for (size_t i = 1; i <= a.size(); ++i) {
    cur[0] = static_cast<int64_t>(i);
    for (size_t j = 1; j <= b.size(); ++j) {
      int64_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

inline std::string nearest_matches(const Vocab& vocab, const std::string& query, size_t k = 5) {
  std::vector<std::pair<int64_t, std::string>> scored;
  scored.reserve(static_cast<size_t>(vocab.size()));
  for (const std::string& name : vocab.names) scored.emplace_back(edit_distance(query, name), name);
  std::sort(scored.begin(), scored.end());
  std::string out;
  for (size_t i = 0; i < std::min(k, scored.size()); ++i) {
    if (i) out += ", ";
    out += scored[i].second;
  }
  return out;
}

inline int32_t lookup_or_suggest(const Vocab& vocab, const std::string& name, const std::string& kind) {
  int32_t id = vocab.find(name);
  if (id >= 0) return id;
  fail("cmd_extract", "unknown " + kind + " \"" + name + "\"; nearest matches: " +
                          nearest_matches(vocab, name));
}

}  // namespace detail

struct ExtractOutcome {
  SubgraphExport full;
  SubgraphExport pruned;
  std::vector<std::string> files;
  FlowTrace trace;
};

// Runs one query and writes the visited subgraph, full and attention-pruned,
// as DOT and JSON under output_dir.
inline ExtractOutcome cmd_extract(const RunConfig& cfg, const std::string& checkpoint_path,
                                  const std::string& head_name, const std::string& rel_name,
                                  const std::string& tail_name = "") {
  cfg.validate();
  Dataset data = load_dataset(cfg);
  ParamStore<float> params = load_params_checked(checkpoint_path, cfg, data);

  QueryInput q;
  q.head = detail::lookup_or_suggest(data.entities, head_name, "entity");
  q.rel = detail::lookup_or_suggest(data.relations, rel_name, "relation");
  q.tail = tail_name.empty() ? -1 : detail::lookup_or_suggest(data.entities, tail_name, "entity");

  GraphView view(data.graph);
  Horizons hz = cfg.horizons();
  SplitRng rng(cfg.seed);
  TapeT<float> tape;
  ModelVars<float> mv = bind_params(tape, params);
  UFlowRun<float> uflow = run_uflow(tape, mv, view, hz.u_steps, hz.u_sample_budget, rng.split(0));
  QueryRun<float> qr = run_query(tape, mv, view, q, hz, uflow.states, rng.split(1));

  ExtractOutcome out;
  out.trace = qr.trace;
  out.full = build_subgraph_export(out.trace, data.graph, data.entities, data.relations);
  out.pruned = prune_export(out.full, cfg.subgraph_prune_threshold);

  detail::ensure_dir(cfg.output_dir);
  std::string base = cfg.output_dir + "/subgraph_" + head_name + "_" + rel_name;
  auto emit = [&](const SubgraphExport& sg, const std::string& suffix) {
    std::string dot_path = base + suffix + ".dot";
    std::ofstream dot(dot_path, std::ios::trunc);
    if (!dot) detail::fail("cmd_extract", "cannot write " + dot_path);
    write_dot(dot, sg);
    out.files.push_back(dot_path);
    std::string json_path = base + suffix + ".json";
    std::ofstream js(json_path, std::ios::trunc);
    if (!js) detail::fail("cmd_extract", "cannot write " + json_path);
    write_subgraph_json(js, sg);
    out.files.push_back(json_path);
  };
  emit(out.full, "_full");
  emit(out.pruned, "_pruned");
  return out;
}

struct SweepRow {
  std::string axis;
  int64_t value = 0;
  RankMetrics metrics;
  double train_seconds = 0.0;
  double eval_seconds = 0.0;
  int64_t max_edges_scored = 0;
  int64_t max_message_pairs = 0;
  int64_t max_visited_added = 0;
  double mean_pair_density = 0.0;
};

struct SweepOutcome {
  std::vector<SweepRow> rows;
  std::string csv_path;
};

namespace detail {

inline void apply_axis(RunConfig& cfg, const std::string& axis, int64_t value) {
  if (axis == "max_sampled_edges_per_node") cfg.max_sampled_edges_per_node = value;
  else if (axis == "max_seen_nodes_per_step") cfg.max_seen_nodes_per_step = value;
  else if (axis == "max_attended_nodes_per_step") cfg.max_attended_nodes_per_step = value;
  else if (axis == "n_steps_of_c_flow") cfg.n_steps_of_c_flow = value;
  else if (axis == "batch_size") cfg.batch_size = value;
  else
    fail("cmd_sweep",
         "axis must be one of max_sampled_edges_per_node, max_seen_nodes_per_step, "
         "max_attended_nodes_per_step, n_steps_of_c_flow, batch_size; got " + axis);
}

}  // namespace detail

// For each axis value: time a fixed training-query budget, then score a fixed
// validation subset with the same untouched starting parameters, recording the
// complexity counters observed during evaluation.
inline SweepOutcome cmd_sweep(const RunConfig& base_cfg, const std::string& axis,
                              const std::vector<int64_t>& values,
                              const std::string& checkpoint_path = "",
                              std::ostream& log = std::cerr) {
  if (values.empty()) detail::fail("cmd_sweep", "no axis values given");
  base_cfg.validate();
  {
    RunConfig probe = base_cfg;
    detail::apply_axis(probe, axis, values.front());
  }
  Dataset data = load_dataset(base_cfg);
  const std::vector<Triple>& val_split = !data.valid.empty() ? data.valid : data.test;
  if (val_split.empty()) detail::fail("cmd_sweep", "need a valid or test split for metrics");

  ParamStore<float> base_params;
  if (checkpoint_path.empty())
    base_params = init_model_params<float>(model_dims(base_cfg, data), base_cfg.seed);
  else
    base_params = load_params_checked(checkpoint_path, base_cfg, data);

  KnownTriples known(data.entities.size(), data.graph.num_relations());
  bool inv = data.graph.has_inverse();
  known.add_split(data.train, inv, data.graph.num_base_relations());
  known.add_split(data.valid, inv, data.graph.num_base_relations());
  known.add_split(data.test, inv, data.graph.num_base_relations());
  known.finalize();

  std::vector<QueryInput> train_q = training_queries(data.graph);
  int64_t budget = std::min<int64_t>(static_cast<int64_t>(train_q.size()),
                                     std::max<int64_t>(base_cfg.batch_size, 32));

  SweepOutcome out;
  for (int64_t v : values) {
    RunConfig cfg = base_cfg;
    detail::apply_axis(cfg, axis, v);
    cfg.validate();
    SweepRow row;
    row.axis = axis;
    row.value = v;

    // fixed query budget through the full train path, params copied per row
    {
      ParamStore<float> params = base_params;
      AdamState<float> opt = AdamState<float>::init(params, cfg.learning_rate, cfg.grad_clipnorm);
      TrainConfig<float> tc = cfg.train_config<float>();
      std::vector<QueryInput> chunk(train_q.begin(), train_q.begin() + budget);
      auto t0 = std::chrono::steady_clock::now();
      int64_t done = 0;
      while (done < budget) {
        int64_t hi = std::min(budget, done + cfg.batch_size);
        std::vector<QueryInput> batch(chunk.begin() + done, chunk.begin() + hi);
        std::vector<Triple> batch_triples;
        for (const QueryInput& q : batch) batch_triples.push_back({q.head, q.rel, q.tail});
        GraphView view = mask_batch_edges(data.graph, batch_triples, tc.masking);
        BatchResult<float> res = run_batch(view, batch, params, tc.horizons,
                                           SplitRng(cfg.seed).split(900 + static_cast<uint64_t>(done)),
                                           /*want_grads=*/true, tc.n_threads);
        adam_step(params, std::move(res.grads), opt);
        done = hi;
      }
      row.train_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }

    EvalOptions eo;
    eo.tie = tie_rule_from_string(cfg.tie_rule);
    eo.both_directions = cfg.eval_both_directions;
    eo.max_queries = cfg.eval_max_queries > 0 ? cfg.eval_max_queries : 25;
    eo.n_threads = static_cast<int>(cfg.n_threads);
    eo.seed = cfg.seed;
    auto t0 = std::chrono::steady_clock::now();
    EvalOutput ev = evaluate_ranking(data.graph, val_split, known, base_params, cfg.horizons(), eo);
    row.eval_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    row.metrics = ev.metrics;
    double density = 0.0;
    for (const FlowTrace& tr : ev.traces) {
      ComplexityReport cr = complexity_report(tr, cfg.horizons());
      row.max_edges_scored = std::max(row.max_edges_scored, cr.max_edges_scored);
      row.max_message_pairs = std::max(row.max_message_pairs, cr.max_message_pairs);
      row.max_visited_added = std::max(row.max_visited_added, cr.max_visited_added);
      density += cr.mean_pair_density;
    }
    row.mean_pair_density = density / static_cast<double>(ev.traces.size());
    out.rows.push_back(row);
    log << "sweep " << axis << "=" << v << " train_s " << row.train_seconds << " mrr "
        << row.metrics.mrr << "\n";
  }

  detail::ensure_dir(base_cfg.output_dir);
  out.csv_path = base_cfg.output_dir + "/sweep_" + axis + ".csv";
  std::ofstream csv(out.csv_path, std::ios::trunc);
  if (!csv) detail::fail("cmd_sweep", "cannot write " + out.csv_path);
  csv << "axis,value,hits1,hits3,hits10,mrr,train_seconds,eval_seconds,max_edges_scored,"
         "max_message_pairs,max_visited_added,mean_pair_density\n";
  csv.precision(17);
  for (const SweepRow& r : out.rows)
    csv << r.axis << ',' << r.value << ',' << r.metrics.h1 << ',' << r.metrics.h3 << ','
        << r.metrics.h10 << ',' << r.metrics.mrr << ',' << r.train_seconds << ',' << r.eval_seconds
        << ',' << r.max_edges_scored << ',' << r.max_message_pairs << ',' << r.max_visited_added
        << ',' << r.mean_pair_density << '\n';
  return out;
}

// Corpus statistics for the configured splits, reported per eval split.
inline MetricsReport cmd_stats(const RunConfig& cfg) {
  cfg.validate();
  Dataset data = load_dataset(cfg);
  MetricsReport rep;
  rep.put_int("n_entities", data.entities.size());
  rep.put_int("n_relations", data.relations.size());
  rep.put_int("n_train", static_cast<int64_t>(data.train.size()));
  auto put_split = [&](const std::string& name, const std::vector<Triple>& split) {
    if (split.empty()) return;
    DatasetStats st = dataset_stats(data.graph, split);
    rep.put_int("n_" + name, st.n_eval);
    rep.put(name + "_pct_multi_edge", st.pct_multi_edge);
    rep.put(name + "_avg_distance", st.avg_distance);
    rep.put_int(name + "_unreachable", st.unreachable);
  };
  put_split("valid", data.valid);
  put_split("test", data.test);
  detail::ensure_dir(cfg.output_dir);
  rep.write(cfg.output_dir + "/stats.tsv");
  return rep;
}

struct SynthOutcome {
  std::string train_path, test_path, answers_path;
  SyntheticData data;
};

// Generates the planted-rule toy corpus and writes train/test splits plus the
// full composite answer set.
inline SynthOutcome cmd_synth(const SyntheticSpec& spec, const std::string& out_dir) {
  SynthOutcome out;
  out.data = generate_synthetic(spec);
  detail::ensure_dir(out_dir);
  out.train_path = out_dir + "/train.tsv";
  out.test_path = out_dir + "/test.tsv";
  out.answers_path = out_dir + "/answers.tsv";
  write_triples_tsv(out.train_path, out.data.train, out.data.entities, out.data.relations);
  write_triples_tsv(out.test_path, out.data.test, out.data.entities, out.data.relations);
  write_triples_tsv(out.answers_path, out.data.composites, out.data.entities, out.data.relations);
  return out;
}

}  // namespace neucflow
