#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "neucflow/controller.hpp"
#include "neucflow/kg.hpp"
#include "neucflow/train.hpp"

namespace neucflow {

// Flat key=value run configuration. Keys mirror the per-dataset
// hyperparameter table verbatim so published settings are copy-pasteable.
// A "profile" key selects dataset defaults; explicit keys override them.
struct RunConfig {
  std::string profile;  // fb15k237 | fb15k | wn18rr | wn18 | yago310 | nell995 | toy | ""
  std::string train_file, valid_file, test_file, negatives_file, answers_file;
  std::string output_dir = "out";
  uint64_t seed = 42;

  int64_t batch_size = 100;
  int64_t n_dims = 100;
  int64_t n_dims_att = 50;
  int64_t n_steps_of_u_flow = 1;
  int64_t n_steps_of_c_flow = 6;
  int64_t max_sampled_edges_per_step = 10000;
  int64_t max_sampled_edges_per_node = 200;
  int64_t max_attended_nodes_per_step = 20;
  int64_t max_seen_nodes_per_step = 200;
  double learning_rate = 1e-3;
  double grad_clipnorm = 1.0;
  int64_t n_epochs = 1;
  double epoch_fraction = 1.0;
  std::string checkpoint_fractions = "0.3,0.5,0.7,1.0";  // in epochs
  std::string masking = "standard";                      // standard | cutoff
  bool add_inverse_relations = true;
  bool add_self_loops = true;
  bool cflow_update_seen_only = false;
  std::string tie_rule = "mean";  // mean | pessimistic | optimistic
  bool eval_both_directions = true;
  int64_t eval_max_queries = 0;  // 0 = all
  int64_t n_threads = 1;
  double subgraph_prune_threshold = 0.01;

  bool operator==(const RunConfig&) const = default;

  Horizons horizons() const {
    Horizons hz;
    hz.max_attended = max_attended_nodes_per_step;
    hz.max_seen = max_seen_nodes_per_step;
    hz.max_edges_per_node = max_sampled_edges_per_node;
    hz.c_steps = static_cast<int32_t>(n_steps_of_c_flow);
    hz.u_steps = static_cast<int32_t>(n_steps_of_u_flow);
    hz.u_sample_budget = max_sampled_edges_per_step;
    hz.n_dims = n_dims;
    hz.n_dims_att = n_dims_att;
    hz.update_seen_only = cflow_update_seen_only;
    return hz;
  }

  MaskMode mask_mode() const {
    if (masking == "standard") return MaskMode::Standard;
    if (masking == "cutoff") return MaskMode::Cutoff;
    detail::fail("RunConfig", "masking: expected standard or cutoff, got " + masking);
  }

  template <class Real>
  TrainConfig<Real> train_config() const {
    TrainConfig<Real> tc;
    tc.batch_size = batch_size;
    tc.learning_rate = learning_rate;
    tc.grad_clipnorm = grad_clipnorm;
    tc.n_epochs = static_cast<int32_t>(n_epochs);
    tc.epoch_fraction = epoch_fraction;
    tc.masking = mask_mode();
    tc.horizons = horizons();
    tc.seed = seed;
    tc.n_threads = static_cast<int>(n_threads);
    return tc;
  }

  std::vector<double> checkpoint_marks() const {
    std::vector<double> out;
    std::stringstream ss(checkpoint_fractions);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (item.empty()) continue;
      size_t used = 0;
      double v = std::stod(item, &used);
      if (used != item.size() || !(v > 0.0))
        detail::fail("RunConfig", "checkpoint_fractions: bad entry " + item);
      out.push_back(v);
    }
    return out;
  }

  void validate() const {
    horizons().validate();
    (void)mask_mode();
    (void)tie_rule_name_check();
    (void)checkpoint_marks();
    if (batch_size < 1) detail::fail("RunConfig", "batch_size must be >= 1");
    if (n_epochs < 1) detail::fail("RunConfig", "n_epochs must be >= 1");
    if (!(learning_rate > 0.0)) detail::fail("RunConfig", "learning_rate must be > 0");
    if (!(epoch_fraction > 0.0) || epoch_fraction > 1.0)
      detail::fail("RunConfig", "epoch_fraction must be in (0, 1]");
    if (n_threads < 1) detail::fail("RunConfig", "n_threads must be >= 1");
    if (eval_max_queries < 0) detail::fail("RunConfig", "eval_max_queries must be >= 0");
    if (subgraph_prune_threshold < 0.0) detail::fail("RunConfig", "subgraph_prune_threshold must be >= 0");
  }

 private:
  bool tie_rule_name_check() const {
    if (tie_rule != "mean" && tie_rule != "pessimistic" && tie_rule != "optimistic")
      detail::fail("RunConfig", "tie_rule: expected mean, pessimistic or optimistic, got " + tie_rule);
    return true;
  }
};

namespace detail {

inline RunConfig profile_defaults(const std::string& name) {
  RunConfig c;
  c.profile = name;
  if (name.empty()) return c;
  if (name == "fb15k237") {
    c.batch_size = 80;
    c.n_steps_of_u_flow = 2;
    c.n_steps_of_c_flow = 6;
    c.masking = "cutoff";
  } else if (name == "fb15k") {
    c.batch_size = 80;
    c.n_steps_of_u_flow = 1;
    c.n_steps_of_c_flow = 6;
  } else if (name == "wn18rr") {
    c.batch_size = 100;
    c.n_steps_of_u_flow = 2;
    c.n_steps_of_c_flow = 8;
  } else if (name == "wn18") {
    c.batch_size = 100;
    c.n_steps_of_u_flow = 1;
    c.n_steps_of_c_flow = 8;
  } else if (name == "yago310") {
    c.batch_size = 100;
    c.n_steps_of_u_flow = 1;
    c.n_steps_of_c_flow = 6;
    c.learning_rate = 1e-4;
  } else if (name == "nell995") {
    c.batch_size = 10;
    c.n_dims = 200;
    c.n_dims_att = 200;
    c.n_steps_of_u_flow = 1;
    c.n_steps_of_c_flow = 5;
    c.max_attended_nodes_per_step = 100;
    c.max_sampled_edges_per_node = 1000;
    c.max_seen_nodes_per_step = 1000;
    c.n_epochs = 3;
    c.add_inverse_relations = false;  // reciprocal triples ship with the data
    c.eval_both_directions = false;
  } else if (name == "toy") {
    c.batch_size = 32;
    c.n_dims = 32;
    c.n_dims_att = 16;
    c.n_steps_of_u_flow = 1;
    c.n_steps_of_c_flow = 2;  // matches the planted 2-hop rule
    c.max_sampled_edges_per_step = 2000;
    c.max_sampled_edges_per_node = 48;
    c.max_attended_nodes_per_step = 3;
    c.max_seen_nodes_per_step = 32;
    c.learning_rate = 7e-3;
    c.n_epochs = 6;
  } else {
    fail("load_config", "unknown profile " + name);
  }
  return c;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  fail("load_config", key + ": expected true or false, got " + v);
}

inline int64_t parse_int(const std::string& key, const std::string& v) {
  size_t used = 0;
  int64_t out = 0;
  try {
    out = std::stoll(v, &used);
  } catch (const std::exception&) {
    fail("load_config", key + ": expected an integer, got " + v);
  }
  if (used != v.size()) fail("load_config", key + ": expected an integer, got " + v);
  return out;
}

inline uint64_t parse_u64(const std::string& key, const std::string& v) {
  size_t used = 0;
  uint64_t out = 0;
  try {
    out = std::stoull(v, &used);
  } catch (const std::exception&) {
    fail("load_config", key + ": expected an unsigned integer, got " + v);
  }
  if (used != v.size()) fail("load_config", key + ": expected an unsigned integer, got " + v);
  return out;
}

inline double parse_double(const std::string& key, const std::string& v) {
  size_t used = 0;
  double out = 0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    fail("load_config", key + ": expected a number, got " + v);
  }
  if (used != v.size()) fail("load_config", key + ": expected a number, got " + v);
  return out;
}

inline std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace detail

inline RunConfig load_config(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> pairs;
  std::istringstream in(text);
  std::string line;
  int64_t lineno = 0;
  std::string profile_name;
  while (std::getline(in, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      detail::fail("load_config", "line " + std::to_string(lineno) + ": expected key = value");
    std::string key = detail::trim(line.substr(0, eq));
    std::string value = detail::trim(line.substr(eq + 1));
    if (key.empty()) detail::fail("load_config", "line " + std::to_string(lineno) + ": empty key");
    if (key == "profile")
      profile_name = value;
    else
      pairs.emplace_back(key, value);
  }

  RunConfig c = detail::profile_defaults(profile_name);
  for (const auto& [key, value] : pairs) {
    if (key == "train_file") c.train_file = value;
    else if (key == "valid_file") c.valid_file = value;
    else if (key == "test_file") c.test_file = value;
    else if (key == "negatives_file") c.negatives_file = value;
    else if (key == "answers_file") c.answers_file = value;
    else if (key == "output_dir") c.output_dir = value;
    else if (key == "seed") c.seed = detail::parse_u64(key, value);
    else if (key == "batch_size") c.batch_size = detail::parse_int(key, value);
    else if (key == "n_dims") c.n_dims = detail::parse_int(key, value);
    else if (key == "n_dims_att") c.n_dims_att = detail::parse_int(key, value);
    else if (key == "n_steps_of_u_flow") c.n_steps_of_u_flow = detail::parse_int(key, value);
    else if (key == "n_steps_of_c_flow") c.n_steps_of_c_flow = detail::parse_int(key, value);
    else if (key == "max_sampled_edges_per_step") c.max_sampled_edges_per_step = detail::parse_int(key, value);
    else if (key == "max_sampled_edges_per_node") c.max_sampled_edges_per_node = detail::parse_int(key, value);
    else if (key == "max_attended_nodes_per_step") c.max_attended_nodes_per_step = detail::parse_int(key, value);
    else if (key == "max_seen_nodes_per_step") c.max_seen_nodes_per_step = detail::parse_int(key, value);
    else if (key == "learning_rate") c.learning_rate = detail::parse_double(key, value);
    else if (key == "grad_clipnorm") c.grad_clipnorm = detail::parse_double(key, value);
    else if (key == "n_epochs") c.n_epochs = detail::parse_int(key, value);
    else if (key == "epoch_fraction") c.epoch_fraction = detail::parse_double(key, value);
    else if (key == "checkpoint_fractions") c.checkpoint_fractions = value;
    else if (key == "masking") c.masking = value;
    else if (key == "add_inverse_relations") c.add_inverse_relations = detail::parse_bool(key, value);
    else if (key == "add_self_loops") c.add_self_loops = detail::parse_bool(key, value);
    else if (key == "cflow_update_seen_only") c.cflow_update_seen_only = detail::parse_bool(key, value);
    else if (key == "tie_rule") c.tie_rule = value;
    else if (key == "eval_both_directions") c.eval_both_directions = detail::parse_bool(key, value);
    else if (key == "eval_max_queries") c.eval_max_queries = detail::parse_int(key, value);
    else if (key == "n_threads") c.n_threads = detail::parse_int(key, value);
    else if (key == "subgraph_prune_threshold") c.subgraph_prune_threshold = detail::parse_double(key, value);
    else detail::fail("load_config", "unknown key " + key);
  }
  c.validate();
  return c;
}

inline std::string serialize_config(const RunConfig& c) {
  std::ostringstream os;
  os.precision(17);
  if (!c.profile.empty()) os << "profile = " << c.profile << "\n";
  auto put = [&](const char* k, const auto& v) { os << k << " = " << v << "\n"; };
  auto put_bool = [&](const char* k, bool v) { os << k << " = " << (v ? "true" : "false") << "\n"; };
  put("train_file", c.train_file);
  put("valid_file", c.valid_file);
  put("test_file", c.test_file);
  put("negatives_file", c.negatives_file);
  put("answers_file", c.answers_file);
  put("output_dir", c.output_dir);
  put("seed", c.seed);
  put("batch_size", c.batch_size);
  put("n_dims", c.n_dims);
  put("n_dims_att", c.n_dims_att);
  put("n_steps_of_u_flow", c.n_steps_of_u_flow);
  put("n_steps_of_c_flow", c.n_steps_of_c_flow);
  put("max_sampled_edges_per_step", c.max_sampled_edges_per_step);
  put("max_sampled_edges_per_node", c.max_sampled_edges_per_node);
  put("max_attended_nodes_per_step", c.max_attended_nodes_per_step);
  put("max_seen_nodes_per_step", c.max_seen_nodes_per_step);
  put("learning_rate", c.learning_rate);
  put("grad_clipnorm", c.grad_clipnorm);
  put("n_epochs", c.n_epochs);
  put("epoch_fraction", c.epoch_fraction);
  put("checkpoint_fractions", c.checkpoint_fractions);
  put("masking", c.masking);
  put_bool("add_inverse_relations", c.add_inverse_relations);
  put_bool("add_self_loops", c.add_self_loops);
  put_bool("cflow_update_seen_only", c.cflow_update_seen_only);
  put("tie_rule", c.tie_rule);
  put_bool("eval_both_directions", c.eval_both_directions);
  put("eval_max_queries", c.eval_max_queries);
  put("n_threads", c.n_threads);
  put("subgraph_prune_threshold", c.subgraph_prune_threshold);
  return os.str();
}

// Config from disk; referenced data paths must exist.
inline RunConfig load_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) detail::fail_missing("load_config", path);
  std::stringstream buf;
  buf << is.rdbuf();
  RunConfig c = load_config(buf.str());
  for (const std::string* p : {&c.train_file, &c.valid_file, &c.test_file, &c.negatives_file, &c.answers_file}) {
    if (p->empty()) continue;
    std::ifstream probe(*p);
    if (!probe) detail::fail_missing("load_config", *p);
  }
  return c;
}

}  // namespace neucflow
