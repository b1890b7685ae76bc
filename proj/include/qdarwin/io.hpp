#pragma once

#include <charconv>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "qdarwin/darwinism.hpp"

namespace qdarwin {
namespace io {

using json = nlohmann::ordered_json;

/// Locale-independent shortest round-trip decimal form.
inline std::string format_double(double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

// ---------------------------------------------------------------------------
// Channel serialization: {in_dim, out_dims, choi: {re, im}}, bit-exact at
// double precision.
// ---------------------------------------------------------------------------

inline json matrix_to_json(const cmat& m) {
  json re = json::array(), im = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row_re = json::array(), row_im = json::array();
    for (Index j = 0; j < m.cols(); ++j) {
      row_re.push_back(m(i, j).real());
      row_im.push_back(m(i, j).imag());
    }
    re.push_back(std::move(row_re));
    im.push_back(std::move(row_im));
  }
  return json{{"re", std::move(re)}, {"im", std::move(im)}};
}

inline cmat matrix_from_json(const json& j, const std::string& where) {
  if (!j.contains("re") || !j.contains("im"))
    throw ValidationError(where + ": expected re/im arrays");
  const auto& re = j.at("re");
  const auto& im = j.at("im");
  if (!re.is_array() || re.empty() || re.size() != im.size())
    throw ValidationError(where + ": re/im shape mismatch");
  Index rows = static_cast<Index>(re.size());
  Index cols = static_cast<Index>(re.at(0).size());
  cmat m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    if (static_cast<Index>(re.at(static_cast<size_t>(i)).size()) != cols ||
        static_cast<Index>(im.at(static_cast<size_t>(i)).size()) != cols)
      throw ValidationError(where + ": ragged matrix rows");
    for (Index j2 = 0; j2 < cols; ++j2)
      m(i, j2) = cxd(re.at(static_cast<size_t>(i)).at(static_cast<size_t>(j2)).get<double>(),
                     im.at(static_cast<size_t>(i)).at(static_cast<size_t>(j2)).get<double>());
  }
  return m;
}

inline json channel_to_json(const QuantumChannel& ch) {
  json out;
  out["in_dim"] = ch.in_dim();
  out["out_dims"] = ch.out_shape().dims;
  out["choi"] = matrix_to_json(ch.choi());
  return out;
}

inline QuantumChannel channel_from_json(const json& j) {
  if (!j.contains("in_dim")) throw ValidationError("channel.in_dim: missing");
  if (!j.contains("out_dims")) throw ValidationError("channel.out_dims: missing");
  if (!j.contains("choi")) throw ValidationError("channel.choi: missing");
  Index in_dim = j.at("in_dim").get<Index>();
  std::vector<Index> dims = j.at("out_dims").get<std::vector<Index>>();
  cmat choi = matrix_from_json(j.at("choi"), "channel.choi");
  return QuantumChannel::from_choi(std::move(choi), in_dim, TensorShape(dims));
}

inline json povm_to_json(const Povm& p) {
  json els = json::array();
  for (const auto& e : p.elements) els.push_back(matrix_to_json(e));
  return json{{"dim", p.dim}, {"elements", std::move(els)}};
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

inline json report_to_json(const DarwinismReport& rep) {
  json out;
  out["model"] = rep.model;
  out["d_A"] = rep.d_a;
  out["n"] = rep.n;
  out["k"] = rep.k;
  out["t"] = rep.t;
  out["delta"] = rep.delta;
  out["seed"] = rep.seed;
  out["probed"] = rep.probed;
  out["avg_cmi"] = rep.avg_cmi;
  json rows = json::array();
  for (const auto& rec : rep.per_fragment) {
    json row;
    row["index"] = rec.index;
    row["subset"] = rec.subset;
    row["diamond_dist"] = rec.diamond_dist;
    row["choi_dist"] = rec.choi_dist;
    row["measured_local_norm"] = rec.measured_local_norm;
    row["cmi_j"] = rec.cmi_j;
    row["chain_bound_j"] = rec.chain_bound_j;
    row["chain_ok"] = rec.chain_ok;
    row["probed_overlap"] = rec.probed_overlap;
    if (!rec.solver_error.empty()) row["solver_error"] = rec.solver_error;
    rows.push_back(std::move(row));
  }
  out["per_fragment"] = std::move(rows);
  out["average_dist"] = rep.average_dist;
  out["sampling_bound"] = rep.sampling_bound;
  out["sampling_bound_holds"] = rep.sampling_bound_holds;
  out["theorem_bound"] = rep.theorem_bound;
  out["bound_vacuous"] = rep.bound_vacuous;
  out["good_set"] = rep.good_set;
  out["markov_holds"] = rep.markov_holds;
  out["chain_all_ok"] = rep.chain_all_ok;
  out["pointer_povm"] = povm_to_json(rep.pointer_povm);
  return out;
}

/// One row per fragment; the report-level fields repeat on every row and
/// good_set is joined with ';'.
inline std::string report_to_csv(const DarwinismReport& rep) {
  std::ostringstream os;
  os << "index,diamond_dist,choi_dist,cmi_j,chain_bound_j,average_dist,"
        "theorem_bound,delta,good_set,markov_holds\n";
  std::string good;
  for (size_t i = 0; i < rep.good_set.size(); ++i) {
    if (i) good += ';';
    good += std::to_string(rep.good_set[i]);
  }
  for (const auto& rec : rep.per_fragment) {
    os << rec.index << ',' << format_double(rec.diamond_dist) << ','
       << format_double(rec.choi_dist) << ',' << format_double(rec.cmi_j) << ','
       << format_double(rec.chain_bound_j) << ',' << format_double(rep.average_dist)
       << ',' << format_double(rep.theorem_bound) << ',' << format_double(rep.delta)
       << ',' << good << ',' << (rep.markov_holds ? "true" : "false") << '\n';
  }
  return os.str();
}

inline json agreement_to_json(const AgreementReport& rep) {
  json out;
  out["per_fragment_guess"] = rep.per_fragment_guess;
  out["delta_measured"] = rep.delta_measured;
  out["joint_agreement"] = rep.joint_agreement;
  out["prop3_bound"] = rep.prop3_bound;
  out["implication_holds"] = rep.implication_holds;
  out["grid_size"] = rep.grid_size;
  out["worst_case_state"] = matrix_to_json(rep.worst_case_state.mat);
  return out;
}

inline json discord_to_json(const DiscordResult& res, Index outcomes, int restarts,
                            uint64_t seed) {
  json out;
  out["mutual_info"] = res.mutual_info;
  out["accessible_lower_bound"] = res.accessible;
  out["discord_upper_bound"] = res.value;
  out["is_upper_bound"] = res.upper_bound;  // seesaw gives a lower bound on accessible info
  out["povm_outcomes"] = outcomes;
  out["restarts"] = restarts;
  out["seed"] = seed;
  return out;
}

inline json broadcast_to_json(const BroadcastExperimentReport& rep, uint64_t seed) {
  json out;
  out["mutual_info"] = rep.mutual_info;
  out["accessible_lower_bound"] = rep.accessible_lower;
  out["povm_outcomes"] = rep.povm_outcomes;
  out["optimizer_budget"] = rep.optimizer_budget;
  out["seed"] = seed;
  json entries = json::array();
  for (const auto& e : rep.entries) {
    json row;
    row["n"] = e.n;
    row["accessible_lower_bound"] = e.accessible_lower;
    row["protocol_avg_mi"] = e.protocol_avg_mi;
    row["best_found_avg_mi"] = e.best_found_avg_mi;
    row["gap"] = e.gap;
    row["avg_loss"] = e.avg_loss;
    entries.push_back(std::move(row));
  }
  out["entries"] = std::move(entries);
  return out;
}

// ---------------------------------------------------------------------------
// Experiment configuration
// ---------------------------------------------------------------------------

struct ExperimentConfig {
  std::string model = "broadcast";  // broadcast|cnot_cascade|partial_swap|haar|custom_choi_file
  Index d_a = 2;
  std::vector<Index> fragment_dims;
  double delta = 0.25;
  Index k = 1;
  std::optional<Index> t;
  uint64_t seed = 0;
  int optimizer_budget = 50;
  std::map<std::string, double> tolerances;
  std::string output_path;    // empty: stdout
  std::string format = "json";

  // Non-verify subcommand inputs.
  std::string state = "bell";  // bell|classical|product|random
  double angle = 0.7;          // partial swap
  Index n = 4;                 // fragment count when fragment_dims is empty
  std::vector<Index> ns{1, 2, 3};
  Index povm_outcomes = 0;
  int restarts = 8;
  Index agreement_t = 2;
  std::string choi_file;
};

inline ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) {
      try {
        field = j.at(key).get<std::decay_t<decltype(field)>>();
      } catch (const std::exception&) {
        throw ValidationError(std::string("config.") + key + ": wrong type");
      }
    }
  };
  get("model", c.model);
  get("d_A", c.d_a);
  get("fragment_dims", c.fragment_dims);
  get("delta", c.delta);
  get("k", c.k);
  if (j.contains("t")) {
    Index t = 0;
    get("t", t);
    c.t = t;
  }
  get("seed", c.seed);
  get("optimizer_budget", c.optimizer_budget);
  get("state", c.state);
  get("angle", c.angle);
  get("n", c.n);
  get("ns", c.ns);
  get("povm_outcomes", c.povm_outcomes);
  get("restarts", c.restarts);
  get("agreement_t", c.agreement_t);
  get("choi_file", c.choi_file);
  if (j.contains("tolerances")) {
    if (!j.at("tolerances").is_object())
      throw ValidationError("config.tolerances: expected an object");
    for (const auto& [key, value] : j.at("tolerances").items())
      c.tolerances[key] = value.get<double>();
  }
  if (j.contains("output")) {
    const auto& o = j.at("output");
    if (o.contains("path")) c.output_path = o.at("path").get<std::string>();
    if (o.contains("format")) c.format = o.at("format").get<std::string>();
  }

  static const std::vector<std::string> models{"broadcast", "cnot_cascade", "partial_swap",
                                               "haar", "custom_choi_file"};
  if (std::find(models.begin(), models.end(), c.model) == models.end())
    throw ValidationError("config.model: unknown model '" + c.model + "'");
  if (c.d_a < 2) throw ValidationError("config.d_A: must be >= 2");
  if (!(c.delta > 0.0) || c.delta > 1.0)
    throw ValidationError("config.delta: must lie in (0, 1]");
  if (c.format != "json" && c.format != "csv")
    throw ValidationError("config.output.format: must be json or csv");
  Index total = 1;
  for (Index d : c.fragment_dims) {
    if (d < 1) throw ValidationError("config.fragment_dims: non-positive dimension");
    total *= d;
  }
  if (!c.fragment_dims.empty() && total > 32)
    throw ValidationError("config.fragment_dims: total environment dimension " +
                          std::to_string(total) + " exceeds the desk-scale cap 32");
  if (c.model == "custom_choi_file" && c.choi_file.empty())
    throw ValidationError("config.choi_file: required for model custom_choi_file");
  return c;
}

inline void apply_tolerances(const std::map<std::string, double>& overrides) {
  for (const auto& [key, value] : overrides) {
    if (key == "sdp_gap") tol().sdp_gap = value;
    else if (key == "sdp_max_iters") tol().sdp_max_iters = static_cast<int>(value);
    else if (key == "chain_slack") tol().chain_slack = value;
    else if (key == "merge_floor") tol().merge_floor = value;
    else if (key == "eig_residual") tol().eig_residual = value;
    else if (key == "povm_sum") tol().povm_sum = value;
    else throw ValidationError("config.tolerances: unknown key '" + key + "'");
  }
}

inline QuantumChannel build_model(const ExperimentConfig& c, SeededRng& rng) {
  Index n = c.fragment_dims.empty() ? c.n : static_cast<Index>(c.fragment_dims.size());
  if (n < 1) throw ValidationError("config.n: need at least one fragment");
  if (c.model == "broadcast") return model_broadcast_classical(c.d_a, n);
  if (c.model == "cnot_cascade") {
    if (c.d_a != 2) throw ValidationError("config.d_A: cnot_cascade is a qubit model");
    return model_cnot_cascade(n);
  }
  if (c.model == "partial_swap") {
    if (c.d_a != 2) throw ValidationError("config.d_A: partial_swap is a qubit model");
    return model_partial_swap(n, c.angle);
  }
  if (c.model == "haar") {
    std::vector<Index> dims = c.fragment_dims;
    if (dims.empty()) dims.assign(static_cast<size_t>(n), 2);
    return model_haar_env(c.d_a, dims, rng);
  }
  // custom_choi_file
  std::ifstream in(c.choi_file);
  if (!in) throw ValidationError("config.choi_file: cannot open '" + c.choi_file + "'");
  json j = json::parse(in, nullptr, true);
  return channel_from_json(j);
}

inline DensityMatrix build_state(const ExperimentConfig& c, SeededRng& rng) {
  if (c.state == "bell") return bell_state();
  if (c.state == "classical") return classical_correlated_state();
  if (c.state == "product") {
    auto a = random_density(TensorShape{2}, 2, rng);
    auto b = random_density(TensorShape{2}, 2, rng);
    return DensityMatrix(kron(a.mat, b.mat), TensorShape{2, 2});
  }
  if (c.state == "random") return random_density(TensorShape{2, 2}, 4, rng);
  throw ValidationError("config.state: unknown state '" + c.state + "'");
}

inline void write_text(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::fputs(text.c_str(), stdout);
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("output.path: cannot open '" + path + "' for writing");
  out << text;
}

}  // namespace io
}  // namespace qdarwin
