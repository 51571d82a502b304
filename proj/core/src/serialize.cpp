#include "mgcsl/serialize.hpp"

#include "json_util.hpp"

namespace mgcsl::io {

using nlohmann::json;

namespace {

json hp_json(const opt::HyperParams& hp) {
  return {{"alpha1", hp.alpha1},
          {"alpha2", hp.alpha2},
          {"eta", hp.eta},
          {"rho", hp.rho},
          {"mu0", hp.mu0},
          {"gamma0", hp.gamma0},
          {"h_tolerance", hp.h_tolerance},
          {"mu_max", hp.mu_max},
          {"epsilon", hp.epsilon},
          {"max_outer", hp.max_outer},
          {"inner_max_evals", hp.inner_max_evals},
          {"constraint", acyclic::to_string(hp.constraint)},
          {"seed", hp.seed},
          {"q", hp.q},
          {"sae_hidden", hp.sae_hidden},
          {"mlp_hidden", hp.mlp_hidden},
          {"activation", hp.activation == ad::Activation::kTanh ? "tanh" : "sigmoid"},
          {"scaling", opt::to_string(hp.scaling)},
          {"sign_split", hp.sign_split},
          {"support_threshold", hp.support_threshold}};
}

json merge(json base, const std::string& extra) {
  const json more = json::parse(extra);
  if (!more.is_object()) throw ParseError("extra JSON must be an object");
  for (auto it = more.begin(); it != more.end(); ++it) base[it.key()] = it.value();
  return base;
}

}  // namespace

std::string hyperparams_to_json(const opt::HyperParams& hp) { return hp_json(hp).dump(2); }

opt::HyperParams hyperparams_from_json(const std::string& text) {
  opt::HyperParams hp;
  try {
    const json j = json::parse(text);
    hp.alpha1 = j.value("alpha1", hp.alpha1);
    hp.alpha2 = j.value("alpha2", hp.alpha2);
    hp.eta = j.value("eta", hp.eta);
    hp.rho = j.value("rho", hp.rho);
    hp.mu0 = j.value("mu0", hp.mu0);
    hp.gamma0 = j.value("gamma0", hp.gamma0);
    hp.h_tolerance = j.value("h_tolerance", hp.h_tolerance);
    hp.mu_max = j.value("mu_max", hp.mu_max);
    hp.epsilon = j.value("epsilon", hp.epsilon);
    hp.max_outer = j.value("max_outer", hp.max_outer);
    hp.inner_max_evals = j.value("inner_max_evals", hp.inner_max_evals);
    if (j.contains("constraint")) hp.constraint = acyclic::constraint_from_string(j["constraint"]);
    hp.seed = j.value("seed", hp.seed);
    hp.q = j.value("q", hp.q);
    hp.sae_hidden = j.value("sae_hidden", hp.sae_hidden);
    hp.mlp_hidden = j.value("mlp_hidden", hp.mlp_hidden);
    if (j.contains("activation")) {
      hp.activation = j["activation"] == "tanh" ? ad::Activation::kTanh : ad::Activation::kSigmoid;
    }
    if (j.contains("scaling")) hp.scaling = opt::scaling_from_string(j["scaling"]);
    hp.sign_split = j.value("sign_split", hp.sign_split);
    hp.support_threshold = j.value("support_threshold", hp.support_threshold);
  } catch (const json::exception& e) {
    throw ParseError(std::string("hyperparameter JSON: ") + e.what());
  }
  return hp;
}

std::string fit_result_to_json(const opt::FitResult& r, const std::string& extra) {
  json trace = json::array();
  for (const opt::TraceEntry& t : r.trace) {
    trace.push_back({{"outer", t.outer},
                     {"mu", t.mu},
                     {"gamma", t.gamma},
                     {"h", t.h},
                     {"objective", t.objective},
                     {"inner_evaluations", t.inner_evaluations},
                     {"line_search_warning", t.line_search_warning}});
  }
  json j = {{"C", detail::matrix_to_json(r.C)},
            {"S", detail::matrix_to_json(r.S)},
            {"A", detail::matrix_to_json(r.A)},
            {"trace", std::move(trace)},
            {"wall_clock_seconds", r.seconds},
            {"converged", r.converged},
            {"reason", r.reason},
            {"initial_h", r.initial_h},
            {"final_h", r.final_h},
            {"hyperparameters", hp_json(r.hp)},
            {"sae_checkpoint", json::parse(sae::to_json(r.sae, r.hp.seed))},
            {"mlp_checkpoint", json::parse(orient::to_json(r.bank, r.hp.seed))}};
  return merge(std::move(j), extra).dump(1);
}

std::string metrics_to_json(const eval::MetricsReport& m, const std::string& extra) {
  json j = {{"precision", m.precision},
            {"recall", m.recall},
            {"f1", m.f1},
            {"shd", m.shd},
            {"runtime_seconds", m.runtime_seconds},
            {"true_positives", m.true_positives},
            {"estimated_edges", m.estimated_edges},
            {"true_edges", m.true_edges}};
  return merge(std::move(j), extra).dump(2);
}

eval::MetricsReport metrics_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    eval::MetricsReport m;
    m.precision = j.at("precision").get<double>();
    m.recall = j.at("recall").get<double>();
    m.f1 = j.at("f1").get<double>();
    m.shd = j.at("shd").get<int>();
    m.runtime_seconds = j.value("runtime_seconds", 0.0);
    m.true_positives = j.value("true_positives", 0);
    m.estimated_edges = j.value("estimated_edges", 0);
    m.true_edges = j.value("true_edges", 0);
    return m;
  } catch (const json::exception& e) {
    throw ParseError(std::string("metrics JSON: ") + e.what());
  }
}

}  // namespace mgcsl::io
