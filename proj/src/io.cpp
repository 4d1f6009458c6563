#include "rtdlab/io.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "rtdlab/error.hpp"

namespace rtdlab::io {

namespace fs = std::filesystem;

void write_atomic(const fs::path& path, std::string_view contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw DataError("failed writing " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json document(std::string_view kind, json body) {
  json doc = {{"schema_version", kSchemaVersion}, {"kind", kind}};
  for (auto& [key, value] : body.items()) doc[key] = value;
  return doc;
}

void write_document(const fs::path& path, const json& doc) { write_atomic(path, doc.dump(1) + "\n"); }

json read_document(const fs::path& path, std::string_view kind) {
  json doc;
  try {
    doc = json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  if (!doc.is_object() || !doc.contains("schema_version") || doc["schema_version"] != kSchemaVersion) {
    throw DataError(path.string() + ": schema_version mismatch (expected " + std::to_string(kSchemaVersion) + ")");
  }
  if (doc.value("kind", "") != kind) {
    throw DataError(path.string() + ": expected a '" + std::string(kind) + "' document");
  }
  return doc;
}

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double number_from(const json& j) { return j.is_null() ? std::numeric_limits<double>::infinity() : j.get<double>(); }

namespace {

template <class F>
auto guarded(std::string_view what, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw DataError(std::string(what) + ": " + e.what());
  }
}

json vec(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vec_from(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

json mat(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<double> r(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index k = 0; k < m.cols(); ++k) r[static_cast<std::size_t>(k)] = m(i, k);
    rows.push_back(r);
  }
  return rows;
}

Eigen::MatrixXd mat_from(const json& j, std::size_t rows, std::size_t cols) {
  if (j.size() != rows) throw DataError("matrix has the wrong number of rows");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows; ++i) {
    const auto r = j[i].get<std::vector<double>>();
    if (r.size() != cols) throw DataError("matrix has the wrong number of columns");
    for (std::size_t k = 0; k < cols; ++k) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = r[k];
  }
  return m;
}

json history_json(const pipeline::NetTraining& t) {
  return {{"examples", t.examples},
          {"epochs_run", t.history.epochs_run},
          {"best_epoch", t.history.best_epoch},
          {"train_loss", t.history.train_loss},
          {"val_loss", t.history.val_loss}};
}

pipeline::NetTraining history_from(const json& j) {
  pipeline::NetTraining t;
  t.examples = j.at("examples").get<std::size_t>();
  t.history.epochs_run = j.at("epochs_run").get<std::size_t>();
  t.history.best_epoch = j.at("best_epoch").get<std::size_t>();
  t.history.train_loss = j.at("train_loss").get<std::vector<double>>();
  t.history.val_loss = j.at("val_loss").get<std::vector<double>>();
  return t;
}

json scaler_json(const ml::ParamScaler& s) {
  return {{"shape_min", s.shape_min},
          {"shape_max", s.shape_max},
          {"log_scale_min", s.log_scale_min},
          {"log_scale_max", s.log_scale_max}};
}

ml::ParamScaler scaler_from(const json& j) {
  return {j.at("shape_min").get<double>(), j.at("shape_max").get<double>(), j.at("log_scale_min").get<double>(),
          j.at("log_scale_max").get<double>()};
}

}  // namespace

json to_json(const rtd::RtdSample& s) {
  return {{"instance_id", s.instance_id},
          {"master_seed", s.master_seed},
          {"per_run_timeout", s.per_run_timeout},
          {"censored", s.censored},
          {"flips", s.flips}};
}

rtd::RtdSample sample_from_json(const json& j) {
  return guarded("rtd sample", [&] {
    rtd::RtdSample s;
    s.instance_id = j.at("instance_id").get<std::string>();
    s.master_seed = j.at("master_seed").get<std::uint64_t>();
    s.per_run_timeout = j.at("per_run_timeout").get<std::uint64_t>();
    s.censored = j.at("censored").get<std::uint64_t>();
    s.flips = j.at("flips").get<std::vector<std::uint64_t>>();
    if (!std::is_sorted(s.flips.begin(), s.flips.end())) throw DataError("rtd sample: flips not sorted");
    return s;
  });
}

json to_json(const dist::DistParams& p) {
  return {{"shape", p.shape}, {"scale", p.scale}, {"location", p.location}};
}

dist::DistParams params_from_json(const json& j) {
  return guarded("params", [&] {
    return dist::DistParams{j.at("shape").get<double>(), j.at("scale").get<double>(), j.at("location").get<double>()};
  });
}

json to_json(const dist::FitResult& f) {
  json j = to_json(f.params);
  j["family"] = dist::to_string(f.family);
  j["ks_stat"] = f.ks_stat;
  j["p_value"] = f.p_value;
  j["log_likelihood"] = number(f.log_likelihood);
  return j;
}

dist::FitResult fit_from_json(const json& j) {
  return guarded("fit", [&] {
    dist::FitResult f;
    f.family = dist::parse_family(j.at("family").get<std::string>());
    f.params = params_from_json(j);
    f.ks_stat = j.at("ks_stat").get<double>();
    f.p_value = j.at("p_value").get<double>();
    f.log_likelihood = number_from(j.at("log_likelihood"));
    return f;
  });
}

json to_json(const rtd::WinnerSelection& w) {
  json fits = json::array();
  for (const auto& f : w.fits) fits.push_back(to_json(f));
  return {{"alpha", w.alpha},
          {"winner", w.winner ? json(dist::to_string(*w.winner)) : json(nullptr)},
          {"fits", fits}};
}

rtd::WinnerSelection selection_from_json(const json& j) {
  return guarded("winner selection", [&] {
    rtd::WinnerSelection w;
    w.alpha = j.at("alpha").get<double>();
    if (!j.at("winner").is_null()) w.winner = dist::parse_family(j.at("winner").get<std::string>());
    const auto& fits = j.at("fits");
    if (fits.size() != w.fits.size()) throw DataError("winner selection: expected three fits");
    for (std::size_t i = 0; i < w.fits.size(); ++i) w.fits[i] = fit_from_json(fits[i]);
    return w;
  });
}

json to_json(const dist::RestartRecommendation& r) {
  json j = {{"restart", r.restarts()}, {"unrestarted_mean", number(r.unrestarted_mean)}};
  if (r.restart_at) {
    j["t"] = r.restart_at->t;
    j["expected_runtime"] = number(r.restart_at->expected_runtime);
  }
  return j;
}

dist::RestartRecommendation recommendation_from_json(const json& j) {
  return guarded("recommendation", [&] {
    dist::RestartRecommendation r;
    r.unrestarted_mean = number_from(j.at("unrestarted_mean"));
    if (j.at("restart").get<bool>()) {
      r.restart_at = dist::RestartAt{j.at("t").get<double>(), number_from(j.at("expected_runtime"))};
    }
    return r;
  });
}

json to_json(const features::FeatureVector& v) {
  json j = json::object();
  for (std::size_t i = 0; i < features::kNumFeatures; ++i) j[std::string(features::kFeatureNames[i])] = v.values[i];
  return j;
}

features::FeatureVector features_from_json(const json& j) {
  return guarded("features", [&] {
    features::FeatureVector v;
    for (std::size_t i = 0; i < features::kNumFeatures; ++i) {
      v.values[i] = j.at(std::string(features::kFeatureNames[i])).get<double>();
    }
    return v;
  });
}

json to_json(const features::NormalizationSpec& s) {
  features::FeatureVector lo, hi;
  lo.values = s.min;
  hi.values = s.max;
  return {{"min", to_json(lo)}, {"max", to_json(hi)}};
}

features::NormalizationSpec normalization_from_json(const json& j) {
  features::NormalizationSpec s;
  s.min = features_from_json(j.at("min")).values;
  s.max = features_from_json(j.at("max")).values;
  return s;
}

json to_json(const ml::ForestModel& m) {
  json trees = json::array();
  for (const auto& t : m.trees) {
    std::vector<int> feature, left, right;
    std::vector<double> threshold;
    std::vector<std::string> label;
    for (const auto& n : t.nodes) {
      feature.push_back(n.feature);
      threshold.push_back(n.threshold);
      left.push_back(n.left);
      right.push_back(n.right);
      label.push_back(dist::to_string(n.label));
    }
    trees.push_back(
        {{"feature", feature}, {"threshold", threshold}, {"left", left}, {"right", right}, {"label", label}});
  }
  return {{"num_features", m.num_features}, {"seed", m.seed}, {"trees", trees}};
}

ml::ForestModel forest_from_json(const json& j) {
  return guarded("forest", [&] {
    ml::ForestModel m;
    m.num_features = j.at("num_features").get<std::size_t>();
    m.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& t : j.at("trees")) {
      const auto feature = t.at("feature").get<std::vector<int>>();
      const auto threshold = t.at("threshold").get<std::vector<double>>();
      const auto left = t.at("left").get<std::vector<int>>();
      const auto right = t.at("right").get<std::vector<int>>();
      const auto label = t.at("label").get<std::vector<std::string>>();
      const auto n = feature.size();
      if (n == 0 || threshold.size() != n || left.size() != n || right.size() != n || label.size() != n) {
        throw DataError("forest: ragged tree arrays");
      }
      ml::DecisionTree tree;
      for (std::size_t i = 0; i < n; ++i) {
        const bool leaf = feature[i] < 0;
        const auto in_range = [n](int c) { return c > 0 && static_cast<std::size_t>(c) < n; };
        if (!leaf && (feature[i] >= static_cast<int>(m.num_features) || !in_range(left[i]) || !in_range(right[i]))) {
          throw DataError("forest: invalid split node");
        }
        tree.nodes.push_back({feature[i], threshold[i], left[i], right[i], dist::parse_family(label[i])});
      }
      m.trees.push_back(std::move(tree));
    }
    return m;
  });
}

json to_json(const ml::MlpModel& m) {
  const auto& s = m.spec;
  json spec = {{"inputs", s.inputs},
               {"hidden", s.hidden},
               {"outputs", s.outputs},
               {"activation", s.activation == ml::OutputActivation::Exp ? "exp" : "sigmoid"},
               {"input_noise", s.input_noise},
               {"hidden_noise", s.hidden_noise},
               {"dropout", s.dropout},
               {"l2", s.l2},
               {"bn_momentum", s.bn_momentum},
               {"bn_epsilon", s.bn_epsilon}};
  json dense = json::array();
  for (const auto& d : m.dense) dense.push_back({{"w", mat(d.w)}, {"b", vec(d.b)}});
  json norm = json::array();
  for (const auto& n : m.norm) {
    norm.push_back({{"gamma", vec(n.gamma)},
                    {"beta", vec(n.beta)},
                    {"moving_mean", vec(n.moving_mean)},
                    {"moving_var", vec(n.moving_var)}});
  }
  return {{"spec", spec}, {"dense", dense}, {"batch_norm", norm}};
}

ml::MlpModel mlp_from_json(const json& j) {
  return guarded("network", [&] {
    ml::MlpModel m;
    const auto& s = j.at("spec");
    m.spec.inputs = s.at("inputs").get<std::size_t>();
    m.spec.hidden = s.at("hidden").get<std::vector<std::size_t>>();
    m.spec.outputs = s.at("outputs").get<std::size_t>();
    m.spec.activation = s.at("activation") == "exp" ? ml::OutputActivation::Exp : ml::OutputActivation::Sigmoid;
    m.spec.input_noise = s.at("input_noise").get<double>();
    m.spec.hidden_noise = s.at("hidden_noise").get<double>();
    m.spec.dropout = s.at("dropout").get<double>();
    m.spec.l2 = s.at("l2").get<double>();
    m.spec.bn_momentum = s.at("bn_momentum").get<double>();
    m.spec.bn_epsilon = s.at("bn_epsilon").get<double>();
    const auto& dense = j.at("dense");
    const auto& norm = j.at("batch_norm");
    if (dense.size() != m.spec.hidden.size() + 1 || norm.size() != m.spec.hidden.size()) {
      throw DataError("network: layer count does not match spec");
    }
    std::size_t fan_in = m.spec.inputs;
    for (std::size_t l = 0; l < dense.size(); ++l) {
      const auto fan_out = l < m.spec.hidden.size() ? m.spec.hidden[l] : m.spec.outputs;
      ml::DenseLayer d{mat_from(dense[l].at("w"), fan_out, fan_in), vec_from(dense[l].at("b"))};
      if (static_cast<std::size_t>(d.b.size()) != fan_out) throw DataError("network: bias size mismatch");
      m.dense.push_back(std::move(d));
      if (l < norm.size()) {
        ml::BatchNormLayer bn{vec_from(norm[l].at("gamma")), vec_from(norm[l].at("beta")),
                              vec_from(norm[l].at("moving_mean")), vec_from(norm[l].at("moving_var"))};
        for (const auto* v : {&bn.gamma, &bn.beta, &bn.moving_mean, &bn.moving_var}) {
          if (static_cast<std::size_t>(v->size()) != fan_out) throw DataError("network: batch-norm size mismatch");
        }
        m.norm.push_back(std::move(bn));
      }
      fan_in = fan_out;
    }
    return m;
  });
}

json to_json(const pipeline::PipelineModel& m) {
  return {{"seed", m.seed},
          {"normalization", to_json(m.normalization)},
          {"selected_features", m.selected},
          {"forest", to_json(m.forest)},
          {"weibull_net", to_json(m.weibull_net)},
          {"lognormal_net", to_json(m.lognormal_net)},
          {"location_net", to_json(m.location_net)},
          {"weibull_scaler", scaler_json(m.weibull_scaler)},
          {"lognormal_scaler", scaler_json(m.lognormal_scaler)},
          {"location_unit", m.location_unit},
          {"training",
           {{"weibull", history_json(m.training[0])},
            {"lognormal", history_json(m.training[1])},
            {"location", history_json(m.training[2])}}}};
}

pipeline::PipelineModel pipeline_from_json(const json& j) {
  return guarded("model bundle", [&] {
    pipeline::PipelineModel m;
    m.seed = j.at("seed").get<std::uint64_t>();
    m.normalization = normalization_from_json(j.at("normalization"));
    m.selected = j.at("selected_features").get<std::vector<std::string>>();
    for (const auto& name : m.selected) {
      if (!features::feature_index(name)) throw DataError("model bundle: unknown feature '" + name + "'");
    }
    m.forest = forest_from_json(j.at("forest"));
    m.weibull_net = mlp_from_json(j.at("weibull_net"));
    m.lognormal_net = mlp_from_json(j.at("lognormal_net"));
    m.location_net = mlp_from_json(j.at("location_net"));
    if (m.forest.num_features != m.selected.size() || m.weibull_net.spec.inputs != m.selected.size() ||
        m.lognormal_net.spec.inputs != m.selected.size() || m.location_net.spec.inputs != m.selected.size()) {
      throw DataError("model bundle: input sizes disagree with the selected features");
    }
    m.weibull_scaler = scaler_from(j.at("weibull_scaler"));
    m.lognormal_scaler = scaler_from(j.at("lognormal_scaler"));
    m.location_unit = j.at("location_unit").get<double>();
    const auto& t = j.at("training");
    m.training = {history_from(t.at("weibull")), history_from(t.at("lognormal")), history_from(t.at("location"))};
    return m;
  });
}

json to_json(const pipeline::PipelinePrediction& p) {
  return {{"family", dist::to_string(p.family)},
          {"params", to_json(p.params)},
          {"recommendation", to_json(p.recommendation)},
          {"policy", restart::to_string(pipeline::to_policy(p))}};
}

pipeline::PipelinePrediction prediction_from_json(const json& j) {
  return guarded("prediction", [&] {
    pipeline::PipelinePrediction p;
    p.family = dist::parse_family(j.at("family").get<std::string>());
    p.params = params_from_json(j.at("params"));
    p.recommendation = recommendation_from_json(j.at("recommendation"));
    return p;
  });
}

json to_json(const eval::H2HResult& r) {
  json rows = json::array();
  for (const auto& row : r.rows) {
    json cells = json::array();
    for (std::size_t p = 0; p < row.cells.size(); ++p) {
      cells.push_back({{"policy", row.policies[p]}, {"mean_flips", row.cells[p].mean_flips},
                       {"timeouts", row.cells[p].timeouts}});
    }
    rows.push_back({{"instance_id", row.instance_id}, {"excluded", row.excluded}, {"cells", cells}});
  }
  return {{"columns", r.columns}, {"rows", rows}};
}

json to_json(const eval::Comparison& c) {
  json records = json::array();
  for (const auto& r : c.records) {
    records.push_back({{"instance_id", r.instance_id},
                       {"mean_runtime_baseline", r.mean_runtime_baseline},
                       {"mean_runtime_candidate", r.mean_runtime_candidate},
                       {"speedup", r.speedup}});
  }
  json j = {{"baseline", c.baseline},
            {"candidate", c.candidate},
            {"instances", c.records.size()},
            {"geometric_mean", c.geometric_mean},
            {"t_test", {{"t", number(c.t_test.statistic)}, {"p_value", c.t_test.p_value}}},
            {"restart_predicted", c.restart_predicted},
            {"no_restart_predicted", c.no_restart_predicted},
            {"records", records}};
  if (c.wilcoxon) {
    j["wilcoxon"] = {{"w_plus", c.wilcoxon->w_plus},
                     {"p_value", c.wilcoxon->p_value},
                     {"n", c.wilcoxon->n},
                     {"exact", c.wilcoxon->exact}};
  } else {
    j["wilcoxon"] = nullptr;
  }
  return j;
}

json to_json(const eval::SubsetTable& t) {
  json rows = json::array();
  for (const auto& r : t.rows) {
    rows.push_back({{"subset", r.label}, {"ks_best", r.ks_best}, {"speedup_best", r.speedup_best}});
  }
  return {{"rows", rows},
          {"included", t.included},
          {"excluded_no_winner", t.excluded_no_winner},
          {"excluded_below_sample", t.excluded_below_sample}};
}

}  // namespace rtdlab::io
