#pragma once

#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "riskref/core.hpp"
#include "riskref/error.hpp"
#include "riskref/io.hpp"
#include "riskref/metrics.hpp"
#include "riskref/referral.hpp"
#include "riskref/resample.hpp"
#include "riskref/uncertainty.hpp"

namespace riskref {

/// Everything `analyze` needs. Exactly one of `predictions` / `stack` is set.
struct RunConfig {
  std::string predictions;
  std::string stack;
  std::string confusion;   // validation confusion matrix, required by qwk-risk
  std::string loss_table;  // generic-risk: "nll" or a path to an M x M CSV of L(j, i)
  std::string scheme = "pirc5";  // pirc5 | rdr2 | generic
  std::string measure = "entropy";  // entropy | max-prob | qwk-risk | generic-risk
  double smoothing = 0.0;
  std::vector<double> levels = {0.0, 0.3, 0.5};
  std::string metric = "qwk";  // qwk | auc
  std::size_t bootstrap = 100;
  std::optional<std::uint64_t> seed;
  bool raw = false;  // report metrics on [0, 1] instead of 0-100
  std::string output;
  std::string plot_data;
  std::string summary;

  /// Fills fields present in a JSON config document.
  void merge_json(const nlohmann::json& j) {
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) j.at(key).get_to(field);
    };
    try {
      get("predictions", predictions);
      get("stack", stack);
      get("confusion", confusion);
      get("loss_table", loss_table);
      get("scheme", scheme);
      get("measure", measure);
      get("smoothing", smoothing);
      get("levels", levels);
      get("metric", metric);
      get("bootstrap", bootstrap);
      if (j.contains("seed")) seed = j.at("seed").get<std::uint64_t>();
      get("raw", raw);
      get("output", output);
      get("plot_data", plot_data);
      get("summary", summary);
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::InvalidConfig, std::string("config file: ") + e.what());
    }
  }

  void validate() const {
    if (predictions.empty() == stack.empty())
      throw Error(Errc::InvalidConfig, "give exactly one of predictions or stack");
    if (!seed) throw Error(Errc::InvalidConfig, "a seed is required");
    if (scheme != "pirc5" && scheme != "rdr2" && scheme != "generic")
      throw Error(Errc::InvalidConfig, "scheme must be pirc5, rdr2 or generic");
    if (metric != "qwk" && metric != "auc") throw Error(Errc::InvalidConfig, "metric must be qwk or auc");
    if (metric == "auc" && scheme != "rdr2") throw Error(Errc::InvalidConfig, "the AUC metric needs the rdr2 scheme");
    if (measure == "qwk-risk" && confusion.empty())
      throw Error(Errc::InvalidConfig, "qwk-risk needs a validation confusion matrix");
    if (measure == "generic-risk" && loss_table.empty())
      throw Error(Errc::InvalidConfig, "generic-risk needs a loss table (or 'nll')");
    if (measure != "entropy" && measure != "max-prob" && measure != "qwk-risk" && measure != "generic-risk")
      throw Error(Errc::InvalidConfig, "unknown measure '" + measure + "'");
    if (bootstrap < 1) throw Error(Errc::InvalidB, "bootstrap needs at least one resample");
    validate_levels(levels);
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["predictions"] = predictions;
    j["stack"] = stack;
    j["confusion"] = confusion;
    j["loss_table"] = loss_table;
    j["scheme"] = scheme;
    j["measure"] = measure;
    j["smoothing"] = smoothing;
    j["levels"] = levels;
    j["metric"] = metric;
    j["bootstrap"] = bootstrap;
    j["seed"] = seed.value_or(0);
    j["raw"] = raw;
    return j;
  }
};

inline Matrix load_loss_table(const std::string& path, std::size_t m) {
  const auto lines = io::read_lines(path);
  if (lines.size() != m) throw Error(Errc::ShapeMismatch, path + ": loss table needs " + std::to_string(m) + " rows");
  Matrix t(m, m);
  for (std::size_t i = 0; i < m; ++i) {
    const auto cols = io::split(lines[i]);
    if (cols.size() != m) throw Error(Errc::ShapeMismatch, io::where(path, i + 1) + ": expected " + std::to_string(m) + " values");
    for (std::size_t j = 0; j < m; ++j) t(i, j) = io::parse_double(cols[j], path, i + 1);
  }
  return t;
}

/// Predictions as evaluated: aggregated from a stack when needed and
/// binarized when the rdr2 scheme is applied to 5-grade input.
inline PredictionSet load_evaluation_set(const RunConfig& cfg) {
  PredictionSet preds = cfg.stack.empty() ? io::load_predictions(cfg.predictions) : aggregate(io::load_stack(cfg.stack));
  if (cfg.scheme == "rdr2" && preds.n_classes() == 5) return binarize_rdr(preds, ClassificationScheme::rdr2());
  if (cfg.scheme == "rdr2" && preds.n_classes() != 2)
    throw Error(Errc::WrongClassCount, "rdr2 needs 2-class or 5-grade predictions");
  if (cfg.scheme == "pirc5" && preds.n_classes() != 5)
    throw Error(Errc::WrongClassCount, "pirc5 needs 5 classes, got " + std::to_string(preds.n_classes()));
  return preds;
}

inline UncertaintySpec make_uncertainty_spec(const RunConfig& cfg, std::size_t m) {
  UncertaintySpec spec;
  if (cfg.measure == "entropy") spec.kind = MeasureKind::Entropy;
  if (cfg.measure == "max-prob") spec.kind = MeasureKind::MaxProbReject;
  if (cfg.measure == "qwk-risk") {
    spec.kind = MeasureKind::QwkRisk;
    ConfusionMatrix c = io::load_confusion(cfg.confusion);
    if (c.m() == 5 && m == 2 && cfg.scheme == "rdr2")
      throw Error(Errc::ShapeMismatch, "give a 2x2 validation confusion matrix for the rdr2 scheme");
    spec.validation_confusion = std::move(c);
    spec.smoothing = cfg.smoothing;
  }
  if (cfg.measure == "generic-risk") {
    spec.kind = MeasureKind::GenericRisk;
    if (cfg.loss_table == "nll")
      spec.nll_loss = true;
    else
      spec.loss_table = load_loss_table(cfg.loss_table, m);
  }
  return spec;
}

struct RunResult {
  nlohmann::ordered_json report;
  std::string plot_data;
  std::string summary;
};

inline std::string display_value(double mean, double std) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.1f ± %.1f", mean, std);
  return buf;
}

/// aggregate -> uncertainty -> referral -> bootstrap, as a report document.
inline RunResult run(const RunConfig& cfg) {
  cfg.validate();
  const PredictionSet preds = load_evaluation_set(cfg);
  const Metric metric = cfg.metric == "auc" ? Metric::Auc : Metric::Qwk;
  const double scale = cfg.raw ? 1.0 : kMetricScale;
  const UncertaintyVector u = compute_uncertainty(preds, make_uncertainty_spec(cfg, preds.n_classes()));
  const ReferralCurve curve = referral_curve(preds, u, cfg.levels, metric, scale);
  const BootstrapReport boot = bootstrap(preds, u, cfg.levels, metric, cfg.bootstrap, *cfg.seed, scale);
  const auto markers = improvement_markers(boot.means());

  RunResult out;
  auto& r = out.report;
  r["format"] = "riskref-report";
  r["version"] = 1;
  r["config"] = cfg.to_json();
  r["n_examples"] = preds.n_examples();
  r["n_classes"] = preds.n_classes();
  r["measure"] = cfg.measure;
  r["metric"] = cfg.metric;
  r["scale"] = scale;
  r["expected_risk"] = dataset_expected_risk(u);
  r["bootstrap"] = {{"n_resamples", boot.n_resamples}, {"seed", boot.seed}};
  r["levels"] = nlohmann::ordered_json::array();
  out.plot_data = "level,mean,std\n";
  out.summary = "level,retained_count,point,mean,std,n_valid,n_skipped,display,marker\n";
  for (std::size_t k = 0; k < cfg.levels.size(); ++k) {
    const auto& pt = curve.points[k];
    const auto& s = boot.per_level[k];
    nlohmann::ordered_json lv;
    lv["level"] = s.level;
    lv["retained_count"] = pt.retained_count;
    lv["point"] = pt.value ? nlohmann::ordered_json(*pt.value) : nlohmann::ordered_json(nullptr);
    if (!pt.value) lv["point_reason"] = pt.reason;
    const bool valid = s.n_valid > 0;
    lv["mean"] = valid ? nlohmann::ordered_json(s.mean) : nlohmann::ordered_json(nullptr);
    lv["std"] = valid ? nlohmann::ordered_json(s.std) : nlohmann::ordered_json(nullptr);
    lv["n_valid"] = s.n_valid;
    lv["n_skipped"] = s.n_skipped;
    const std::string display = valid ? display_value(s.mean, s.std) : "n/a";
    lv["display"] = display;
    const std::string marker = k == 0 ? "" : to_string(markers[k - 1]);
    lv["marker"] = k == 0 ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(marker);
    r["levels"].push_back(std::move(lv));

    const std::string mean_s = valid ? io::format_double(s.mean) : "nan";
    const std::string std_s = valid ? io::format_double(s.std) : "nan";
    out.plot_data += io::format_double(s.level) + "," + mean_s + "," + std_s + "\n";
    out.summary += io::format_double(s.level) + "," + std::to_string(pt.retained_count) + "," +
                   (pt.value ? io::format_double(*pt.value) : "nan") + "," + mean_s + "," + std_s + "," +
                   std::to_string(s.n_valid) + "," + std::to_string(s.n_skipped) + "," + display + "," + marker + "\n";
  }
  r["markers"] = nlohmann::ordered_json::array();
  for (auto m : markers) r["markers"].push_back(to_string(m));
  return out;
}

/// Runs the pipeline and writes the requested files atomically.
inline RunResult run_and_write(const RunConfig& cfg) {
  RunResult res = run(cfg);
  if (!cfg.output.empty()) io::write_atomic(cfg.output, res.report.dump(2) + "\n");
  if (!cfg.plot_data.empty()) io::write_atomic(cfg.plot_data, res.plot_data);
  if (!cfg.summary.empty()) io::write_atomic(cfg.summary, res.summary);
  return res;
}

inline nlohmann::ordered_json error_json(Errc code, const std::string& message) {
  nlohmann::ordered_json j;
  j["error"] = {{"code", std::string(to_string(code))}, {"message", message}};
  return j;
}

}  // namespace riskref
