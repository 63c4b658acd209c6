// riskref: command-line front end.
//
// Exit codes: 0 success, 1 pipeline error (machine-readable JSON on stderr),
// 2 usage error, 3 unexpected failure.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "riskref/io.hpp"
#include "riskref/pipeline.hpp"
#include "riskref/riskref.hpp"

namespace {

using namespace riskref;

int fail(Errc code, const std::string& message) {
  std::cerr << error_json(code, message).dump() << "\n";
  return 1;
}

struct AnalyzeArgs {
  std::string config_path;
  RunConfig cfg;
  std::uint64_t seed = 0;
};

void add_analyze(CLI::App& app, AnalyzeArgs& a, std::vector<CLI::Option*>& given) {
  auto* cmd = app.add_subcommand("analyze", "uncertainty-ordered referral evaluation with bootstrap statistics");
  cmd->add_option("--config", a.config_path, "JSON config file; flags override its fields");
  given.push_back(cmd->add_option("--predictions", a.cfg.predictions, "aggregated predictions CSV"));
  given.push_back(cmd->add_option("--stack", a.cfg.stack, "per-draw stack CSV (aggregated first)"));
  given.push_back(cmd->add_option("--confusion", a.cfg.confusion, "validation confusion matrix CSV"));
  given.push_back(cmd->add_option("--loss-table", a.cfg.loss_table, "generic-risk loss table CSV, or 'nll'"));
  given.push_back(cmd->add_option("--scheme", a.cfg.scheme, "pirc5 | rdr2 | generic"));
  given.push_back(cmd->add_option("--measure", a.cfg.measure, "entropy | max-prob | qwk-risk | generic-risk"));
  given.push_back(cmd->add_option("--smoothing", a.cfg.smoothing, "add-constant smoothing of the validation counts"));
  given.push_back(cmd->add_option("--levels", a.cfg.levels, "referral levels")->delimiter(','));
  given.push_back(cmd->add_option("--metric", a.cfg.metric, "qwk | auc"));
  given.push_back(cmd->add_option("--bootstrap", a.cfg.bootstrap, "bootstrap resamples"));
  given.push_back(cmd->add_option("--seed", a.seed, "bootstrap seed"));
  given.push_back(cmd->add_flag("--raw", a.cfg.raw, "report metrics on [0,1]"));
  given.push_back(cmd->add_option("--out", a.cfg.output, "report JSON path"));
  given.push_back(cmd->add_option("--plot-data", a.cfg.plot_data, "level,mean,std CSV path"));
  given.push_back(cmd->add_option("--summary", a.cfg.summary, "per-level summary CSV path"));
}

RunConfig resolve(const AnalyzeArgs& a, const std::vector<CLI::Option*>& given) {
  RunConfig cfg;
  if (!a.config_path.empty()) {
    std::ifstream in(a.config_path);
    if (!in) throw Error(Errc::IoError, "cannot open " + a.config_path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::InvalidConfig, a.config_path + ": " + e.what());
    }
    cfg.merge_json(j);
  }
  auto set = [&](std::size_t k, auto& dst, const auto& src) {
    if (given[k]->count() > 0) dst = src;
  };
  set(0, cfg.predictions, a.cfg.predictions);
  set(1, cfg.stack, a.cfg.stack);
  set(2, cfg.confusion, a.cfg.confusion);
  set(3, cfg.loss_table, a.cfg.loss_table);
  set(4, cfg.scheme, a.cfg.scheme);
  set(5, cfg.measure, a.cfg.measure);
  set(6, cfg.smoothing, a.cfg.smoothing);
  set(7, cfg.levels, a.cfg.levels);
  set(8, cfg.metric, a.cfg.metric);
  set(9, cfg.bootstrap, a.cfg.bootstrap);
  if (given[10]->count() > 0) cfg.seed = a.seed;
  set(11, cfg.raw, a.cfg.raw);
  set(12, cfg.output, a.cfg.output);
  set(13, cfg.plot_data, a.cfg.plot_data);
  set(14, cfg.summary, a.cfg.summary);
  return cfg;
}

void add_train_options(CLI::App* cmd, toybnn::TrainConfig& t, std::string& method) {
  cmd->add_option("--method", method, "map | mc-dropout | ensemble | mfvi | radial | gvi");
  cmd->add_option("--hidden", t.hidden, "hidden layer widths")->delimiter(',');
  cmd->add_option("--epochs", t.epochs, "training epochs");
  cmd->add_option("--batch-size", t.batch_size, "minibatch size");
  cmd->add_option("--lr", t.learning_rate, "Adam learning rate");
  cmd->add_option("--l2", t.l2_weight, "L2 weight (deterministic methods)");
  cmd->add_option("--dropout", t.dropout_rate, "dropout rate (deterministic methods)");
  cmd->add_option("--n-train-mc", t.n_train_mc, "posterior draws per step (variational methods)");
  cmd->add_option("--alpha", t.alpha, "Renyi alpha (gvi)");
  cmd->add_option("--init-sigma", t.init_sigma, "initial posterior scale (variational methods)");
  cmd->add_option("--ensemble-size", t.ensemble_size, "ensemble members");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"riskref: uncertainty scores, referral evaluation and toy Bayesian networks"};
  app.require_subcommand(1);

  AnalyzeArgs analyze;
  std::vector<CLI::Option*> given;
  add_analyze(app, analyze, given);

  std::string agg_stack, agg_out;
  bool agg_rdr = false;
  auto* agg = app.add_subcommand("aggregate", "average a sample stack into posterior predictive rows");
  agg->add_option("--stack", agg_stack, "stack CSV")->required();
  agg->add_option("--out", agg_out, "predictions CSV")->required();
  agg->add_flag("--rdr", agg_rdr, "binarize 5-grade predictions to RDR (grade >= 2)");

  toybnn::SyntheticSpec gen_spec;
  std::string gen_kind = "ordinal", gen_out;
  std::vector<double> fractions{0.7, 0.1, 0.2};
  std::uint64_t gen_seed = 0;
  toybnn::TrainConfig gen_train;
  std::string gen_method = "map";
  auto* gen = app.add_subcommand("gen-data", "synthetic splits plus a validation confusion matrix");
  gen->add_option("--kind", gen_kind, "blobs | ordinal");
  gen->add_option("--n", gen_spec.n, "examples");
  gen->add_option("--classes", gen_spec.classes, "classes");
  gen->add_option("--overlap", gen_spec.overlap, "blob overlap in [0,1]");
  gen->add_option("--noise", gen_spec.noise, "ordinal feature noise");
  gen->add_option("--fractions", fractions, "train,validation,test fractions")->delimiter(',')->expected(3);
  gen->add_option("--seed", gen_seed, "seed")->required();
  gen->add_option("--out-dir", gen_out, "output directory")->required();
  add_train_options(gen, gen_train, gen_method);

  toybnn::TrainConfig train_cfg;
  std::string train_method = "map", train_data, train_out;
  std::uint64_t train_seed = 0;
  auto* tr = app.add_subcommand("train-toy", "train a toy network with one of the approximate-Bayesian methods");
  tr->add_option("--data", train_data, "features CSV")->required();
  tr->add_option("--out", train_out, "model file")->required();
  tr->add_option("--seed", train_seed, "seed")->required();
  add_train_options(tr, train_cfg, train_method);

  std::string pred_model, pred_data, pred_out, pred_agg;
  std::size_t pred_samples = 16;
  std::uint64_t pred_seed = 0;
  auto* pr = app.add_subcommand("predict-toy", "draw a sample stack from a trained toy model");
  pr->add_option("--model", pred_model, "model file")->required();
  pr->add_option("--data", pred_data, "features CSV")->required();
  pr->add_option("--samples", pred_samples, "posterior draws S (ignored for ensembles)");
  pr->add_option("--seed", pred_seed, "seed")->required();
  pr->add_option("--out", pred_out, "stack CSV")->required();
  pr->add_option("--aggregated", pred_agg, "also write aggregated predictions CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (app.got_subcommand("analyze")) {
      const RunConfig cfg = resolve(analyze, given);
      RunResult res = run_and_write(cfg);
      if (cfg.output.empty()) std::cout << res.report.dump(2) << "\n";
    } else if (app.got_subcommand("aggregate")) {
      PredictionSet preds = aggregate(io::load_stack(agg_stack));
      if (agg_rdr) preds = binarize_rdr(preds, ClassificationScheme::rdr2());
      io::save_predictions(agg_out, preds);
    } else if (app.got_subcommand("gen-data")) {
      if (gen_kind == "blobs")
        gen_spec.kind = toybnn::SyntheticKind::Blobs;
      else if (gen_kind == "ordinal")
        gen_spec.kind = toybnn::SyntheticKind::Ordinal;
      else
        throw Error(Errc::InvalidSpec, "kind must be blobs or ordinal");
      gen_spec.train_fraction = fractions[0];
      gen_spec.val_fraction = fractions[1];
      gen_spec.test_fraction = fractions[2];
      const auto data = toybnn::generate_synthetic(gen_spec, gen_seed);
      const auto splits = toybnn::split_dataset(data, gen_spec.train_fraction, gen_spec.val_fraction,
                                                Rng::child(gen_seed, 1).next());
      gen_train.method = toybnn::method_from_string(gen_method);
      gen_train.seed = Rng::child(gen_seed, 2).next();
      const auto model = toybnn::train(gen_train, splits.train);
      const PredictionSet val = aggregate(toybnn::predict_stack(model, splits.validation, 16, Rng::child(gen_seed, 3).next()));
      const std::string dir = gen_out + "/";
      io::save_features(dir + "train.csv", splits.train);
      io::save_features(dir + "validation.csv", splits.validation);
      io::save_features(dir + "test.csv", splits.test);
      io::save_confusion(dir + "validation_confusion.csv", confusion_from(val));
    } else if (app.got_subcommand("train-toy")) {
      train_cfg.method = toybnn::method_from_string(train_method);
      train_cfg.seed = train_seed;
      io::save_model(train_out, toybnn::train(train_cfg, io::load_features(train_data)));
    } else if (app.got_subcommand("predict-toy")) {
      const auto stack = toybnn::predict_stack(io::load_model(pred_model), io::load_features(pred_data), pred_samples, pred_seed);
      io::save_stack(pred_out, stack);
      if (!pred_agg.empty()) io::save_predictions(pred_agg, aggregate(stack));
    }
  } catch (const Error& e) {
    return fail(e.code(), e.what());
  } catch (const std::exception& e) {
    std::cerr << error_json(Errc::IoError, e.what()).dump() << "\n";
    return 3;
  }
  return 0;
}
