// claimcheck command line: encode, gridsearch, train, predict, retrieve,
// evaluate. Exit codes: 0 success, 1 metric requirement failed, 2 bad input.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "claimcheck/config.hpp"
#include "claimcheck/error.hpp"
#include "claimcheck/eval.hpp"
#include "claimcheck/pipeline.hpp"

namespace {

using namespace claimcheck;

constexpr int kExitMetric = 1;
constexpr int kExitInput = 2;

struct CommonFlags {
  std::string config;
  std::vector<std::string> overrides;
  std::optional<std::size_t> workers;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> run_id;
  bool fine_tune = false;
  bool exact_cosine = false;
  bool normalize = false;
};

struct EvalFlags {
  std::string run;
  std::string qrels;
  std::string labels;
  std::string language = "en";
  std::string metrics;
  std::string out;
  std::vector<std::string> require;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool config_required = true) {
  auto* opt = cmd->add_option("-c,--config", f.config, "Pipeline config file");
  if (config_required) opt->required();
  cmd->add_option("--set", f.overrides, "Override a config key (key=value)");
  cmd->add_option("--seed", f.seed, "Random seed");
  cmd->add_option("--run-id", f.run_id, "Run identifier written to run files");
}

PipelineConfig resolve(const CommonFlags& f) {
  ConfigStore store = ConfigStore::load(f.config);
  for (const auto& o : f.overrides) store.set_assignment(o);
  if (f.workers) store.set("grid.workers", std::to_string(*f.workers));
  if (f.seed) store.set("seed", std::to_string(*f.seed));
  if (f.run_id) store.set("run_id", *f.run_id);
  if (f.fine_tune) store.set("retrieval.fine_tune", "true");
  if (f.exact_cosine) store.set("retrieval.exact_cosine", "true");
  if (f.normalize) store.set("retrieval.normalize", "true");
  return PipelineConfig::from_store(store);
}

void print_metrics(const nlohmann::json& report) {
  for (const auto& [name, value] : report.at("metrics").items()) {
    std::printf("%s\t%.4f\n", name.c_str(), value.get<double>());
  }
}

// "name>=value"
bool check_requirements(const nlohmann::json& report,
                        const std::vector<std::string>& reqs) {
  bool ok = true;
  for (const auto& r : reqs) {
    const auto pos = r.find(">=");
    if (pos == std::string::npos) {
      throw Error(ErrorCode::kInvalidArgument,
                  "--require expects metric>=value, got '" + r + "'");
    }
    const std::string name = r.substr(0, pos);
    const double bound = std::stod(r.substr(pos + 2));
    const auto& metrics = report.at("metrics");
    if (!metrics.contains(name)) {
      throw Error(ErrorCode::kInvalidArgument, "--require names unknown metric " + name);
    }
    const double v = metrics.at(name).get<double>();
    if (v < bound) {
      std::fprintf(stderr, "requirement failed: %s = %.6f < %g\n", name.c_str(), v, bound);
      ok = false;
    }
  }
  return ok;
}

int cmd_encode(const CommonFlags& f) {
  const PipelineConfig cfg = resolve(f);
  const EncodeSummary s = run_encode(cfg);
  for (const auto& [name, dim] : s.segments) std::printf("segment %s %zu\n", name.c_str(), dim);
  std::printf("total_dim %zu\n", s.total_dim);
  std::printf("dep_vocab %zu\n", s.dep_vocab_size);
  for (const auto& [name, n] : s.split_sizes) std::printf("split %s %zu\n", name.c_str(), n);
  std::printf("degenerate %zu\n", s.degenerate);
  return 0;
}

int cmd_gridsearch(const CommonFlags& f) {
  const PipelineConfig cfg = resolve(f);
  const GridResult r = run_gridsearch(cfg);
  std::size_t failed = 0;
  for (const auto& c : r.cells) failed += c.error.has_value();
  std::printf("cells %zu failed %zu workers %zu\n", r.cells.size(), failed, r.workers_used);
  if (!r.best) {
    std::fprintf(stderr, "no grid cell trained successfully\n");
    return kExitMetric;
  }
  const GridCell& b = r.cells[*r.best];
  std::printf("best energy=%d C=%g gamma=%g dev_metric=%.4f pca_dim=%zu\n", b.energy, b.C,
              b.gamma, b.dev_metric, b.pca_dim);
  return 0;
}

int cmd_train(const CommonFlags& f) {
  const PipelineConfig cfg = resolve(f);
  for (const auto& d : run_train(cfg)) std::printf("model %s\n", d.string().c_str());
  return 0;
}

int cmd_predict(const CommonFlags& f, const std::vector<std::string>& models) {
  CommonFlags g = f;
  if (!models.empty()) {
    std::string joined;
    for (const auto& m : models) joined += (joined.empty() ? "" : ",") + std::filesystem::absolute(m).string();
    g.overrides.push_back("predict.models=" + joined);
  }
  const PipelineConfig cfg = resolve(g);
  const PredictSummary s = run_predict(cfg);
  std::printf("run %s\n", s.run_path.string().c_str());
  if (s.metrics) print_metrics(*s.metrics);
  return 0;
}

int cmd_retrieve(const CommonFlags& f) {
  const PipelineConfig cfg = resolve(f);
  const RetrieveSummary s = run_retrieve(cfg);
  std::printf("store %zu triplets %zu\n", s.store_size, s.triplets);
  for (std::size_t e = 0; e < s.epoch_mean_loss.size(); ++e) {
    std::printf("epoch %zu mean_loss %.6f\n", e + 1, s.epoch_mean_loss[e]);
  }
  std::printf("run %s\n", s.run_path.string().c_str());
  if (s.metrics) print_metrics(*s.metrics);
  return 0;
}

int cmd_evaluate(const EvalFlags& f) {
  if (f.qrels.empty() == f.labels.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "give exactly one of --qrels or --labels");
  }
  const RankedRun run = read_run(f.run);
  const Qrels qrels = f.labels.empty()
                          ? load_qrels(f.qrels)
                          : checkworthy_qrels(load_tweets(f.labels, parse_language(f.language)));
  std::string metrics = f.metrics;
  if (metrics.empty()) metrics = f.labels.empty() ? "map@1,map@3,map@5,map@10,map" : "map,p@1,p@3,p@5,p@10,p@30";
  const nlohmann::json report = evaluate(run, qrels, MetricSpec::parse(metrics));
  print_metrics(report);
  if (!f.out.empty()) {
    std::ofstream out(f.out);
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + f.out);
    out << report.dump(2) << '\n';
  }
  return check_requirements(report, f.require) ? 0 : kExitMetric;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"claimcheck: check-worthiness ranking and verified-claim retrieval"};
  app.require_subcommand(1);

  CommonFlags common;
  EvalFlags eval;
  std::vector<std::string> models;

  auto* encode = app.add_subcommand("encode", "Encode tweets into fused feature tensors");
  add_common(encode, common);
  auto* grid = app.add_subcommand("gridsearch", "Select PCA energy, C and gamma on dev");
  add_common(grid, common);
  grid->add_option("--workers", common.workers, "Worker threads for the grid");
  auto* train = app.add_subcommand("train", "Train the ensemble members");
  add_common(train, common);
  auto* predict = app.add_subcommand("predict", "Rank test tweets with the ensemble");
  add_common(predict, common);
  predict->add_option("--model", models, "Model directory (repeatable)");
  auto* retrieve = app.add_subcommand("retrieve", "Rank verified claims for each tweet");
  add_common(retrieve, common);
  retrieve->add_flag("--fine-tune", common.fine_tune, "Train the triplet projection first");
  retrieve->add_flag("--exact-cosine", common.exact_cosine, "Exhaustive cosine ranking");
  retrieve->add_flag("--normalize", common.normalize, "L2-normalize search vectors");
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Score a run file");
  evaluate_cmd->add_option("--run", eval.run, "Run file")->required();
  evaluate_cmd->add_option("--qrels", eval.qrels, "Qrels TSV");
  evaluate_cmd->add_option("--labels", eval.labels, "Labelled tweets JSONL (check-worthiness)");
  evaluate_cmd->add_option("--language", eval.language, "Language of --labels");
  evaluate_cmd->add_option("--metrics", eval.metrics, "Comma-separated metric names");
  evaluate_cmd->add_option("--out", eval.out, "Write the JSON report here");
  evaluate_cmd->add_option("--require", eval.require, "Fail unless metric>=value");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInput;
  }

  try {
    if (*encode) return cmd_encode(common);
    if (*grid) return cmd_gridsearch(common);
    if (*train) return cmd_train(common);
    if (*predict) return cmd_predict(common, models);
    if (*retrieve) return cmd_retrieve(common);
    if (*evaluate_cmd) return cmd_evaluate(eval);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitInput;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitInput;
  }
  return kExitInput;
}
