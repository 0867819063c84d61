#include <doctest.h>

#include <fstream>
#include <sstream>

#include "claimcheck/error.hpp"
#include "claimcheck/pipeline.hpp"
#include "synthetic.hpp"

using namespace claimcheck;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path small_checkworthy(const std::string& name) {
  const fs::path dir = synth::scratch_dir(name);
  synth::CheckworthyOptions o;
  o.train = 60;
  o.dev = 30;
  o.test = 30;
  synth::write_checkworthy(dir, synth::make_checkworthy(o));
  return dir;
}

PipelineConfig config_for(const fs::path& dir,
                          const std::vector<std::string>& overrides = {}) {
  ConfigStore store = ConfigStore::load(dir / "config.toml");
  store.set("grid.energies", "[100, 98]");
  store.set("grid.c_steps", "2");
  store.set("grid.gamma_steps", "2");
  for (const auto& o : overrides) store.set_assignment(o);
  return PipelineConfig::from_store(store);
}

}  // namespace

TEST_CASE("encode lists the enabled segments and is byte-stable") {
  const fs::path dir = small_checkworthy("pipe-encode");
  const PipelineConfig cfg = config_for(dir, {"features.use_ne=false"});
  const EncodeSummary s = run_encode(cfg);
  REQUIRE(s.segments.size() == 3);
  CHECK(s.segments[0].first == "pos");
  CHECK(s.segments[1].first == "dep");
  CHECK(s.segments[2].first == "embedding");

  const auto sidecar = nlohmann::json::parse(slurp(cfg.output_dir / "features" / "features.json"));
  std::vector<std::string> names;
  for (const auto& seg : sidecar.at("segments")) names.push_back(seg.at("name"));
  CHECK(names == std::vector<std::string>{"pos", "dep", "embedding"});
  CHECK(fs::exists(cfg.output_dir / "features" / "config.resolved.toml"));

  const std::string first = slurp(cfg.output_dir / "features" / "train.ckem");
  const std::string first_meta = slurp(cfg.output_dir / "features" / "features.json");
  run_encode(cfg);
  CHECK(slurp(cfg.output_dir / "features" / "train.ckem") == first);
  CHECK(slurp(cfg.output_dir / "features" / "features.json") == first_meta);
  fs::remove_all(dir);
}

TEST_CASE("missing inputs are reported as I/O errors") {
  const fs::path dir = small_checkworthy("pipe-missing");
  const PipelineConfig cfg = config_for(dir, {"data.annotations=nowhere.jsonl"});
  try {
    run_encode(cfg);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kIo);
  }
  fs::remove_all(dir);
}

TEST_CASE("gridsearch, train and predict") {
  const fs::path dir = small_checkworthy("pipe-full");
  const PipelineConfig cfg = config_for(dir, {"grid.workers=2"});
  run_encode(cfg);
  const GridResult grid = run_gridsearch(cfg);
  CHECK(grid.cells.size() == 8);
  CHECK(grid.workers_used <= 2);
  CHECK(fs::exists(cfg.output_dir / "grid.tsv"));
  CHECK(fs::exists(cfg.output_dir / "grid.json"));

  const auto models = run_train(cfg);
  CHECK(models.size() == 3);
  CHECK(fs::exists(cfg.output_dir / "models" / "config.resolved.toml"));

  const PredictSummary all = run_predict(cfg);
  REQUIRE(all.metrics);
  CHECK(all.metrics->at("metrics").contains("map"));
  CHECK(fs::exists(cfg.output_dir / "config.resolved.toml"));

  // scores descend within every topic of the written file
  const RankedRun back = read_run(all.run_path);
  for (const auto& [topic, ranking] : back.queries) {
    for (std::size_t i = 1; i < ranking.size(); ++i) {
      CHECK(ranking[i - 1].score >= ranking[i].score);
    }
  }

  PipelineConfig one = cfg;
  one.predict_models = {models[0]};
  const PredictSummary single = run_predict(one);
  const Classifier m = load_classifier(models[0]);
  const LabeledSet test = load_labeled_split(cfg, "test");
  const Eigen::VectorXd d = m.decision_values(test.X);
  std::map<std::string, double> direct;
  for (std::size_t i = 0; i < test.size(); ++i) direct[test.ids[i]] = d(static_cast<Eigen::Index>(i));
  for (const auto& [topic, ranking] : single.run.queries) {
    for (const auto& s : ranking) CHECK(s.score == direct.at(s.id));
  }
  fs::remove_all(dir);
}

TEST_CASE("explicit svm parameters skip the grid") {
  const fs::path dir = small_checkworthy("pipe-explicit");
  const PipelineConfig cfg =
      config_for(dir, {"svm.energy=99", "svm.C=1.0", "svm.gamma=0.1"});
  run_encode(cfg);
  CHECK(run_train(cfg).size() == 1);
  CHECK_FALSE(fs::exists(cfg.output_dir / "grid.json"));
  CHECK_THROWS_AS(config_for(dir, {"svm.energy=99"}).validate(), Error);
  fs::remove_all(dir);
}

TEST_CASE("retrieval clamps k to the store and matches across search modes") {
  const fs::path dir = synth::scratch_dir("pipe-retrieve");
  synth::RetrievalOptions o;
  o.claims = 300;
  o.train_queries = 40;
  o.test_queries = 30;
  o.dim = 12;
  synth::write_retrieval(dir, synth::make_retrieval(o));
  ConfigStore store = ConfigStore::load(dir / "config.toml");
  store.set("retrieval.normalize", "true");
  PipelineConfig kd = PipelineConfig::from_store(store);
  const RetrieveSummary a = run_retrieve(kd);
  CHECK(a.store_size == 300);
  for (const auto& [q, ranking] : a.run.queries) CHECK(ranking.size() == 300);
  REQUIRE(a.metrics);
  CHECK(fs::exists(kd.output_dir / "retrieval" / "config.resolved.toml"));
  CHECK(fs::exists(kd.output_dir / "retrieval" / "claim_index.json"));

  store.set("retrieval.exact_cosine", "true");
  store.set("output_dir", "out-cos");
  const RetrieveSummary b = run_retrieve(PipelineConfig::from_store(store));
  REQUIRE(a.run.queries.size() == b.run.queries.size());
  for (const auto& [q, ranking] : a.run.queries) {
    CHECK(ranking_ids(ranking) == ranking_ids(b.run.queries.at(q)));
  }

  store.set("retrieval.fine_tune", "true");
  store.set("output_dir", "out-ft");
  const RetrieveSummary c = run_retrieve(PipelineConfig::from_store(store));
  CHECK(c.triplets == 40 * 3 * 2);
  CHECK(c.epoch_mean_loss.size() == 2);
  fs::remove_all(dir);
}
