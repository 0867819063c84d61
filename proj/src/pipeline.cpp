#include "claimcheck/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <set>

#include "claimcheck/error.hpp"
#include "claimcheck/tensor.hpp"

namespace claimcheck {

namespace fs = std::filesystem;

namespace {

constexpr const char* kSnapshotName = "config.resolved.toml";

std::vector<double> grid_axis(const ConfigStore& s, const std::string& prefix) {
  const double lo = s.get_double(prefix + "_min_exp", -3.0);
  const double hi = s.get_double(prefix + "_max_exp", 3.0);
  const auto steps = s.get_int(prefix + "_steps", 30);
  if (steps < 1) {
    throw Error(ErrorCode::kInvalidArgument, prefix + "_steps must be >= 1");
  }
  return log_space(lo, hi, static_cast<std::size_t>(steps));
}

std::size_t non_negative(std::int64_t v, const std::string& key) {
  if (v < 0) throw Error(ErrorCode::kInvalidArgument, key + " must be >= 0");
  return static_cast<std::size_t>(v);
}

void require_file(const fs::path& path, const std::string& key) {
  if (path.empty()) {
    throw Error(ErrorCode::kIo, "config key " + key + " is required");
  }
  if (!fs::exists(path)) {
    throw Error(ErrorCode::kIo, key + ": no such file " + path.string());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << text;
}

void prepare_dir(const PipelineConfig& cfg, const fs::path& dir) {
  fs::create_directories(dir);
  write_text(dir / kSnapshotName, cfg.snapshot);
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) {
    throw Error(ErrorCode::kParse, path.string() + " is not valid JSON");
  }
  return j;
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

const fs::path& split_path(const PipelineConfig& cfg, const std::string& split) {
  if (split == "train") return cfg.data.train_tweets;
  if (split == "dev") return cfg.data.dev_tweets;
  if (split == "test") return cfg.data.test_tweets;
  throw Error(ErrorCode::kInvalidArgument, "unknown split " + split);
}

fs::path features_dir(const PipelineConfig& cfg) {
  return cfg.output_dir / "features";
}

VectorMap to_vector_map(const EmbeddingTensor& t, const std::string& what) {
  if (t.kind() != TensorKind::sentence) {
    throw Error(ErrorCode::kValidation, what + " must be a sentence tensor");
  }
  VectorMap out;
  for (std::size_t u = 0; u < t.unit_count(); ++u) {
    const auto row = t.row(u);
    Eigen::VectorXd v(static_cast<Eigen::Index>(row.size()));
    for (std::size_t d = 0; d < row.size(); ++d) {
      v(static_cast<Eigen::Index>(d)) = row[d];
    }
    out.emplace(t.unit_ids()[u], std::move(v));
  }
  return out;
}

VectorMap project(const VectorMap& in, const ProjectionModel& model) {
  VectorMap out;
  for (const auto& [id, v] : in) out.emplace(id, model.apply(v));
  return out;
}

void normalize_rows(Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const double n = m.row(r).norm();
    if (n > 0.0) m.row(r) /= n;
  }
}

std::vector<fs::path> manifest_models(const PipelineConfig& cfg) {
  const fs::path manifest = cfg.output_dir / "models" / "manifest.json";
  const auto j = read_json(manifest);
  std::vector<fs::path> out;
  for (const auto& m : j.at("models")) {
    out.push_back(cfg.output_dir / "models" / m.at("dir").get<std::string>());
  }
  return out;
}

}  // namespace

PipelineConfig PipelineConfig::from_store(const ConfigStore& s) {
  PipelineConfig cfg;
  cfg.run_id = s.get_string("run_id", "claimcheck");
  cfg.seed = static_cast<std::uint64_t>(s.get_int("seed", 42));
  cfg.output_dir = s.get_path("output_dir");
  if (cfg.output_dir.empty()) cfg.output_dir = (s.base_dir() / "out").lexically_normal();

  auto& d = cfg.data;
  d.train_tweets = s.get_path("data.train_tweets");
  d.dev_tweets = s.get_path("data.dev_tweets");
  d.test_tweets = s.get_path("data.test_tweets");
  d.annotations = s.get_path("data.annotations");
  d.embeddings = s.get_path("data.embeddings");
  d.word_table = s.get_path("data.word_table");
  d.claims = s.get_path("data.claims");
  d.claim_text_embeddings = s.get_path("data.claim_text_embeddings");
  d.claim_title_embeddings = s.get_path("data.claim_title_embeddings");
  d.query_embeddings = s.get_path("data.query_embeddings");
  d.retrieval_train_tweets = s.get_path("data.retrieval_train_tweets");
  d.retrieval_test_tweets = s.get_path("data.retrieval_test_tweets");
  d.train_qrels = s.get_path("data.train_qrels");
  d.test_qrels = s.get_path("data.test_qrels");

  const Language lang = parse_language(s.get_string("language", "en"));
  FeatureConfig f = FeatureConfig::for_language(lang);
  f.use_stopwords = s.get_bool("features.use_stopwords", f.use_stopwords);
  f.use_pos = s.get_bool("features.use_pos", f.use_pos);
  f.use_ne = s.get_bool("features.use_ne", f.use_ne);
  f.use_dep = s.get_bool("features.use_dep", f.use_dep);
  f.use_embedding = s.get_bool("features.use_embedding", f.use_embedding);
  f.dep_mode = parse_dep_mode(
      s.get_string("features.dep_mode", std::string(dep_mode_name(f.dep_mode))));
  f.pooling = parse_pooling(
      s.get_string("features.pooling", std::string(pooling_name(f.pooling))));
  cfg.features = f;

  for (const auto& e : s.get_list("grid.energies",
                                  {"100", "99", "98", "97", "96", "95"})) {
    int v = 0;
    auto res = std::from_chars(e.data(), e.data() + e.size(), v);
    if (res.ec != std::errc() || res.ptr != e.data() + e.size()) {
      throw Error(ErrorCode::kInvalidArgument, "grid.energies: bad value '" + e + "'");
    }
    cfg.grid.energies.push_back(v);
  }
  cfg.grid.Cs = grid_axis(s, "grid.c");
  cfg.grid.gammas = grid_axis(s, "grid.gamma");

  auto& g = cfg.grid_options;
  g.workers = non_negative(s.get_int("grid.workers", 1), "grid.workers");
  const std::string metric = s.get_string("grid.metric", "map");
  if (metric == "map") {
    g.metric = SelectionMetric::map;
  } else if (metric == "p@30") {
    g.metric = SelectionMetric::precision_at_30;
  } else {
    throw Error(ErrorCode::kInvalidArgument,
                "grid.metric must be map or p@30, got '" + metric + "'");
  }
  g.fit_pca_on_dev = s.get_bool("grid.fit_pca_on_dev", false);
  g.seed = cfg.seed;
  g.base.tol = s.get_double("svm.tol", g.base.tol);
  g.base.max_iterations = non_negative(
      s.get_int("svm.max_iterations", static_cast<std::int64_t>(g.base.max_iterations)),
      "svm.max_iterations");
  g.base.positive_weight = s.get_double("svm.positive_weight", 1.0);
  g.base.negative_weight = s.get_double("svm.negative_weight", 1.0);
  cfg.ensemble_size = non_negative(s.get_int("svm.ensemble_size", 3), "svm.ensemble_size");
  if (s.has("svm.energy")) cfg.svm_energy = static_cast<int>(s.get_int("svm.energy", 100));
  if (s.has("svm.C")) cfg.svm_C = s.get_double("svm.C", 1.0);
  if (s.has("svm.gamma")) cfg.svm_gamma = s.get_double("svm.gamma", 1.0);
  for (const auto& m : s.get_list("predict.models", {})) {
    fs::path p(m);
    cfg.predict_models.push_back(p.is_relative() ? (s.base_dir() / p).lexically_normal() : p);
  }

  auto& p = cfg.projection;
  p.batch_size = non_negative(s.get_int("projection.batch_size", 8), "projection.batch_size");
  p.epochs = non_negative(s.get_int("projection.epochs", 2), "projection.epochs");
  p.learning_rate = s.get_double("projection.learning_rate", 1e-3);
  p.margin = s.get_double("projection.margin", 1.0);
  p.seed = cfg.seed;

  auto& r = cfg.retrieval;
  r.k = non_negative(s.get_int("retrieval.k", 1000), "retrieval.k");
  r.negatives = non_negative(s.get_int("retrieval.negatives", 3), "retrieval.negatives");
  r.fine_tune = s.get_bool("retrieval.fine_tune", false);
  r.exact_cosine = s.get_bool("retrieval.exact_cosine", false);
  r.normalize = s.get_bool("retrieval.normalize", false);
  r.leaf_size = non_negative(s.get_int("retrieval.leaf_size", 16), "retrieval.leaf_size");

  cfg.snapshot = s.resolved_snapshot();
  cfg.validate();
  return cfg;
}

void PipelineConfig::validate() const {
  if (run_id.empty()) throw Error(ErrorCode::kValidation, "run_id must be non-empty");
  if (run_id.find_first_of("\t\n") != std::string::npos) {
    throw Error(ErrorCode::kValidation, "run_id must not contain tabs or newlines");
  }
  features.validate();
  if (grid.size() == 0) throw Error(ErrorCode::kValidation, "grid is empty");
  if (ensemble_size == 0) {
    throw Error(ErrorCode::kValidation, "svm.ensemble_size must be >= 1");
  }
  if (svm_energy.has_value() != svm_C.has_value() ||
      svm_C.has_value() != svm_gamma.has_value()) {
    throw Error(ErrorCode::kValidation,
                "svm.energy, svm.C and svm.gamma must be given together");
  }
}

EncodeSummary run_encode(const PipelineConfig& cfg) {
  const FeatureConfig& f = cfg.features;
  require_file(cfg.data.train_tweets, "data.train_tweets");
  require_file(cfg.data.annotations, "data.annotations");
  const bool word_avg = f.pooling == Pooling::avg_word;
  if (f.use_embedding) {
    if (word_avg) {
      require_file(cfg.data.word_table, "data.word_table");
    } else {
      require_file(cfg.data.embeddings, "data.embeddings");
    }
  }

  std::vector<std::pair<std::string, std::vector<TweetRecord>>> splits;
  for (const std::string split : {"train", "dev", "test"}) {
    const fs::path& path = split_path(cfg, split);
    if (split != "train" && path.empty()) continue;
    require_file(path, "data." + split + "_tweets");
    splits.emplace_back(split, load_tweets(path, f.language));
  }
  std::vector<TweetRecord> all;
  for (const auto& [name, tweets] : splits) {
    all.insert(all.end(), tweets.begin(), tweets.end());
  }
  const AnnotationSet annotations = load_annotations(cfg.data.annotations);
  validate_annotations_against(annotations, all);
  std::map<std::string, const AnnotatedTweet*> by_id;
  for (const auto& a : annotations.tweets) by_id.emplace(a.tweet_id, &a);
  auto annotation_of = [&](const std::string& id) -> const AnnotatedTweet& {
    auto it = by_id.find(id);
    if (it == by_id.end()) {
      throw Error(ErrorCode::kValidation,
                  "tweet " + id + " has no annotation in " + cfg.data.annotations.string());
    }
    return *it->second;
  };

  DepVocab vocab(f.dep_mode, {});
  if (f.use_dep) {
    std::vector<AnnotatedTweet> train_ann;
    for (const auto& t : splits.front().second) train_ann.push_back(annotation_of(t.id));
    vocab = build_dep_vocab(train_ann, f.dep_mode, f.use_stopwords);
  }

  EmbeddingTensor tensor;
  WordTable words;
  EmbeddingSource source;
  std::size_t emb_dim = 0;
  if (f.use_embedding) {
    if (word_avg) {
      words = WordTable::from_tensor(load_embeddings(cfg.data.word_table));
      source.words = &words;
      emb_dim = words.dim();
    } else {
      tensor = load_embeddings(cfg.data.embeddings);
      source.tensor = &tensor;
      emb_dim = pooled_dim(f.pooling, tensor.dim());
    }
  }

  EncodeSummary summary;
  summary.segments = segment_layout(f, vocab, emb_dim);
  for (const auto& s : summary.segments) summary.total_dim += s.second;
  summary.dep_vocab_size = vocab.size();
  if (summary.total_dim == 0) {
    throw Error(ErrorCode::kValidation, "feature configuration selects no segments");
  }

  const fs::path dir = features_dir(cfg);
  prepare_dir(cfg, dir);
  nlohmann::json split_info = nlohmann::json::object();
  for (const auto& [name, tweets] : splits) {
    std::vector<std::string> ids;
    std::vector<float> values;
    values.reserve(tweets.size() * summary.total_dim);
    std::vector<std::string> degenerate;
    for (const auto& t : tweets) {
      const FeatureVector fv = fuse_features(annotation_of(t.id), f, vocab, source);
      if (fv.total_dim != summary.total_dim) {
        throw Error(ErrorCode::kShapeMismatch,
                    "tweet " + t.id + " encoded to " + std::to_string(fv.total_dim) +
                        " dims, expected " + std::to_string(summary.total_dim));
      }
      for (double v : fv.flatten()) values.push_back(static_cast<float>(v));
      if (fv.degenerate) degenerate.push_back(t.id);
      ids.push_back(t.id);
    }
    write_embeddings(dir / (name + ".ckem"),
                     EmbeddingTensor::sentence(ids, summary.total_dim, std::move(values)));
    summary.split_sizes.emplace_back(name, tweets.size());
    summary.degenerate += degenerate.size();
    split_info[name] = {{"count", tweets.size()}, {"degenerate", degenerate}};
  }

  nlohmann::json segs = nlohmann::json::array();
  for (const auto& [name, len] : summary.segments) {
    segs.push_back({{"name", name}, {"dim", len}});
  }
  nlohmann::json dep = nlohmann::json::array();
  for (const auto& k : vocab.entries()) {
    dep.push_back(vocab.mode() == DepMode::pair
                      ? nlohmann::json{k.child_pos, k.dep_rel}
                      : nlohmann::json{k.child_pos, k.dep_rel, k.parent_pos});
  }
  const nlohmann::json sidecar = {
      {"segments", segs},
      {"total_dim", summary.total_dim},
      {"language", language_name(f.language)},
      {"use_stopwords", f.use_stopwords},
      {"use_pos", f.use_pos},
      {"use_ne", f.use_ne},
      {"use_dep", f.use_dep},
      {"use_embedding", f.use_embedding},
      {"dep_mode", dep_mode_name(f.dep_mode)},
      {"pooling", pooling_name(f.pooling)},
      {"dep_vocab", dep},
      {"splits", split_info},
      {"unknown_ne_count", annotations.unknown_ne_count},
  };
  write_text(dir / "features.json", sidecar.dump(2) + "\n");
  return summary;
}

LabeledSet load_labeled_split(const PipelineConfig& cfg, const std::string& split) {
  const fs::path& tweets_path = split_path(cfg, split);
  require_file(tweets_path, "data." + split + "_tweets");
  const fs::path feat_path = features_dir(cfg) / (split + ".ckem");
  require_file(feat_path, split + " features (run encode first)");
  const EmbeddingTensor t = load_embeddings(feat_path);
  const auto tweets = load_tweets(tweets_path, cfg.features.language);
  std::map<std::string, const TweetRecord*> by_id;
  for (const auto& tw : tweets) by_id.emplace(tw.id, &tw);

  LabeledSet set;
  set.X.resize(static_cast<Eigen::Index>(t.unit_count()), static_cast<Eigen::Index>(t.dim()));
  for (std::size_t u = 0; u < t.unit_count(); ++u) {
    const std::string& id = t.unit_ids()[u];
    auto it = by_id.find(id);
    if (it == by_id.end()) {
      throw Error(ErrorCode::kValidation,
                  feat_path.string() + ": unit " + id + " is not in " + tweets_path.string());
    }
    const auto row = t.row(u);
    for (std::size_t d = 0; d < row.size(); ++d) {
      set.X(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(d)) = row[d];
    }
    set.ids.push_back(id);
    set.topics.push_back(it->second->topic_id);
    set.labels.push_back(it->second->checkworthy_label.value_or(-1));
  }
  return set;
}

GridResult run_gridsearch(const PipelineConfig& cfg) {
  const LabeledSet train = load_labeled_split(cfg, "train");
  const LabeledSet dev = load_labeled_split(cfg, "dev");
  for (const LabeledSet* s : {&train, &dev}) {
    for (std::size_t i = 0; i < s->size(); ++i) {
      if (s->labels[i] < 0) {
        throw Error(ErrorCode::kValidation,
                    "tweet " + s->ids[i] + " has no checkworthy_label");
      }
    }
  }
  const GridResult result = grid_search(train, dev, cfg.grid, cfg.grid_options);

  prepare_dir(cfg, cfg.output_dir);
  std::string tsv = "index\tenergy\tC\tgamma\tpca_dim\tdev_metric\tdev_accuracy\tsupport\terror\n";
  auto cell_json = [](const GridCell& c) {
    nlohmann::json j = {{"index", c.index},       {"energy", c.energy},
                        {"C", c.C},               {"gamma", c.gamma},
                        {"dev_metric", c.dev_metric},
                        {"dev_accuracy", c.dev_accuracy},
                        {"pca_dim", c.pca_dim},   {"support_count", c.support_count}};
    if (c.error) j["error"] = *c.error;
    return j;
  };
  std::size_t failed = 0;
  for (const auto& c : result.cells) {
    tsv += std::to_string(c.index) + "\t" + std::to_string(c.energy) + "\t" +
           format_double(c.C) + "\t" + format_double(c.gamma) + "\t" +
           std::to_string(c.pca_dim) + "\t" + format_double(c.dev_metric) + "\t" +
           format_double(c.dev_accuracy) + "\t" + std::to_string(c.support_count) +
           "\t" + c.error.value_or("") + "\n";
    if (c.error) ++failed;
  }
  write_text(cfg.output_dir / "grid.tsv", tsv);

  nlohmann::json top = nlohmann::json::array();
  for (std::size_t i : top_cells(result, cfg.ensemble_size)) {
    top.push_back(cell_json(result.cells[i]));
  }
  const nlohmann::json summary = {
      {"seed", result.seed},
      {"cells", result.cells.size()},
      {"failed", failed},
      {"metric", cfg.grid_options.metric == SelectionMetric::map ? "map" : "p@30"},
      {"best", result.best ? cell_json(result.cells[*result.best]) : nlohmann::json()},
      {"top", top},
  };
  write_text(cfg.output_dir / "grid.json", summary.dump(2) + "\n");
  return result;
}

std::vector<fs::path> run_train(const PipelineConfig& cfg) {
  const LabeledSet train = load_labeled_split(cfg, "train");
  std::optional<LabeledSet> dev;
  if (cfg.grid_options.fit_pca_on_dev) dev = load_labeled_split(cfg, "dev");

  struct Spec {
    int energy;
    double C;
    double gamma;
  };
  std::vector<Spec> specs;
  if (cfg.svm_energy) {
    specs.push_back({*cfg.svm_energy, *cfg.svm_C, *cfg.svm_gamma});
  } else {
    const fs::path grid_path = cfg.output_dir / "grid.json";
    require_file(grid_path, "grid.json (run gridsearch first or set svm.energy/C/gamma)");
    const auto grid = read_json(grid_path);
    for (const auto& c : grid.at("top")) {
      if (specs.size() == cfg.ensemble_size) break;
      specs.push_back({c.at("energy").get<int>(), c.at("C").get<double>(),
                       c.at("gamma").get<double>()});
    }
    if (specs.empty()) {
      throw Error(ErrorCode::kValidation, grid_path.string() + " lists no usable cells");
    }
  }

  const fs::path models_dir = cfg.output_dir / "models";
  prepare_dir(cfg, models_dir);
  std::vector<fs::path> dirs;
  nlohmann::json listing = nlohmann::json::array();
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const Spec& s = specs[i];
    const Classifier model = train_classifier(train, s.energy, s.C, s.gamma,
                                              cfg.grid_options.base,
                                              dev ? &*dev : nullptr);
    char name[32];
    std::snprintf(name, sizeof(name), "model_%02zu", i);
    save_classifier(model, models_dir / name);
    dirs.push_back(models_dir / name);
    listing.push_back({{"dir", name}, {"energy", s.energy}, {"C", s.C}, {"gamma", s.gamma}});
  }
  write_text(models_dir / "manifest.json",
             nlohmann::json{{"models", listing}}.dump(2) + "\n");
  return dirs;
}

PredictSummary run_predict(const PipelineConfig& cfg) {
  const std::vector<fs::path> paths =
      cfg.predict_models.empty() ? manifest_models(cfg) : cfg.predict_models;
  std::vector<Classifier> models;
  for (const auto& p : paths) models.push_back(load_classifier(p));
  if (models.empty()) throw Error(ErrorCode::kValidation, "no models to predict with");

  const LabeledSet test = load_labeled_split(cfg, "test");
  const EnsembleOutput out = ensemble(models, test.X);

  std::map<std::string, std::pair<std::vector<std::string>, std::vector<double>>> grouped;
  for (std::size_t i = 0; i < test.size(); ++i) {
    grouped[test.topics[i]].first.push_back(test.ids[i]);
    grouped[test.topics[i]].second.push_back(out.scores[i]);
  }
  PredictSummary summary;
  summary.run.run_id = cfg.run_id;
  for (const auto& [topic, entry] : grouped) {
    summary.run.queries[topic] = rank_by_score(entry.first, entry.second);
  }
  prepare_dir(cfg, cfg.output_dir);
  summary.run_path = cfg.output_dir / "predictions.tsv";
  write_classification_run(summary.run_path, summary.run);

  const bool labelled = std::all_of(test.labels.begin(), test.labels.end(),
                                    [](int l) { return l >= 0; });
  if (labelled) {
    const auto tweets = load_tweets(cfg.data.test_tweets, cfg.features.language);
    nlohmann::json metrics = evaluate(summary.run, checkworthy_qrels(tweets),
                                      MetricSpec::parse("map,p@1,p@3,p@5,p@10,p@30"));
    metrics["models"] = paths.size();
    summary.metrics = metrics;
    write_text(cfg.output_dir / "metrics.json", metrics.dump(2) + "\n");
  }
  return summary;
}

RetrieveSummary run_retrieve(const PipelineConfig& cfg) {
  const auto& d = cfg.data;
  const auto& r = cfg.retrieval;
  require_file(d.claims, "data.claims");
  require_file(d.claim_text_embeddings, "data.claim_text_embeddings");
  require_file(d.claim_title_embeddings, "data.claim_title_embeddings");
  require_file(d.query_embeddings, "data.query_embeddings");
  require_file(d.retrieval_test_tweets, "data.retrieval_test_tweets");
  if (r.fine_tune) {
    require_file(d.retrieval_train_tweets, "data.retrieval_train_tweets");
    require_file(d.train_qrels, "data.train_qrels");
  }

  const auto claims = load_claims(d.claims);
  std::set<std::string> claim_ids;
  for (const auto& c : claims) claim_ids.insert(c.claim_id);
  const VectorMap text = to_vector_map(load_embeddings(d.claim_text_embeddings), "claim text");
  const VectorMap title = to_vector_map(load_embeddings(d.claim_title_embeddings), "claim title");
  for (const VectorMap* m : {&text, &title}) {
    for (const auto& [id, v] : *m) {
      if (!claim_ids.count(id)) {
        throw Error(ErrorCode::kValidation, "embedding for unknown claim " + id);
      }
    }
  }
  const VectorMap queries = to_vector_map(load_embeddings(d.query_embeddings), "query");
  const ClaimStore raw_store = ClaimStore::from_fields(text, title);

  RetrieveSummary summary;
  summary.store_size = raw_store.size();
  ProjectionModel model = ProjectionModel::identity(raw_store.dim(), cfg.projection.margin);
  const fs::path out_dir = cfg.output_dir / "retrieval";
  prepare_dir(cfg, out_dir);

  if (r.fine_tune) {
    const auto train_tweets = load_tweets(d.retrieval_train_tweets, cfg.features.language);
    const Qrels train_qrels = load_qrels(d.train_qrels, train_tweets, claims);
    std::map<std::string, std::vector<std::string>> negatives;
    for (const auto& [q, rel] : train_qrels.pairs) {
      auto it = queries.find(q);
      if (it == queries.end()) {
        throw Error(ErrorCode::kValidation, "no query embedding for tweet " + q);
      }
      negatives[q] = mine_negatives(it->second, raw_store, rel, r.negatives);
    }
    const TripletSet set = build_triplets(train_qrels, queries, text, title, negatives);
    summary.triplets = set.triplets.size();
    const TrainResult trained = train_projection(set.triplets, cfg.projection);
    model = trained.model;
    summary.epoch_mean_loss = trained.epoch_mean_loss;
    save_projection(model, out_dir / "projection");
  }

  ClaimStore store = ClaimStore::from_fields(project(text, model), project(title, model));
  if (r.normalize) normalize_rows(store.vectors);

  const auto test_tweets = load_tweets(d.retrieval_test_tweets, cfg.features.language);
  const std::size_t k = std::min(r.k, store.size());
  std::optional<ClaimIndex> index;
  if (!r.exact_cosine) {
    index.emplace(store, r.leaf_size);
    save_kdtree(index->tree(), index->ids(), out_dir / "claim_index");
  }
  summary.run.run_id = cfg.run_id;
  for (const auto& t : test_tweets) {
    auto it = queries.find(t.id);
    if (it == queries.end()) {
      throw Error(ErrorCode::kValidation, "no query embedding for tweet " + t.id);
    }
    Eigen::VectorXd q = model.apply(it->second);
    if (r.normalize && q.norm() > 0.0) q.normalize();
    summary.run.queries[t.id] = r.exact_cosine ? cosine_rank(q, store, k) : index->query(q, k);
  }
  summary.run_path = out_dir / "run.tsv";
  write_retrieval_run(summary.run_path, summary.run);

  if (!d.test_qrels.empty()) {
    require_file(d.test_qrels, "data.test_qrels");
    const Qrels qrels = load_qrels(d.test_qrels, test_tweets, claims);
    nlohmann::json metrics =
        evaluate(summary.run, qrels, MetricSpec::parse("map@1,map@3,map@5,map@10,map"));
    metrics["fine_tune"] = r.fine_tune;
    metrics["search"] = r.exact_cosine ? "cosine" : "kd_tree";
    summary.metrics = metrics;
    write_text(out_dir / "metrics.json", metrics.dump(2) + "\n");
  }
  return summary;
}

}  // namespace claimcheck
