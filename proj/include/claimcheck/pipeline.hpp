#pragma once

// End-to-end commands behind the claimcheck CLI. Each command reads the
// resolved PipelineConfig, writes its outputs under output_dir and leaves a
// copy of the resolved configuration there.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "claimcheck/config.hpp"
#include "claimcheck/corpus.hpp"
#include "claimcheck/eval.hpp"
#include "claimcheck/feats.hpp"
#include "claimcheck/grid.hpp"
#include "claimcheck/retrieval.hpp"
#include "json.hpp"

namespace claimcheck {

struct DataPaths {
  // check-worthiness
  std::filesystem::path train_tweets;
  std::filesystem::path dev_tweets;
  std::filesystem::path test_tweets;
  std::filesystem::path annotations;
  std::filesystem::path embeddings;  // token_layers or sentence tensor
  std::filesystem::path word_table;  // sentence tensor keyed by word
  // claim retrieval
  std::filesystem::path claims;
  std::filesystem::path claim_text_embeddings;
  std::filesystem::path claim_title_embeddings;
  std::filesystem::path query_embeddings;
  std::filesystem::path retrieval_train_tweets;
  std::filesystem::path retrieval_test_tweets;
  std::filesystem::path train_qrels;
  std::filesystem::path test_qrels;
};

struct RetrievalOptions {
  std::size_t k = 1000;
  std::size_t negatives = 3;
  bool fine_tune = false;
  bool exact_cosine = false;
  bool normalize = false;  // l2-normalize search vectors after projection
  std::size_t leaf_size = 16;
};

struct PipelineConfig {
  std::string run_id = "claimcheck";
  std::uint64_t seed = 42;
  std::filesystem::path output_dir;
  DataPaths data;
  FeatureConfig features;
  GridSpace grid;
  GridOptions grid_options;
  std::size_t ensemble_size = 3;
  // Explicit model instead of the grid's top cells when set.
  std::optional<int> svm_energy;
  std::optional<double> svm_C;
  std::optional<double> svm_gamma;
  std::vector<std::filesystem::path> predict_models;
  TrainConfig projection;
  RetrievalOptions retrieval;
  std::string snapshot;  // resolved key/value text

  static PipelineConfig from_store(const ConfigStore& store);
  void validate() const;
};

struct EncodeSummary {
  std::vector<std::pair<std::string, std::size_t>> segments;
  std::size_t total_dim = 0;
  std::size_t dep_vocab_size = 0;
  std::vector<std::pair<std::string, std::size_t>> split_sizes;
  std::size_t degenerate = 0;
};

EncodeSummary run_encode(const PipelineConfig& cfg);
GridResult run_gridsearch(const PipelineConfig& cfg);
std::vector<std::filesystem::path> run_train(const PipelineConfig& cfg);

struct PredictSummary {
  RankedRun run;
  std::optional<nlohmann::json> metrics;  // present when test labels exist
  std::filesystem::path run_path;
};

PredictSummary run_predict(const PipelineConfig& cfg);

struct RetrieveSummary {
  RankedRun run;
  std::vector<double> epoch_mean_loss;  // empty without fine-tuning
  std::size_t triplets = 0;
  std::size_t store_size = 0;
  std::optional<nlohmann::json> metrics;
  std::filesystem::path run_path;
};

RetrieveSummary run_retrieve(const PipelineConfig& cfg);

// Loads the split's feature tensor written by run_encode with 0/1 labels.
LabeledSet load_labeled_split(const PipelineConfig& cfg, const std::string& split);

}  // namespace claimcheck
