// Writes synthetic check-worthiness and claim-retrieval datasets, with a
// ready-to-run config.toml, for trying the claimcheck CLI end to end.

#include <CLI11.hpp>
#include <cstdio>
#include <string>

#include "claimcheck/error.hpp"
#include "synthetic.hpp"

int main(int argc, char** argv) {
  CLI::App app{"claimcheck-synth: synthetic demo datasets"};
  app.require_subcommand(1);

  std::string out;
  std::uint64_t seed = 7;
  synth::CheckworthyOptions cw;
  synth::RetrievalOptions rt;

  auto* checkworthy = app.add_subcommand("checkworthy", "Tweets, annotations, token embeddings");
  checkworthy->add_option("--out", out, "Output directory")->required();
  checkworthy->add_option("--seed", seed, "Generator seed");
  checkworthy->add_option("--train", cw.train, "Train tweets");
  checkworthy->add_option("--dev", cw.dev, "Dev tweets");
  checkworthy->add_option("--test", cw.test, "Test tweets");

  auto* retrieval = app.add_subcommand("retrieval", "Claims, queries, qrels, sentence embeddings");
  retrieval->add_option("--out", out, "Output directory")->required();
  retrieval->add_option("--seed", seed, "Generator seed");
  retrieval->add_option("--claims", rt.claims, "Verified claims in the store");
  retrieval->add_option("--train", rt.train_queries, "Training queries");
  retrieval->add_option("--test", rt.test_queries, "Test queries");
  retrieval->add_option("--dim", rt.dim, "Embedding width");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*checkworthy) {
      cw.seed = seed;
      synth::write_checkworthy(out, synth::make_checkworthy(cw));
    } else {
      rt.seed = seed;
      synth::write_retrieval(out, synth::make_retrieval(rt));
    }
  } catch (const claimcheck::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  std::printf("wrote %s/config.toml\n", out.c_str());
  return 0;
}
