#include "claimcheck/eval.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "claimcheck/error.hpp"

namespace claimcheck {

namespace {

void check_unique(std::span<const std::string> ranking) {
  std::unordered_set<std::string_view> seen;
  for (const std::string& id : ranking) {
    if (!seen.insert(id).second) {
      throw Error(ErrorCode::kValidation,
                  "duplicate id '" + id + "' in ranking");
    }
  }
}

const std::set<std::string>& relevant_for(const Qrels& qrels,
                                          const std::string& query) {
  const std::set<std::string>* rel = qrels.find(query);
  if (rel == nullptr) {
    throw Error(ErrorCode::kValidation,
                "run query '" + query + "' has no relevance judgments");
  }
  return *rel;
}

// Mean of per-query values; queries with no relevant items are skipped on
// request.
template <typename PerQuery>
double mean_over_queries(const RankedRun& run, const Qrels& qrels,
                         ZeroRelevant zero, PerQuery&& metric) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& [query, ranking] : run.queries) {
    const auto& rel = relevant_for(qrels, query);
    if (rel.empty() && zero == ZeroRelevant::skip) continue;
    sum += metric(ranking_ids(ranking), rel);
    ++n;
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

std::string format_score(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    out.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return out;
}

std::size_t parse_k(const std::string& name, std::size_t prefix) {
  const std::string digits = name.substr(prefix);
  std::size_t k = 0;
  auto res = std::from_chars(digits.data(), digits.data() + digits.size(), k);
  if (digits.empty() || res.ec != std::errc() ||
      res.ptr != digits.data() + digits.size() || k == 0) {
    throw Error(ErrorCode::kInvalidArgument, "bad metric name '" + name + "'");
  }
  return k;
}

}  // namespace

Ranking rank_by_score(std::span<const std::string> ids,
                      std::span<const double> scores) {
  if (ids.size() != scores.size()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "rank_by_score: " + std::to_string(ids.size()) + " ids vs " +
                    std::to_string(scores.size()) + " scores");
  }
  Ranking out;
  out.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) out.push_back({ids[i], scores[i]});
  std::sort(out.begin(), out.end(), [](const ScoredId& a, const ScoredId& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
  });
  return out;
}

std::vector<std::string> ranking_ids(const Ranking& ranking) {
  std::vector<std::string> ids;
  ids.reserve(ranking.size());
  for (const ScoredId& s : ranking) ids.push_back(s.id);
  return ids;
}

double average_precision(std::span<const std::string> ranking,
                         const std::set<std::string>& relevant,
                         ApDenominator denom) {
  check_unique(ranking);
  if (relevant.empty()) return 0.0;
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < ranking.size(); ++i) {
    if (relevant.count(ranking[i])) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(i + 1);
    }
  }
  const std::size_t d =
      denom == ApDenominator::total_relevant ? relevant.size() : hits;
  return d == 0 ? 0.0 : sum / static_cast<double>(d);
}

double precision_at_k(std::span<const std::string> ranking,
                      const std::set<std::string>& relevant, std::size_t k) {
  if (k == 0) throw Error(ErrorCode::kInvalidArgument, "P@k needs k >= 1");
  std::size_t hits = 0;
  const std::size_t n = std::min(k, ranking.size());
  for (std::size_t i = 0; i < n; ++i) hits += relevant.count(ranking[i]);
  return static_cast<double>(hits) / static_cast<double>(k);
}

double mean_average_precision(const RankedRun& run, const Qrels& qrels,
                              ZeroRelevant zero) {
  return mean_over_queries(
      run, qrels, zero,
      [](const std::vector<std::string>& ids, const std::set<std::string>& rel) {
        return average_precision(ids, rel, ApDenominator::total_relevant);
      });
}

double map_at_k(const RankedRun& run, const Qrels& qrels, std::size_t k,
                ApDenominator denom, ZeroRelevant zero) {
  if (k == 0) throw Error(ErrorCode::kInvalidArgument, "MAP@k needs k >= 1");
  return mean_over_queries(
      run, qrels, zero,
      [&](const std::vector<std::string>& ids, const std::set<std::string>& rel) {
        const std::size_t n = std::min(k, ids.size());
        return average_precision(std::span(ids).first(n), rel, denom);
      });
}

double mean_precision_at_k(const RankedRun& run, const Qrels& qrels,
                           std::size_t k, ZeroRelevant zero) {
  return mean_over_queries(
      run, qrels, zero,
      [&](const std::vector<std::string>& ids, const std::set<std::string>& rel) {
        return precision_at_k(ids, rel, k);
      });
}

MetricSpec MetricSpec::parse(const std::string& comma_separated) {
  MetricSpec spec;
  std::stringstream ss(comma_separated);
  std::string name;
  while (std::getline(ss, name, ',')) {
    name.erase(0, name.find_first_not_of(' '));
    name.erase(name.find_last_not_of(' ') + 1);
    if (name.empty()) continue;
    std::transform(name.begin(), name.end(), name.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    if (name.rfind("map@", 0) == 0) {
      parse_k(name, 4);
    } else if (name.rfind("p@", 0) == 0) {
      parse_k(name, 2);
    } else if (name != "map") {
      throw Error(ErrorCode::kInvalidArgument,
                  "unknown metric '" + name + "'");
    }
    spec.names.push_back(name);
  }
  if (spec.names.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "empty metric list");
  }
  return spec;
}

nlohmann::json evaluate(const RankedRun& run, const Qrels& qrels,
                        const MetricSpec& spec) {
  nlohmann::json report;
  report["run_id"] = run.run_id;
  report["queries"] = run.queries.size();
  nlohmann::json aggregate = nlohmann::json::object();
  nlohmann::json per_query = nlohmann::json::object();
  for (const std::string& name : spec.names) {
    double value = 0.0;
    if (name == "map") {
      value = mean_average_precision(run, qrels, spec.zero_relevant);
    } else if (name.rfind("map@", 0) == 0) {
      value = map_at_k(run, qrels, parse_k(name, 4), spec.map_at_k_denominator,
                       spec.zero_relevant);
    } else {
      value = mean_precision_at_k(run, qrels, parse_k(name, 2),
                                  spec.zero_relevant);
    }
    aggregate[name] = value;
  }
  for (const auto& [query, ranking] : run.queries) {
    const auto& rel = relevant_for(qrels, query);
    const auto ids = ranking_ids(ranking);
    nlohmann::json q = nlohmann::json::object();
    for (const std::string& name : spec.names) {
      if (name == "map") {
        q["ap"] = average_precision(ids, rel);
      } else if (name.rfind("map@", 0) == 0) {
        const std::size_t k = std::min(parse_k(name, 4), ids.size());
        q["ap@" + name.substr(4)] = average_precision(
            std::span(ids).first(k), rel, spec.map_at_k_denominator);
      } else {
        q[name] = precision_at_k(ids, rel, parse_k(name, 2));
      }
    }
    per_query[query] = std::move(q);
  }
  report["metrics"] = std::move(aggregate);
  report["per_query"] = std::move(per_query);
  return report;
}

nlohmann::json evaluate_run(const std::filesystem::path& run_path,
                            const std::filesystem::path& qrels_path,
                            const MetricSpec& spec) {
  return evaluate(read_run(run_path), load_qrels(qrels_path), spec);
}

Qrels checkworthy_qrels(const std::vector<TweetRecord>& tweets) {
  Qrels qrels;
  for (const TweetRecord& t : tweets) {
    auto& rel = qrels.pairs[t.topic_id];
    if (!t.checkworthy_label) {
      throw Error(ErrorCode::kValidation,
                  "tweet '" + t.id + "' has no check-worthiness label");
    }
    if (*t.checkworthy_label == 1) rel.insert(t.id);
  }
  return qrels;
}

RankedRun read_run(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  struct Row {
    long rank;
    ScoredId item;
  };
  std::map<std::string, std::vector<Row>> rows;
  RankedRun run;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cols = split_tabs(line);
    const std::string at = path.string() + ":" + std::to_string(line_no);
    std::string query, doc, rank_s, score_s, run_id;
    if (cols.size() == 5) {
      query = cols[0], doc = cols[1], score_s = cols[2], rank_s = cols[3];
      run_id = cols[4];
    } else if (cols.size() == 6) {
      query = cols[0], doc = cols[2], rank_s = cols[3], score_s = cols[4];
      run_id = cols[5];
    } else {
      throw Error(ErrorCode::kParse, at + ": expected 5 or 6 tab-separated columns");
    }
    Row row;
    try {
      std::size_t used = 0;
      row.rank = std::stol(rank_s, &used);
      if (used != rank_s.size()) throw std::invalid_argument(rank_s);
      row.item.score = std::stod(score_s, &used);
      if (used != score_s.size()) throw std::invalid_argument(score_s);
    } catch (const std::exception&) {
      throw Error(ErrorCode::kParse, at + ": bad rank or score");
    }
    row.item.id = doc;
    if (run.run_id.empty()) run.run_id = run_id;
    rows[query].push_back(std::move(row));
  }
  for (auto& [query, list] : rows) {
    std::stable_sort(list.begin(), list.end(),
                     [](const Row& a, const Row& b) { return a.rank < b.rank; });
    Ranking ranking;
    for (Row& r : list) ranking.push_back(std::move(r.item));
    for (std::size_t i = 1; i < ranking.size(); ++i) {
      if (ranking[i].score > ranking[i - 1].score) {
        throw Error(ErrorCode::kValidation,
                    "ranks and scores disagree for query '" + query + "'");
      }
    }
    check_unique(ranking_ids(ranking));
    run.queries[query] = std::move(ranking);
  }
  return run;
}

void write_classification_run(const std::filesystem::path& path,
                              const RankedRun& run) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  for (const auto& [topic, ranking] : run.queries) {
    for (std::size_t i = 0; i < ranking.size(); ++i) {
      out << topic << '\t' << ranking[i].id << '\t'
          << format_score(ranking[i].score) << '\t' << (i + 1) << '\t'
          << run.run_id << '\n';
    }
  }
}

void write_retrieval_run(const std::filesystem::path& path,
                         const RankedRun& run) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  for (const auto& [query, ranking] : run.queries) {
    for (std::size_t i = 0; i < ranking.size(); ++i) {
      out << query << "\tQ0\t" << ranking[i].id << '\t' << (i + 1) << '\t'
          << format_score(ranking[i].score) << '\t' << run.run_id << '\n';
    }
  }
}

void write_qrels(const std::filesystem::path& path, const Qrels& qrels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  for (const auto& [query, docs] : qrels.pairs) {
    for (const std::string& doc : docs) out << query << '\t' << doc << '\n';
  }
}

}  // namespace claimcheck
