// Command-line entry point: train, evaluate, rank a single query, export
// attention traces, and render the document-length bucket report.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <fstream>
#include <iomanip>
#include <iostream>

#include "dgmn/checkpoint.hpp"
#include "dgmn/config.hpp"
#include "dgmn/trace_export.hpp"

using nlohmann::json;

namespace {

struct CommonOpts {
  std::string config_path;
  std::vector<std::string> overrides;  // key=value
};

dgmn::RunConfig effective_config(const CommonOpts& o) {
  dgmn::RunConfig cfg = o.config_path.empty() ? dgmn::RunConfig{} : dgmn::load_run_config(o.config_path);
  for (const auto& kv : o.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw dgmn::config_error("--set expects key=value, got '" + kv + "'");
    dgmn::apply_override(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  return cfg;
}

void add_common(CLI::App* app, CommonOpts& o) {
  app->add_option("--config", o.config_path, "run configuration file (key=value sections)");
  app->add_option("--set", o.overrides, "override a config value, e.g. --set train.seed=7");
}

dgmn::Example parse_query(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw dgmn::data_error("cannot read query file " + path);
  json j = json::parse(in);
  dgmn::Example ex;
  for (const auto& s : j.at("doc")) ex.doc.push_back(s.get<std::string>());
  for (const auto& s : j.at("ctx")) ex.ctx.push_back(s.get<std::string>());
  if (j.contains("resp")) ex.resp = j.at("resp").get<std::string>();
  ex.label = 1;
  ex.gid = "query";
  return ex;
}

int cmd_train(const CommonOpts& common, const std::string& train_path, const std::string& val_path,
              const std::string& emb_path, const std::string& ckpt_path, std::string vocab_path,
              std::string log_path, int min_count) {
  dgmn::RunConfig cfg = effective_config(common);
  std::cerr << "effective config:\n" << dgmn::serialize_run_config(cfg);

  dgmn::Corpus train_corpus = dgmn::load_corpus(train_path);
  dgmn::Corpus val_corpus = dgmn::load_corpus(val_path);
  if (std::none_of(train_corpus.begin(), train_corpus.end(),
                   [](const dgmn::Example& e) { return e.label == 0; }))
    train_corpus = dgmn::sample_negatives(train_corpus, cfg.model.pipeline.negatives_per_positive,
                                          cfg.train.seed);

  dgmn::Vocabulary vocab = dgmn::build_vocab(train_corpus, min_count);
  if (vocab_path.empty()) vocab_path = ckpt_path + ".vocab";
  vocab.save(vocab_path);

  dgmn::EmbeddingTable<float> emb;
  if (!emb_path.empty()) {
    emb = dgmn::load_pretrained<float>(emb_path, vocab, cfg.model.d_emb, cfg.train.seed,
                                       cfg.model.trainable_embeddings);
    std::cerr << "embedding coverage: " << std::fixed << std::setprecision(4) << emb.coverage
              << "\n";
  } else {
    emb = dgmn::init_embeddings<float>(vocab, cfg.model.d_emb, cfg.train.seed,
                                       cfg.model.trainable_embeddings);
  }
  dgmn::DgmnModel<float> model(cfg.model, std::move(emb), cfg.train.seed);

  std::ofstream log_file;
  if (!log_path.empty()) {
    log_file.open(log_path, std::ios::binary);
    if (!log_file) throw dgmn::data_error("cannot write log file " + log_path);
  }
  const auto t0 = std::chrono::steady_clock::now();
  dgmn::TrainResult res = dgmn::train(model, train_corpus, val_corpus, vocab, cfg.train,
                                      log_file.is_open() ? &log_file : nullptr,
                                      [&](const dgmn::EpochLog& e) {
                                        const auto dt = std::chrono::duration<double>(
                                                            std::chrono::steady_clock::now() - t0)
                                                            .count();
                                        std::cerr << dgmn::format_epoch_log(e) << " wall=" << std::fixed
                                                  << std::setprecision(1) << dt << "s\n";
                                        return true;
                                      });
  dgmn::save_checkpoint(model, cfg, vocab.hash(), ckpt_path);
  std::cerr << "best epoch " << res.best_epoch << " (val r@1 " << std::setprecision(4)
            << res.best_val_r1 << "), checkpoint written to " << ckpt_path << "\n";
  return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& vocab_path,
             const std::string& data_path, const std::string& results_path) {
  dgmn::Vocabulary vocab = dgmn::Vocabulary::load(vocab_path);
  dgmn::LoadedCheckpoint ck = dgmn::load_checkpoint(ckpt_path, vocab);
  dgmn::Corpus corpus = dgmn::load_corpus(data_path);
  dgmn::EvalResult res = dgmn::evaluate(ck.model, corpus, vocab);
  std::cout << std::fixed << std::setprecision(4) << "r@1 " << res.metrics.r_at_1 << " r@2 "
            << res.metrics.r_at_2 << " r@5 " << res.metrics.r_at_5 << "\n";
  if (!results_path.empty()) {
    std::ofstream out(results_path, std::ios::binary);
    if (!out) throw dgmn::data_error("cannot write results file " + results_path);
    for (const auto& r : res.results) {
      json j;
      j["gid"] = r.gid;
      j["scores"] = r.scores;
      j["positive_index"] = r.positive_index;
      j["rank"] = r.rank;
      j["doc_tokens"] = r.doc_token_count;
      out << j.dump() << "\n";
    }
  }
  return 0;
}

int cmd_rank(const std::string& ckpt_path, const std::string& vocab_path,
             const std::string& query_path) {
  dgmn::Vocabulary vocab = dgmn::Vocabulary::load(vocab_path);
  dgmn::LoadedCheckpoint ck = dgmn::load_checkpoint(ckpt_path, vocab);

  std::ifstream in(query_path);
  if (!in) throw dgmn::data_error("cannot read query file " + query_path);
  json j = json::parse(in);
  dgmn::Example base;
  for (const auto& s : j.at("doc")) base.doc.push_back(s.get<std::string>());
  for (const auto& s : j.at("ctx")) base.ctx.push_back(s.get<std::string>());
  std::vector<std::string> candidates;
  for (const auto& s : j.at("candidates")) candidates.push_back(s.get<std::string>());
  if (candidates.empty()) throw dgmn::data_error("rank: empty candidate list");

  dgmn::NoGradGuard ng;
  base.resp = candidates[0];
  const dgmn::EncodedExample ex0 = dgmn::encode_example(base, vocab, ck.model.cfg.pipeline);
  const auto cache = ck.model.ground(ex0);
  std::vector<std::pair<double, std::size_t>> scored;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto ids =
        dgmn::encode_sequence(dgmn::tokenize(candidates[i]), vocab, ck.model.cfg.pipeline.l_r);
    scored.emplace_back(static_cast<double>(ck.model.score_with_cache(cache, ids).item()), i);
  }
  std::stable_sort(scored.begin(), scored.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  std::cout << std::fixed << std::setprecision(6);
  for (const auto& [s, i] : scored) std::cout << s << "\t" << candidates[i] << "\n";
  return 0;
}

int cmd_trace(const std::string& ckpt_path, const std::string& vocab_path,
              const std::string& query_path, const std::string& out_path) {
  dgmn::Vocabulary vocab = dgmn::Vocabulary::load(vocab_path);
  dgmn::LoadedCheckpoint ck = dgmn::load_checkpoint(ckpt_path, vocab);
  dgmn::Example q = parse_query(query_path);
  if (q.resp.empty()) throw dgmn::data_error("trace: query needs a 'resp' field");
  const dgmn::EncodedExample ex = dgmn::encode_example(q, vocab, ck.model.cfg.pipeline);
  dgmn::NoGradGuard ng;
  dgmn::ForwardTrace<float> trace;
  ck.model.forward(ex, &trace);
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw dgmn::data_error("cannot write trace file " + out_path);
  out << dgmn::export_trace_json(trace, ex, vocab).dump(2) << "\n";
  std::cerr << "trace written to " << out_path << "\n";
  return 0;
}

int cmd_report(const std::string& results_path, const std::string& edges_str) {
  std::vector<double> edges;
  {
    std::stringstream ss(edges_str);
    std::string tok;
    while (std::getline(ss, tok, ',')) edges.push_back(std::stod(tok));
  }
  std::ifstream in(results_path);
  if (!in) throw dgmn::data_error("cannot read results file " + results_path);
  std::vector<dgmn::RankResult> results;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
      dgmn::RankResult r;
      r.gid = j.at("gid").get<std::string>();
      r.scores = j.at("scores").get<std::vector<double>>();
      r.positive_index = j.at("positive_index").get<int>();
      r.rank = j.at("rank").get<int>();
      r.doc_token_count = j.at("doc_tokens").get<int>();
      results.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw dgmn::data_error("results file line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  std::cout << dgmn::format_bucket_table(dgmn::bucket_report(results, edges));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"document-grounded response selection"};
  app.require_subcommand(1);

  CommonOpts common;
  std::string train_path, val_path, emb_path, ckpt_path, vocab_path, log_path, data_path;
  std::string results_path, query_path, out_path, edges_str;
  int min_count = 1;

  auto* train = app.add_subcommand("train", "train a model");
  add_common(train, common);
  train->add_option("--train", train_path, "training corpus (JSON lines)")->required();
  train->add_option("--val", val_path, "validation corpus (JSON lines)")->required();
  train->add_option("--embeddings", emb_path, "GloVe-format embedding file (optional)");
  train->add_option("--checkpoint", ckpt_path, "output checkpoint path")->required();
  train->add_option("--vocab", vocab_path, "output vocabulary path (default <checkpoint>.vocab)");
  train->add_option("--log", log_path, "training log file");
  train->add_option("--min-count", min_count, "vocabulary min token count");

  auto* eval = app.add_subcommand("eval", "evaluate r@k on grouped candidates");
  eval->add_option("--checkpoint", ckpt_path, "checkpoint path")->required();
  eval->add_option("--vocab", vocab_path, "vocabulary path")->required();
  eval->add_option("--data", data_path, "evaluation corpus (complete groups)")->required();
  eval->add_option("--results", results_path, "per-group results file (JSON lines)");

  auto* rank = app.add_subcommand("rank", "rank candidates for one query");
  rank->add_option("--checkpoint", ckpt_path, "checkpoint path")->required();
  rank->add_option("--vocab", vocab_path, "vocabulary path")->required();
  rank->add_option("--query", query_path, "JSON query with doc/ctx/candidates")->required();

  auto* trace = app.add_subcommand("trace", "export attention weights for one query");
  trace->add_option("--checkpoint", ckpt_path, "checkpoint path")->required();
  trace->add_option("--vocab", vocab_path, "vocabulary path")->required();
  trace->add_option("--query", query_path, "JSON query with doc/ctx/resp")->required();
  trace->add_option("--out", out_path, "output trace JSON path")->required();

  auto* report = app.add_subcommand("report", "document-length bucket report");
  report->add_option("--results", results_path, "results file from eval")->required();
  report->add_option("--edges", edges_str, "bucket edges, e.g. 0,25,30,35,52")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);  // prints usage/diagnostic
    return e.get_exit_code() == 0 ? 0 : 2;
  }

  try {
    if (train->parsed())
      return cmd_train(common, train_path, val_path, emb_path, ckpt_path, vocab_path, log_path,
                       min_count);
    if (eval->parsed()) return cmd_eval(ckpt_path, vocab_path, data_path, results_path);
    if (rank->parsed()) return cmd_rank(ckpt_path, vocab_path, query_path);
    if (trace->parsed()) return cmd_trace(ckpt_path, vocab_path, query_path, out_path);
    if (report->parsed()) return cmd_report(results_path, edges_str);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
