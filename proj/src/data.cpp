#include "dgmn/data.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

namespace dgmn {

using nlohmann::json;

namespace {

std::string field_error(std::size_t line_no, const std::string& field, const std::string& why) {
  std::ostringstream os;
  os << "corpus line " << line_no << ": field '" << field << "' " << why;
  return os.str();
}

}  // namespace

Corpus load_corpus(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot read corpus file " + path);
  Corpus corpus;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw data_error("corpus line " + std::to_string(line_no) + ": " + e.what());
    }
    Example ex;
    auto need = [&](const char* f) -> const json& {
      if (!j.contains(f)) throw data_error(field_error(line_no, f, "is missing"));
      return j.at(f);
    };
    for (const auto& s : need("doc")) {
      if (!s.is_string()) throw data_error(field_error(line_no, "doc", "must be an array of strings"));
      ex.doc.push_back(s.get<std::string>());
    }
    for (const auto& s : need("ctx")) {
      if (!s.is_string()) throw data_error(field_error(line_no, "ctx", "must be an array of strings"));
      ex.ctx.push_back(s.get<std::string>());
    }
    if (!need("resp").is_string()) throw data_error(field_error(line_no, "resp", "must be a string"));
    ex.resp = j.at("resp").get<std::string>();
    if (!need("label").is_number_integer())
      throw data_error(field_error(line_no, "label", "must be 0 or 1"));
    ex.label = j.at("label").get<int>();
    if (ex.label != 0 && ex.label != 1)
      throw data_error(field_error(line_no, "label", "must be 0 or 1"));
    ex.gid = need("gid").is_string() ? j.at("gid").get<std::string>() : j.at("gid").dump();
    if (ex.doc.empty()) throw data_error(field_error(line_no, "doc", "must be non-empty"));
    if (ex.ctx.empty()) throw data_error(field_error(line_no, "ctx", "must be non-empty"));
    if (ex.resp.empty()) throw data_error(field_error(line_no, "resp", "must be non-empty"));
    corpus.push_back(std::move(ex));
  }
  return corpus;
}

void save_corpus(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw data_error("cannot write corpus file " + path);
  for (const auto& ex : corpus) {
    json j;
    j["doc"] = ex.doc;
    j["ctx"] = ex.ctx;
    j["resp"] = ex.resp;
    j["label"] = ex.label;
    j["gid"] = ex.gid;
    out << j.dump() << "\n";
  }
}

Vocabulary build_vocab(const Corpus& corpus, int min_count) {
  if (corpus.empty()) throw data_error("build_vocab: empty corpus");
  std::map<std::string, long long> counts;
  auto count_text = [&](const std::string& s) {
    for (const auto& t : tokenize(s)) ++counts[t];
  };
  for (const auto& ex : corpus) {
    for (const auto& s : ex.doc) count_text(s);
    for (const auto& s : ex.ctx) count_text(s);
    count_text(ex.resp);
  }
  std::vector<std::pair<std::string, long long>> kept;
  for (const auto& [tok, c] : counts)
    if (c >= min_count) kept.emplace_back(tok, c);
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  Vocabulary v;
  for (const auto& [tok, c] : kept) v.add(tok);
  return v;
}

Corpus sample_negatives(const Corpus& corpus, int k, std::uint64_t seed) {
  std::set<std::string> pool_set;
  for (const auto& ex : corpus) pool_set.insert(ex.resp);
  if (static_cast<int>(pool_set.size()) < k + 1)
    throw data_error("sample_negatives: response pool has " + std::to_string(pool_set.size()) +
                     " distinct responses, need at least " + std::to_string(k + 1));
  const std::vector<std::string> pool(pool_set.begin(), pool_set.end());
  std::mt19937_64 rng(seed);
  Corpus out;
  for (const auto& ex : corpus) {
    out.push_back(ex);
    if (ex.label != 1) continue;
    // sample k distinct responses uniformly, excluding the group's positive
    std::set<std::size_t> chosen;
    std::uniform_int_distribution<std::size_t> dist(0, pool.size() - 1);
    while (static_cast<int>(chosen.size()) < k) {
      const std::size_t i = dist(rng);
      if (pool[i] == ex.resp) continue;
      chosen.insert(i);
    }
    for (std::size_t i : chosen) {
      Example neg = ex;
      neg.resp = pool[i];
      neg.label = 0;
      out.push_back(std::move(neg));
    }
  }
  return out;
}

std::vector<std::string> truncate_context(const std::vector<std::string>& utterances, int n_max) {
  if (static_cast<int>(utterances.size()) <= n_max) return utterances;
  return {utterances.end() - n_max, utterances.end()};
}

std::vector<std::string> truncate_document(const std::vector<std::string>& sentences, int m_max) {
  if (static_cast<int>(sentences.size()) <= m_max) return sentences;
  return {sentences.begin(), sentences.begin() + m_max};
}

EncodedExample encode_example(const Example& ex, const Vocabulary& vocab,
                              const PipelineConfig& cfg) {
  EncodedExample e;
  const auto ctx = truncate_context(ex.ctx, cfg.n_max);
  const auto doc = truncate_document(ex.doc, cfg.m_max);
  e.n_real = static_cast<int>(ctx.size());
  e.m_real = static_cast<int>(doc.size());
  e.label = ex.label;
  e.gid = ex.gid;
  for (int i = 0; i < cfg.n_max; ++i) {
    if (i < e.n_real)
      e.ctx_ids.push_back(encode_sequence(tokenize(ctx[i]), vocab, cfg.l_u));
    else
      e.ctx_ids.push_back(std::vector<int>(cfg.l_u, kPadId));
  }
  for (int j = 0; j < cfg.m_max; ++j) {
    if (j < e.m_real) {
      const auto toks = tokenize(doc[j]);
      e.doc_token_count += static_cast<int>(toks.size());
      e.doc_ids.push_back(encode_sequence(toks, vocab, cfg.l_d));
    } else {
      e.doc_ids.push_back(std::vector<int>(cfg.l_d, kPadId));
    }
  }
  e.resp_ids = encode_sequence(tokenize(ex.resp), vocab, cfg.l_r);
  return e;
}

std::vector<Batch> make_batches(const Corpus& corpus, const Vocabulary& vocab,
                                const PipelineConfig& cfg, int batch_size,
                                std::uint64_t shuffle_seed, bool shuffle) {
  std::vector<std::size_t> order(corpus.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  if (shuffle) {
    std::mt19937_64 rng(shuffle_seed);
    std::shuffle(order.begin(), order.end(), rng);
  }
  std::vector<Batch> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    Batch b;
    const std::size_t end = std::min(order.size(), start + batch_size);
    for (std::size_t i = start; i < end; ++i)
      b.examples.push_back(encode_example(corpus[order[i]], vocab, cfg));
    batches.push_back(std::move(b));
  }
  return batches;
}

}  // namespace dgmn
