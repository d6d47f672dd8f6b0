#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "dgmn/vocab.hpp"

namespace dgmn {

struct data_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One (document, context, response, label) tuple. Context utterances are
// ordered oldest first, most recent last.
struct Example {
  std::vector<std::string> doc;
  std::vector<std::string> ctx;
  std::string resp;
  int label = 0;
  std::string gid;
};

using Corpus = std::vector<Example>;

// UTF-8 JSON-lines, one object per line:
// {"doc": [...], "ctx": [...], "resp": "...", "label": 0|1, "gid": "..."}
Corpus load_corpus(const std::string& path);
void save_corpus(const Corpus& corpus, const std::string& path);

// tokens with count >= min_count, ids ordered by count desc then lexicographic
Vocabulary build_vocab(const Corpus& corpus, int min_count = 1);

// adds k label-0 examples per positive, responses drawn uniformly without
// replacement from the distinct response pool of the corpus (the group's own
// positive excluded); deterministic under seed
Corpus sample_negatives(const Corpus& corpus, int k, std::uint64_t seed);

// keep the last n_max utterances
std::vector<std::string> truncate_context(const std::vector<std::string>& utterances, int n_max);

// keep the first m_max sentences (documents lead with salient facts)
std::vector<std::string> truncate_document(const std::vector<std::string>& sentences, int m_max);

struct PipelineConfig {
  int m_max = 5;
  int n_max = 7;
  int l_u = 20;
  int l_d = 20;
  int l_r = 20;
  int negatives_per_positive = 19;

  static PipelineConfig persona() { return PipelineConfig{5, 7, 20, 20, 20, 19}; }
  static PipelineConfig cmudog() { return PipelineConfig{20, 2, 40, 40, 40, 19}; }
};

// One id-encoded example with fixed shapes [n_max, l_u], [m_max, l_d], [l_r].
// n_real/m_real count the non-padded utterances/sentences.
struct EncodedExample {
  std::vector<std::vector<int>> ctx_ids;  // n_max rows of l_u
  std::vector<std::vector<int>> doc_ids;  // m_max rows of l_d
  std::vector<int> resp_ids;              // l_r
  int n_real = 0;
  int m_real = 0;
  int label = 0;
  std::string gid;
  int doc_token_count = 0;  // document length in tokens, for the bucket report
};

EncodedExample encode_example(const Example& ex, const Vocabulary& vocab,
                              const PipelineConfig& cfg);

struct Batch {
  std::vector<EncodedExample> examples;
};

// fixed-shape batches; trailing partial batch kept; deterministic under seed
std::vector<Batch> make_batches(const Corpus& corpus, const Vocabulary& vocab,
                                const PipelineConfig& cfg, int batch_size,
                                std::uint64_t shuffle_seed, bool shuffle = true);

}  // namespace dgmn
