#pragma once

// Training loop with early stopping on validation r@1, and the grouped
// r@k evaluation with per-group fusion caching.

#include <functional>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

#include "dgmn/adam.hpp"
#include "dgmn/metrics.hpp"
#include "dgmn/model.hpp"

namespace dgmn {

struct TrainConfig {
  double learning_rate = 1e-4;
  int batch_size = 32;
  int max_epochs = 10;
  int patience = 3;  // epochs without validation r@1 improvement
  std::uint64_t seed = 0;
  bool mean_reduction = true;
};

struct EpochLog {
  int epoch = 0;
  double mean_loss = 0;
  Metrics val;
};

struct TrainResult {
  std::vector<EpochLog> log;
  int best_epoch = 0;
  double best_val_r1 = 0;
};

struct EvalResult {
  Metrics metrics;
  std::vector<RankResult> results;
};

// groups in first-occurrence order; each group keeps corpus order internally
inline std::vector<std::vector<std::size_t>> group_indices(const Corpus& corpus) {
  std::map<std::string, std::size_t> seen;
  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    auto it = seen.find(corpus[i].gid);
    if (it == seen.end()) {
      seen.emplace(corpus[i].gid, groups.size());
      groups.push_back({i});
    } else {
      groups[it->second].push_back(i);
    }
  }
  return groups;
}

// Scores all candidates of every group; fusion is computed once per group
// when cache_fusion is on (outputs are identical either way).
template <class T>
EvalResult evaluate(const DgmnModel<T>& model, const Corpus& corpus, const Vocabulary& vocab,
                    bool cache_fusion = true) {
  NoGradGuard ng;
  EvalResult out;
  for (const auto& group : group_indices(corpus)) {
    std::vector<double> scores;
    std::vector<int> labels;
    int doc_tokens = 0;
    GroundingCache<T> cache;
    bool have_cache = false;
    for (std::size_t idx : group) {
      const EncodedExample ex = encode_example(corpus[idx], vocab, model.cfg.pipeline);
      doc_tokens = ex.doc_token_count;
      if (cache_fusion) {
        if (!have_cache) {
          cache = model.ground(ex);
          have_cache = true;
        }
        scores.push_back(static_cast<double>(model.score_with_cache(cache, ex.resp_ids).item()));
      } else {
        scores.push_back(static_cast<double>(model.forward(ex).item()));
      }
      labels.push_back(ex.label);
    }
    out.results.push_back(rank_group(corpus[group[0]].gid, scores, labels, doc_tokens));
  }
  out.metrics = aggregate_metrics(out.results);
  return out;
}

inline std::string format_epoch_log(const EpochLog& e) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(6);
  os << "epoch=" << e.epoch << " loss=" << e.mean_loss << std::setprecision(4)
     << " val_r1=" << e.val.r_at_1 << " val_r2=" << e.val.r_at_2 << " val_r5=" << e.val.r_at_5;
  return os.str();
}

// Full pass per epoch over shuffled batches, validation r@1 after each,
// best parameters retained and restored on exit. on_epoch (optional) may
// return false to stop early. If the validation corpus has no negatives,
// they are sampled once, seeded, so the early-stop signal is stable.
template <class T>
TrainResult train(DgmnModel<T>& model, const Corpus& corpus_train, const Corpus& corpus_val,
                  const Vocabulary& vocab, const TrainConfig& tc, std::ostream* log = nullptr,
                  const std::function<bool(const EpochLog&)>& on_epoch = nullptr) {
  AdamConfig<T> ac;
  ac.learning_rate = static_cast<T>(tc.learning_rate);
  auto params = model.named_params();
  Adam<T> opt(params, ac);

  Corpus val = corpus_val;
  if (std::none_of(val.begin(), val.end(), [](const Example& e) { return e.label == 0; }))
    val = sample_negatives(val, model.cfg.pipeline.negatives_per_positive, tc.seed);

  TrainResult result;
  std::vector<std::vector<T>> best;
  double best_r1 = -1;
  int best_epoch = 0, since_best = 0;
  auto snapshot = [&]() {
    best.clear();
    for (auto& [name, p] : params) best.push_back(p.data());
  };
  auto restore = [&]() {
    for (std::size_t i = 0; i < params.size(); ++i) params[i].second.data() = best[i];
  };

  for (int epoch = 1; epoch <= tc.max_epochs; ++epoch) {
    auto batches = make_batches(corpus_train, vocab, model.cfg.pipeline, tc.batch_size,
                                tc.seed + static_cast<std::uint64_t>(epoch));
    double loss_sum = 0;
    std::size_t n_examples = 0;
    for (const auto& batch : batches) {
      std::vector<Tensor<T>> scores;
      std::vector<int> labels;
      for (const auto& ex : batch.examples) {
        scores.push_back(model.forward(ex));
        labels.push_back(ex.label);
      }
      Tensor<T> loss = bce_loss(scores, labels, tc.mean_reduction);
      opt.zero_grad();
      loss.backward();
      opt.step();
      model.emb.zero_pad_row();
      const double l = static_cast<double>(loss.item());
      loss_sum += tc.mean_reduction ? l * static_cast<double>(batch.examples.size()) : l;
      n_examples += batch.examples.size();
    }
    EpochLog e;
    e.epoch = epoch;
    e.mean_loss = loss_sum / static_cast<double>(n_examples);
    e.val = evaluate(model, val, vocab).metrics;
    result.log.push_back(e);
    if (log) *log << format_epoch_log(e) << "\n";

    if (e.val.r_at_1 > best_r1) {
      best_r1 = e.val.r_at_1;
      best_epoch = epoch;
      since_best = 0;
      snapshot();
    } else {
      ++since_best;
    }
    if (on_epoch && !on_epoch(e)) break;
    if (since_best >= tc.patience) break;
  }
  if (!best.empty()) restore();
  result.best_epoch = best_epoch;
  result.best_val_r1 = best_r1 < 0 ? 0 : best_r1;
  return result;
}

}  // namespace dgmn
