// End-to-end acceptance checks. Each check prints exactly one pass/fail line;
// the process exits nonzero if any check fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>

#include "dgmn/checkpoint.hpp"
#include "dgmn/config.hpp"
#include "dgmn/train.hpp"
#include "oracles.hpp"

namespace {

int failures = 0;

void report(int id, const std::string& what, bool ok, const std::string& detail = "") {
  std::cout << (ok ? "PASS" : "FAIL") << " " << id << ": " << what;
  if (!detail.empty()) std::cout << " (" << detail << ")";
  std::cout << std::endl;
  if (!ok) ++failures;
}

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string tmp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

// --------------------------------------------------------------------------
// 1. full-model gradient fidelity against central finite differences

dgmn::Corpus toy_corpus() {
  dgmn::Corpus c;
  const std::vector<std::string> resps{"red apple", "green tea", "blue sky", "old oak"};
  for (std::size_t i = 0; i < resps.size(); ++i) {
    dgmn::Example ex;
    ex.doc = {"about " + resps[i], "extra facts"};
    ex.ctx = {"what now", "tell me"};
    ex.resp = resps[i];
    ex.label = 1;
    ex.gid = "g" + std::to_string(i);
    c.push_back(ex);
  }
  return c;
}

dgmn::ModelConfig toy_model_config() {
  dgmn::ModelConfig mc;
  mc.d_emb = 8;
  mc.d_att = 8;
  mc.d_m = 8;
  mc.cnn_filters = 2;
  mc.pipeline = dgmn::PipelineConfig{2, 2, 4, 4, 4, 1};
  return mc;
}

void check_gradient_fidelity() {
  const auto t0 = std::chrono::steady_clock::now();
  auto corpus = dgmn::sample_negatives(toy_corpus(), 1, 7);
  auto vocab = dgmn::build_vocab(corpus);
  dgmn::DgmnModel<double> model(toy_model_config(), vocab, 11);

  std::vector<dgmn::EncodedExample> batch;
  std::vector<int> labels;
  for (int i = 0; i < 2; ++i) {
    batch.push_back(dgmn::encode_example(corpus[i], vocab, model.cfg.pipeline));
    labels.push_back(corpus[i].label);
  }
  auto loss_of = [&]() {
    std::vector<dgmn::Tensor<double>> scores;
    for (const auto& ex : batch) scores.push_back(model.forward(ex));
    return dgmn::bce_loss(scores, labels);
  };

  auto params = model.named_params();
  auto loss = loss_of();
  loss.backward();
  std::vector<std::vector<double>> analytic;
  for (auto& [name, p] : params) analytic.push_back(p.grad());

  double worst = 0;
  std::string worst_name;
  std::size_t checked = 0;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto& p = params[pi].second;
    for (std::size_t i = 0; i < p.size(); ++i) {
      dgmn::NoGradGuard ng;
      const double fd =
          oracle::central_diff([&]() { return loss_of().item(); }, &p.data()[i]);
      const double err = oracle::grad_rel_err(analytic[pi][i], fd);
      if (err > worst) {
        worst = err;
        worst_name = params[pi].first;
      }
      ++checked;
    }
  }
  const double secs = seconds_since(t0);
  std::ostringstream detail;
  detail << checked << " parameters, max rel err " << worst << " at " << worst_name << ", "
         << std::fixed << std::setprecision(1) << secs << "s";
  report(1, "analytic loss gradients match finite differences within 1e-4",
         worst < 1e-4 && secs < 60.0, detail.str());
}

// --------------------------------------------------------------------------
// 2. oracle equivalence on randomized inputs

void check_oracle_equivalence() {
  std::mt19937_64 rng(42);
  using D = dgmn::Tensor<double>;
  double worst = 0;
  std::string worst_part;
  auto track = [&](const char* part, double err) {
    if (err > worst) {
      worst = err;
      worst_part = part;
    }
  };

  for (int it = 0; it < 100; ++it) {
    // level1 / level2 interaction
    {
      const int L = 2 + it % 5, d = 3 + it % 4, d_att = 2 + it % 3;
      auto p = dgmn::init_additive_attention<double>(d, d_att, rng);
      auto view = oracle::random_vec<double>(L * d, rng);
      auto r = oracle::random_vec<double>(d, rng);
      dgmn::Mask mask(L, 1);
      if (L > 1 && it % 3 == 0) mask[it % L] = 0;
      bool all_masked = true;
      for (auto m : mask) all_masked = all_masked && !m;
      if (all_masked) mask[0] = 1;
      auto [h, alpha] = dgmn::level1_summarize(D::from({L, d}, view), D::from({d}, r), p, &mask);
      auto [oh, oalpha] = oracle::level1(
          {view.begin(), view.end()}, {r.begin(), r.end()},
          {p.w.data().begin(), p.w.data().end()}, {p.v.data().begin(), p.v.data().end()},
          {p.b.data().begin(), p.b.data().end()}, L, d, d_att, &mask);
      track("level1", oracle::max_rel_err(h.data(), oh));
      track("level1-weights", oracle::max_rel_err(alpha.data(), oalpha));

      std::vector<D> hs;
      std::vector<double> flat;
      const int K = 2 + it % 3;
      for (int k = 0; k < K; ++k) {
        auto hv = oracle::random_vec<double>(d, rng);
        flat.insert(flat.end(), hv.begin(), hv.end());
        hs.push_back(D::from({d}, hv));
      }
      auto [h2, alpha2] = dgmn::level2_summarize(hs, D::from({d}, r), p);
      auto [oh2, oalpha2] = oracle::level1(
          {flat.begin(), flat.end()}, {r.begin(), r.end()},
          {p.w.data().begin(), p.w.data().end()}, {p.v.data().begin(), p.v.data().end()},
          {p.b.data().begin(), p.b.data().end()}, K, d, d_att, nullptr);
      track("level2", oracle::max_rel_err(h2.data(), oh2));
      track("level2-weights", oracle::max_rel_err(alpha2.data(), oalpha2));
    }
    // match_feature
    {
      const int d = 2 + it % 5, d_m = 2 + it % 4;
      auto h = oracle::random_vec<double>(d, rng);
      auto r = oracle::random_vec<double>(d, rng);
      auto w = oracle::random_vec<double>(d_m * 2 * d, rng);
      auto b = oracle::random_vec<double>(d_m, rng);
      auto out = dgmn::match_feature(D::from({d}, h), D::from({d}, r), D::from({d_m, 2 * d}, w),
                                     D::from({d_m}, b));
      track("match_feature",
            oracle::max_rel_err(out.data(),
                                oracle::match_feature({h.begin(), h.end()}, {r.begin(), r.end()},
                                                      {w.begin(), w.end()}, {b.begin(), b.end()},
                                                      d, d_m)));
    }
    // scaled dot-product attention
    {
      const int nq = 1 + it % 4, nk = 2 + it % 5, d = 2 + it % 4;
      auto q = oracle::random_vec<double>(nq * d, rng);
      auto k = oracle::random_vec<double>(nk * d, rng);
      auto v = oracle::random_vec<double>(nk * d, rng);
      dgmn::Mask mask(nk, 1);
      if (it % 2) mask[it % nk] = 0;
      auto [out, w] = dgmn::scaled_dot_attention(D::from({nq, d}, q), D::from({nk, d}, k),
                                                 D::from({nk, d}, v), &mask);
      auto [oout, ow] = oracle::attention({q.begin(), q.end()}, {k.begin(), k.end()},
                                          {v.begin(), v.end()}, nq, nk, d, &mask);
      track("attention", oracle::max_rel_err(out.data(), oout));
      track("attention-weights", oracle::max_rel_err(w.data(), ow));
    }
    // conv3d and maxpool3d
    {
      const int c_in = 1 + it % 2, c_out = 1 + it % 3;
      const int Dd = 2 + it % 4, H = 2 + it % 3, W = 2 + it % 5;
      auto x = oracle::random_vec<double>(c_in * Dd * H * W, rng);
      auto kern = oracle::random_vec<double>(c_out * c_in * 27, rng);
      auto bias = oracle::random_vec<double>(c_out, rng);
      auto y = dgmn::conv3d(D::from({c_in, Dd, H, W}, x), D::from({c_out, c_in, 3, 3, 3}, kern),
                            D::from({c_out}, bias));
      track("conv3d",
            oracle::max_rel_err(y.data(), oracle::conv3d({x.begin(), x.end()},
                                                         {kern.begin(), kern.end()},
                                                         {bias.begin(), bias.end()}, c_in, Dd, H,
                                                         W, c_out, 3)));

      const int PD = 3 + it % 5, PH = 3 + it % 4, PW = 3 + it % 6;
      auto px = oracle::random_vec<double>(c_in * PD * PH * PW, rng);
      auto pooled = dgmn::maxpool3d(D::from({c_in, PD, PH, PW}, px));
      track("maxpool3d", oracle::max_rel_err(pooled.data(),
                                             oracle::maxpool3d({px.begin(), px.end()}, c_in, PD,
                                                               PH, PW, 3, 3)));
    }
  }
  std::ostringstream detail;
  detail << "100 cases per component, worst " << worst << " in "
         << (worst_part.empty() ? "none" : worst_part);
  report(2, "interaction, attention, conv and pooling match extended-precision oracles within 1e-10",
         worst < 1e-10, detail.str());
}

// --------------------------------------------------------------------------
// 3. overfit separation between the full model and the context-only model

struct SyntheticData {
  dgmn::Corpus corpus;  // 10 groups x 20 candidates = 200 examples
  dgmn::Vocabulary vocab;
};

SyntheticData synthetic_corpus(std::uint64_t seed) {
  const std::vector<std::string> words{"amber", "birch", "coral", "dune",  "ember",
                                       "fjord", "grove", "heath", "islet", "jetty"};
  SyntheticData data;
  std::mt19937_64 rng(seed);
  for (int g = 0; g < 10; ++g) {
    dgmn::Example pos;
    pos.doc = {words[static_cast<std::size_t>(g)]};
    pos.ctx = {words[0]};  // identical context everywhere: no signal without the document
    pos.resp = words[static_cast<std::size_t>(g)];
    pos.label = 1;
    pos.gid = "s" + std::to_string(g);
    data.corpus.push_back(pos);
    // negatives drawn with replacement from the other groups' positives
    std::uniform_int_distribution<int> pick(0, 9);
    for (int k = 0; k < 19; ++k) {
      int other = pick(rng);
      while (other == g) other = pick(rng);
      dgmn::Example neg = pos;
      neg.resp = words[static_cast<std::size_t>(other)];
      neg.label = 0;
      data.corpus.push_back(std::move(neg));
    }
  }
  data.vocab = dgmn::build_vocab(data.corpus);
  return data;
}

double train_on_synthetic(dgmn::Ablation ablation, const SyntheticData& data, double* secs) {
  dgmn::ModelConfig mc;
  mc.d_emb = 8;
  mc.d_att = 8;
  mc.d_m = 8;
  mc.cnn_filters = 2;
  mc.pipeline = dgmn::PipelineConfig{1, 1, 2, 2, 2, 19};
  mc.ablation = ablation;
  dgmn::DgmnModel<float> model(mc, data.vocab, 5);
  dgmn::TrainConfig tc;
  tc.learning_rate = 3e-3;
  tc.batch_size = 40;
  tc.max_epochs = 200;
  tc.patience = 1000;  // stop on the target, not on plateaus
  tc.seed = 5;
  const auto t0 = std::chrono::steady_clock::now();
  auto result = dgmn::train(model, data.corpus, data.corpus, data.vocab, tc, nullptr,
                            [](const dgmn::EpochLog& e) { return e.val.r_at_1 < 0.95; });
  if (secs) *secs = seconds_since(t0);
  return result.best_val_r1;
}

void check_overfit_separation() {
  auto data = synthetic_corpus(2024);
  double full_secs = 0, t_secs = 0;
  const double full_r1 = train_on_synthetic(dgmn::Ablation::Full, data, &full_secs);
  const double t_r1 = train_on_synthetic(dgmn::Ablation::T, data, &t_secs);
  std::ostringstream detail;
  detail << std::fixed << std::setprecision(2) << "full r@1 " << full_r1 << " in " << full_secs
         << "s, context-only r@1 " << t_r1 << " in " << t_secs << "s";
  report(3, "full model memorizes the document-keyed corpus while the context-only model cannot",
         full_r1 >= 0.95 && full_secs < 600.0 && t_r1 < 0.60, detail.str());
}

// --------------------------------------------------------------------------
// 4. random-scorer baseline over 20-candidate groups

void check_random_baseline() {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  std::vector<dgmn::RankResult> results;
  std::vector<int> labels(20, 0);
  labels[0] = 1;
  for (int g = 0; g < 10000; ++g) {
    std::vector<double> scores(20);
    for (auto& s : scores) s = dist(rng);
    results.push_back(dgmn::rank_group("g" + std::to_string(g), scores, labels));
  }
  const auto m = dgmn::aggregate_metrics(results);
  std::ostringstream detail;
  detail << "r@1 " << m.r_at_1 << " over 10000 groups";
  report(4, "random scores over 20 candidates give r@1 = 0.05 +/- 0.01",
         m.r_at_1 >= 0.04 && m.r_at_1 <= 0.06, detail.str());
}

// --------------------------------------------------------------------------
// 5. ablation wiring: document sensitivity

void check_ablation_wiring() {
  auto corpus = dgmn::sample_negatives(toy_corpus(), 1, 7);
  auto vocab = dgmn::build_vocab(corpus);
  // extend the vocabulary with replacement text so both docs encode in-vocab
  vocab.add("unrelated");
  vocab.add("replacement");
  vocab.add("prose");

  auto altered = corpus;
  for (auto& ex : altered)
    ex.doc = {"unrelated replacement prose", "replacement prose unrelated"};

  auto scores_under = [&](dgmn::Ablation ab, const dgmn::Corpus& c) {
    dgmn::ModelConfig mc = toy_model_config();
    mc.ablation = ab;
    dgmn::DgmnModel<float> model(mc, vocab, 11);
    dgmn::NoGradGuard ng;
    std::vector<float> out;
    for (const auto& ex : c)
      out.push_back(model.forward(dgmn::encode_example(ex, vocab, mc.pipeline)).item());
    return out;
  };

  const auto t_orig = scores_under(dgmn::Ablation::T, corpus);
  const auto t_alt = scores_under(dgmn::Ablation::T, altered);
  const bool t_invariant = t_orig == t_alt;  // bit-exact

  const auto full_orig = scores_under(dgmn::Ablation::Full, corpus);
  const auto full_alt = scores_under(dgmn::Ablation::Full, altered);
  const bool full_changes = full_orig != full_alt;

  report(5, "context-only scores ignore the document bit-exactly; full-model scores depend on it",
         t_invariant && full_changes);
}

// --------------------------------------------------------------------------
// 6. normalization of every attention/interaction weight vector

void check_normalization() {
  std::mt19937_64 rng(13);
  auto corpus = dgmn::sample_negatives(toy_corpus(), 1, 7);
  auto vocab = dgmn::build_vocab(corpus);
  dgmn::ModelConfig mc = toy_model_config();
  dgmn::DgmnModel<float> model(mc, vocab, 11);

  std::uniform_int_distribution<int> id_dist(2, vocab.size() - 1);
  std::uniform_int_distribution<int> real_dist(1, 2);
  std::uniform_int_distribution<int> len_dist(1, 4);
  auto random_row = [&](int budget) {
    std::vector<int> ids(static_cast<std::size_t>(budget), dgmn::kPadId);
    const int real = len_dist(rng);
    for (int i = 0; i < real && i < budget; ++i) ids[static_cast<std::size_t>(i)] = id_dist(rng);
    return ids;
  };

  dgmn::NoGradGuard ng;
  std::size_t rows_checked = 0;
  double worst_sum_err = 0;
  bool masked_clean = true;
  for (int pass = 0; pass < 1000; ++pass) {
    dgmn::EncodedExample ex;
    ex.n_real = real_dist(rng);
    ex.m_real = real_dist(rng);
    for (int i = 0; i < mc.pipeline.n_max; ++i)
      ex.ctx_ids.push_back(i < ex.n_real ? random_row(mc.pipeline.l_u)
                                         : std::vector<int>(mc.pipeline.l_u, dgmn::kPadId));
    for (int j = 0; j < mc.pipeline.m_max; ++j)
      ex.doc_ids.push_back(j < ex.m_real ? random_row(mc.pipeline.l_d)
                                         : std::vector<int>(mc.pipeline.l_d, dgmn::kPadId));
    ex.resp_ids = random_row(mc.pipeline.l_r);
    ex.label = 1;

    dgmn::ForwardTrace<float> trace;
    model.forward(ex, &trace);
    for (std::size_t r = 0; r < trace.weight_rows.size(); ++r) {
      double sum = 0;
      const auto& row = trace.weight_rows[r];
      const auto& mask = trace.weight_masks[r];
      for (std::size_t j = 0; j < row.size(); ++j) {
        sum += row[j];
        if (!mask.empty() && !mask[j] && row[j] != 0.0f) masked_clean = false;
      }
      worst_sum_err = std::max(worst_sum_err, std::fabs(sum - 1.0));
      ++rows_checked;
    }
  }
  std::ostringstream detail;
  detail << rows_checked << " weight vectors over 1000 forward passes, worst |sum-1| "
         << worst_sum_err;
  report(6, "all attention weight vectors sum to 1 +/- 1e-6 with masked positions exactly zero",
         worst_sum_err < 1e-6 && masked_clean, detail.str());
}

// --------------------------------------------------------------------------
// 7. reproducibility: identical seeds, identical artifacts

std::string file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void check_reproducibility() {
  auto pos = toy_corpus();
  auto corpus = dgmn::sample_negatives(pos, 1, 7);
  auto vocab = dgmn::build_vocab(corpus);
  dgmn::RunConfig cfg;
  cfg.model = toy_model_config();
  cfg.train.learning_rate = 1e-3;
  cfg.train.batch_size = 8;
  cfg.train.max_epochs = 2;
  cfg.train.seed = 9;

  auto run = [&](const std::string& tag) {
    dgmn::DgmnModel<float> model(cfg.model, vocab, 11);
    std::ostringstream log;
    dgmn::train(model, corpus, pos, vocab, cfg.train, &log);
    const std::string path = tmp_path("repro_" + tag + ".ckpt");
    dgmn::save_checkpoint(model, cfg, vocab.hash(), path);
    return std::make_pair(log.str(), path);
  };
  auto [log1, ck1] = run("a");
  auto [log2, ck2] = run("b");
  const bool logs_equal = log1 == log2;
  const bool ckpts_equal = file_bytes(ck1) == file_bytes(ck2);

  // save -> load preserves evaluation scores bit-exactly
  auto loaded = dgmn::load_checkpoint(ck1, vocab);
  dgmn::DgmnModel<float> model(cfg.model, vocab, 11);
  {
    std::ostringstream log;
    dgmn::train(model, corpus, pos, vocab, cfg.train, &log);
  }
  bool scores_equal = true;
  {
    dgmn::NoGradGuard ng;
    for (const auto& ex : corpus) {
      const auto enc = dgmn::encode_example(ex, vocab, cfg.model.pipeline);
      scores_equal = scores_equal && model.forward(enc).item() == loaded.model.forward(enc).item();
    }
  }
  std::remove(ck1.c_str());
  std::remove(ck2.c_str());
  report(7, "same-seed runs give byte-identical logs and checkpoints; round-trips score bit-exactly",
         logs_equal && ckpts_equal && scores_equal);
}

// --------------------------------------------------------------------------
// 8. metric ordering and bucket totals

void check_metric_ordering() {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  std::uniform_int_distribution<int> len_dist(1, 60);
  std::vector<dgmn::RankResult> results;
  std::vector<int> labels(20, 0);
  labels[3] = 1;
  for (int g = 0; g < 500; ++g) {
    std::vector<double> scores(20);
    for (auto& s : scores) s = dist(rng);
    if (g % 3 == 0) scores[3] = 0.99;  // mix in easy groups so r@k actually varies
    results.push_back(dgmn::rank_group("g" + std::to_string(g), scores, labels, len_dist(rng)));
  }
  const auto m = dgmn::aggregate_metrics(results);
  const bool ordered = m.r_at_1 <= m.r_at_2 && m.r_at_2 <= m.r_at_5;

  const auto buckets = dgmn::bucket_report(results, {0, 25, 30, 35, 52});
  int covered = 0;
  for (const auto& b : buckets) covered += b.count;
  int in_range = 0;
  for (const auto& r : results)
    if (r.doc_token_count > 0 && r.doc_token_count <= 52) ++in_range;
  std::ostringstream detail;
  detail << "r@1 " << m.r_at_1 << " <= r@2 " << m.r_at_2 << " <= r@5 " << m.r_at_5 << ", buckets "
         << covered << "/" << in_range;
  report(8, "recall metrics are ordered and bucket counts sum to the covered group total",
         ordered && covered == in_range, detail.str());
}

}  // namespace

int main() {
  std::cout << std::setprecision(12);
  check_gradient_fidelity();
  check_oracle_equivalence();
  check_overfit_separation();
  check_random_baseline();
  check_ablation_wiring();
  check_normalization();
  check_reproducibility();
  check_metric_ordering();
  return failures > 0 ? 1 : 0;
}
