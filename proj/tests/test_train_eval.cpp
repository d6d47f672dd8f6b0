#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dgmn/adam.hpp"
#include "dgmn/checkpoint.hpp"
#include "dgmn/config.hpp"
#include "dgmn/metrics.hpp"
#include "dgmn/train.hpp"

namespace {

std::string tmp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

dgmn::Corpus tiny_corpus() {
  const std::vector<std::string> resps{"red apple pie", "green tea cup", "blue sky day",
                                       "old oak tree"};
  dgmn::Corpus c;
  for (std::size_t i = 0; i < resps.size(); ++i) {
    dgmn::Example ex;
    ex.doc = {"facts about " + resps[i], "more detail here"};
    ex.ctx = {"what do you like", "tell me more"};
    ex.resp = resps[i];
    ex.label = 1;
    ex.gid = "g" + std::to_string(i);
    c.push_back(ex);
  }
  return c;
}

dgmn::ModelConfig tiny_model_config() {
  dgmn::ModelConfig mc;
  mc.d_emb = 6;
  mc.cnn_filters = 2;
  mc.pipeline = dgmn::PipelineConfig{2, 2, 4, 4, 4, 3};
  return mc;
}

}  // namespace

TEST_CASE("rank_group gives ties the pessimistic rank") {
  auto r = dgmn::rank_group("g", {0.1, 0.9, 0.5}, {0, 1, 0});
  CHECK(r.rank == 1);
  CHECK(r.positive_index == 1);
  CHECK(r.hit(1));

  auto tie = dgmn::rank_group("g", {0.5, 0.5, 0.2}, {1, 0, 0});
  CHECK(tie.rank == 2);
  CHECK_FALSE(tie.hit(1));
  CHECK(tie.hit(2));

  CHECK_THROWS_AS(dgmn::rank_group("g", {0.5, 0.5}, {1, 1}), dgmn::metric_error);
  CHECK_THROWS_AS(dgmn::rank_group("g", {0.5, 0.5}, {0, 0}), dgmn::metric_error);
  CHECK_THROWS_AS(dgmn::rank_group("g", {0.5}, {1, 0}), dgmn::metric_error);
}

TEST_CASE("aggregate_metrics averages hits and keeps the ordering invariant") {
  std::vector<dgmn::RankResult> rs;
  rs.push_back(dgmn::rank_group("a", {0.9, 0.1, 0.2, 0.3, 0.4, 0.5}, {1, 0, 0, 0, 0, 0}));
  rs.push_back(dgmn::rank_group("b", {0.3, 0.9, 0.8, 0.1, 0.2, 0.0}, {1, 0, 0, 0, 0, 0}));
  rs.push_back(dgmn::rank_group("c", {0.0, 0.9, 0.8, 0.7, 0.6, 0.5}, {1, 0, 0, 0, 0, 0}));
  auto m = dgmn::aggregate_metrics(rs);
  CHECK(m.groups == 3);
  CHECK(m.r_at_1 == doctest::Approx(1.0 / 3));
  CHECK(m.r_at_2 == doctest::Approx(1.0 / 3));
  CHECK(m.r_at_5 == doctest::Approx(2.0 / 3));
  CHECK(m.r_at_1 <= m.r_at_2);
  CHECK(m.r_at_2 <= m.r_at_5);
}

TEST_CASE("bucket_report partitions by document length") {
  std::vector<dgmn::RankResult> rs;
  const std::vector<int> doc_lens{10, 26, 30, 33, 50, 24};
  for (std::size_t i = 0; i < doc_lens.size(); ++i)
    rs.push_back(dgmn::rank_group("g" + std::to_string(i), {0.9, 0.1}, {1, 0}, doc_lens[i]));
  auto buckets = dgmn::bucket_report(rs, {0, 25, 30, 35, 52});
  REQUIRE(buckets.size() == 4);
  CHECK(buckets[0].count == 2);  // 10, 24
  CHECK(buckets[1].count == 2);  // 26, 30 — upper edge inclusive
  CHECK(buckets[2].count == 1);  // 33
  CHECK(buckets[3].count == 1);  // 50
  int total = 0;
  for (const auto& b : buckets) total += b.count;
  CHECK(total == static_cast<int>(rs.size()));
  for (const auto& b : buckets)
    if (b.count > 0) CHECK(b.r_at_1 == doctest::Approx(1.0));

  CHECK_THROWS_AS(dgmn::bucket_report(rs, {0}), dgmn::metric_error);
  CHECK_THROWS_AS(dgmn::bucket_report(rs, {0, 25, 25}), dgmn::metric_error);

  const auto table = dgmn::format_bucket_table(buckets);
  CHECK(table.find("count") != std::string::npos);
}

TEST_CASE("adam first step moves each coordinate by about the learning rate") {
  auto w = dgmn::Tensor<double>::from({3}, {1.0, -2.0, 0.5}, true);
  dgmn::AdamConfig<double> ac;
  ac.learning_rate = 0.01;
  dgmn::Adam<double> opt({{"w", w}}, ac);
  opt.zero_grad();
  auto loss = dgmn::sum(dgmn::mul(w, w));
  loss.backward();
  opt.step();
  // with bias correction, |Δ| = lr * g / (|g| + ~0) ≈ lr * sign(g)
  CHECK(w.data()[0] == doctest::Approx(1.0 - 0.01).epsilon(1e-6));
  CHECK(w.data()[1] == doctest::Approx(-2.0 + 0.01).epsilon(1e-6));
  CHECK(w.data()[2] == doctest::Approx(0.5 - 0.01).epsilon(1e-6));
}

TEST_CASE("adam minimizes a quadratic") {
  auto w = dgmn::Tensor<double>::from({2}, {5.0, -4.0}, true);
  auto target = dgmn::Tensor<double>::from({2}, {3.0, 1.0});
  dgmn::AdamConfig<double> ac;
  ac.learning_rate = 0.1;
  dgmn::Adam<double> opt({{"w", w}}, ac);
  for (int i = 0; i < 500; ++i) {
    opt.zero_grad();
    auto d = dgmn::sub(w, target);
    dgmn::sum(dgmn::mul(d, d)).backward();
    opt.step();
  }
  CHECK(w.data()[0] == doctest::Approx(3.0).epsilon(1e-2));
  CHECK(w.data()[1] == doctest::Approx(1.0).epsilon(1e-2));
  CHECK(opt.steps() == 500);
}

TEST_CASE("adam rejects NaN gradients by parameter name") {
  auto w = dgmn::Tensor<double>::from({1}, {1.0}, true);
  dgmn::AdamConfig<double> ac;
  dgmn::Adam<double> opt({{"some.param", w}}, ac);
  w.grad()[0] = std::nan("");
  bool threw = false;
  try {
    opt.step();
  } catch (const dgmn::autodiff_error& e) {
    threw = true;
    CHECK(std::string(e.what()).find("some.param") != std::string::npos);
  }
  CHECK(threw);
}

TEST_CASE("group_indices keeps first-occurrence order") {
  dgmn::Corpus c;
  for (const char* g : {"b", "a", "b", "c", "a"}) {
    dgmn::Example ex;
    ex.doc = {"d"};
    ex.ctx = {"c"};
    ex.resp = "r";
    ex.gid = g;
    c.push_back(ex);
  }
  auto groups = dgmn::group_indices(c);
  REQUIRE(groups.size() == 3);
  CHECK(groups[0] == std::vector<std::size_t>{0, 2});  // b
  CHECK(groups[1] == std::vector<std::size_t>{1, 4});  // a
  CHECK(groups[2] == std::vector<std::size_t>{3});     // c
}

TEST_CASE("evaluate is identical with and without fusion caching") {
  auto pos = tiny_corpus();
  auto corpus = dgmn::sample_negatives(pos, 3, 5);
  auto vocab = dgmn::build_vocab(corpus);
  dgmn::DgmnModel<float> model(tiny_model_config(), vocab, 17);
  auto cached = dgmn::evaluate(model, corpus, vocab, true);
  auto direct = dgmn::evaluate(model, corpus, vocab, false);
  REQUIRE(cached.results.size() == direct.results.size());
  for (std::size_t i = 0; i < cached.results.size(); ++i) {
    CHECK(cached.results[i].scores == direct.results[i].scores);  // bit-exact
    CHECK(cached.results[i].rank == direct.results[i].rank);
  }
  CHECK(cached.metrics.r_at_1 <= cached.metrics.r_at_2);
  CHECK(cached.metrics.r_at_2 <= cached.metrics.r_at_5);
}

TEST_CASE("train runs, logs epochs, and honors the stop callback") {
  auto pos = tiny_corpus();
  auto corpus = dgmn::sample_negatives(pos, 3, 5);
  auto vocab = dgmn::build_vocab(corpus);
  dgmn::DgmnModel<float> model(tiny_model_config(), vocab, 17);
  dgmn::TrainConfig tc;
  tc.learning_rate = 1e-3;
  tc.batch_size = 8;
  tc.max_epochs = 3;
  tc.patience = 100;
  tc.seed = 3;
  std::ostringstream log;
  auto result = dgmn::train(model, corpus, pos, vocab, tc, &log);
  CHECK(result.log.size() == 3);
  CHECK(result.best_epoch >= 1);
  std::string line;
  std::istringstream rd(log.str());
  int lines = 0;
  while (std::getline(rd, line)) {
    ++lines;
    CHECK(line.rfind("epoch=", 0) == 0);
    CHECK(line.find(" loss=") != std::string::npos);
    CHECK(line.find(" val_r1=") != std::string::npos);
  }
  CHECK(lines == 3);

  // stop callback ends training after the first epoch
  dgmn::DgmnModel<float> m2(tiny_model_config(), vocab, 17);
  auto r2 = dgmn::train(m2, corpus, pos, vocab, tc, nullptr,
                        [](const dgmn::EpochLog&) { return false; });
  CHECK(r2.log.size() == 1);
}

TEST_CASE("same-seed training runs are identical") {
  auto pos = tiny_corpus();
  auto corpus = dgmn::sample_negatives(pos, 3, 5);
  auto vocab = dgmn::build_vocab(corpus);
  dgmn::TrainConfig tc;
  tc.learning_rate = 1e-3;
  tc.batch_size = 8;
  tc.max_epochs = 2;
  tc.seed = 11;

  std::ostringstream log1, log2;
  dgmn::DgmnModel<float> m1(tiny_model_config(), vocab, 17);
  dgmn::DgmnModel<float> m2(tiny_model_config(), vocab, 17);
  dgmn::train(m1, corpus, pos, vocab, tc, &log1);
  dgmn::train(m2, corpus, pos, vocab, tc, &log2);
  CHECK(log1.str() == log2.str());
  auto p1 = m1.named_params();
  auto p2 = m2.named_params();
  REQUIRE(p1.size() == p2.size());
  for (std::size_t i = 0; i < p1.size(); ++i) CHECK(p1[i].second.data() == p2[i].second.data());
}

TEST_CASE("run config serializes and parses losslessly") {
  dgmn::RunConfig cfg;
  cfg.model.d_emb = 12;
  cfg.model.cnn_filters = 4;
  cfg.model.ablation = dgmn::Ablation::TPlusTTilde;
  cfg.model.tie_matching_params = true;
  cfg.model.pipeline.l_r = 9;
  cfg.train.learning_rate = 0.0025;
  cfg.train.seed = 123456789;
  const auto text = dgmn::serialize_run_config(cfg);
  auto parsed = dgmn::parse_run_config(text);
  CHECK(dgmn::serialize_run_config(parsed) == text);
  CHECK(parsed.model.ablation == dgmn::Ablation::TPlusTTilde);
  CHECK(parsed.model.pipeline.l_r == 9);
  CHECK(parsed.train.seed == 123456789);

  auto commented = dgmn::parse_run_config("# comment\n[model]\nd_emb = 7\n; also comment\n");
  CHECK(commented.model.d_emb == 7);

  CHECK_THROWS_AS(dgmn::parse_run_config("[model]\nnonsense=1\n"), dgmn::config_error);
  CHECK_THROWS_AS(dgmn::parse_run_config("[model]\nno equals sign\n"), dgmn::config_error);
  CHECK_THROWS_AS(dgmn::parse_run_config("[model]\ncnn_filters=soup\n"), dgmn::config_error);

  dgmn::RunConfig preset;
  dgmn::apply_override(preset, "pipeline.preset", "cmudog");
  CHECK(preset.model.pipeline.l_d == 40);
  CHECK_THROWS_AS(dgmn::apply_override(preset, "pipeline.preset", "other"), dgmn::config_error);
  CHECK_THROWS_AS(dgmn::apply_override(preset, "train.bogus", "1"), dgmn::config_error);
}

TEST_CASE("checkpoint round trip preserves scores bit-exactly") {
  auto pos = tiny_corpus();
  auto corpus = dgmn::sample_negatives(pos, 3, 5);
  auto vocab = dgmn::build_vocab(corpus);
  dgmn::RunConfig cfg;
  cfg.model = tiny_model_config();
  dgmn::DgmnModel<float> model(cfg.model, vocab, 21);

  const auto path = tmp_path("ckpt_rt.bin");
  dgmn::save_checkpoint(model, cfg, vocab.hash(), path);
  auto loaded = dgmn::load_checkpoint(path, vocab);
  CHECK(loaded.cfg.model.d_emb == cfg.model.d_emb);

  dgmn::NoGradGuard ng;
  for (const auto& ex : corpus) {
    const auto enc = dgmn::encode_example(ex, vocab, cfg.model.pipeline);
    CHECK(model.forward(enc).item() == loaded.model.forward(enc).item());
  }

  std::uint64_t h = 0;
  auto peeked = dgmn::peek_checkpoint_config(path, &h);
  CHECK(h == vocab.hash());
  CHECK(peeked.model.cnn_filters == cfg.model.cnn_filters);
  std::remove(path.c_str());
}

TEST_CASE("checkpoint loading validates vocabulary, checksum, and configuration") {
  auto pos = tiny_corpus();
  auto vocab = dgmn::build_vocab(pos);
  dgmn::RunConfig cfg;
  cfg.model = tiny_model_config();
  dgmn::DgmnModel<float> model(cfg.model, vocab, 21);
  const auto path = tmp_path("ckpt_val.bin");
  dgmn::save_checkpoint(model, cfg, vocab.hash(), path);

  // different vocabulary
  dgmn::Vocabulary other = vocab;
  other.add("interloper");
  CHECK_THROWS_AS(dgmn::load_checkpoint(path, other), dgmn::checkpoint_error);

  // flipped byte breaks the checksum
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(40);
    char c;
    f.seekg(40);
    f.get(c);
    f.seekp(40);
    f.put(static_cast<char>(c ^ 0x5a));
  }
  CHECK_THROWS_AS(dgmn::load_checkpoint(path, vocab), dgmn::checkpoint_error);
  CHECK_THROWS_AS(dgmn::peek_checkpoint_config(path), dgmn::checkpoint_error);
  std::remove(path.c_str());

  CHECK_THROWS_AS(dgmn::load_checkpoint(tmp_path("no_such_ckpt.bin"), vocab),
                  dgmn::checkpoint_error);

  // not a checkpoint at all
  const auto junk = tmp_path("junk_ckpt.bin");
  {
    std::ofstream f(junk, std::ios::binary);
    f << "definitely not binary tensors";
  }
  CHECK_THROWS_AS(dgmn::load_checkpoint(junk, vocab), dgmn::checkpoint_error);
  std::remove(junk.c_str());
}
