#pragma once

// Full DGMN: parameter ownership, forward wiring of the encoding, fusion,
// matching and aggregation layers, and the path-addressable parameter map
// used for checkpointing and gradient checks.

#include <string>
#include <utility>
#include <vector>

#include "dgmn/aggregation.hpp"
#include "dgmn/data.hpp"
#include "dgmn/embedding.hpp"

namespace dgmn {

struct ModelConfig {
  int d_emb = 300;
  int d_ff = 0;   // 0 means d_emb
  int d_att = 0;  // 0 means d_emb
  int d_m = 0;    // 0 means d_emb
  int cnn_filters = 16;
  PipelineConfig pipeline;
  Ablation ablation = Ablation::Full;
  bool share_encoder_fusion = false;  // tie fusion f_ATT params to the encoder's
  bool tie_matching_params = false;   // one InteractionParams set for all pathways
  bool trainable_embeddings = true;

  int eff_d_ff() const { return d_ff > 0 ? d_ff : d_emb; }
  int eff_d_att() const { return d_att > 0 ? d_att : d_emb; }
  int eff_d_m() const { return d_m > 0 ? d_m : d_emb; }

  bool uses_grounded() const { return ablation != Ablation::T; }
  bool uses_document() const { return ablation == Ablation::Full; }
};

template <class T>
struct GroundingCache {
  Encodings<T> enc;
  FusedContext<T> fc;  // populated when the ablation uses the grounded pathway
  FusedDocument<T> fd;  // populated for the full model only
};

template <class T>
class DgmnModel {
 public:
  ModelConfig cfg;
  EmbeddingTable<T> emb;
  AttentiveModuleParams<T> enc_params;
  AttentiveModuleParams<T> fus_params;
  InteractionParams<T> inter_plain, inter_grounded, inter_doc;
  CnnParams<T> cnn_plain, cnn_grounded, cnn_doc;
  ScoreParams<T> score_params;

  DgmnModel(ModelConfig config, const Vocabulary& vocab, std::uint64_t seed)
      : cfg(std::move(config)) {
    std::mt19937_64 rng(seed);
    emb = init_embeddings<T>(vocab, cfg.d_emb, rng(), cfg.trainable_embeddings);
    init_rest(rng);
  }

  DgmnModel(ModelConfig config, EmbeddingTable<T> embeddings, std::uint64_t seed)
      : cfg(std::move(config)), emb(std::move(embeddings)) {
    std::mt19937_64 rng(seed);
    (void)rng();  // keep the stream aligned with the vocab-seeded constructor
    init_rest(rng);
  }

  int score_vector_len() const {
    const int d_m = cfg.eff_d_m();
    int len = cnn_output_len(cfg.pipeline.n_max, cfg.pipeline.l_r, d_m, cfg.cnn_filters);
    if (cfg.uses_document())
      len += cnn_output_len(cfg.pipeline.m_max, cfg.pipeline.l_r, d_m, cfg.cnn_filters);
    if (cfg.uses_grounded())
      len += cnn_output_len(cfg.pipeline.n_max, cfg.pipeline.l_r, d_m, cfg.cnn_filters);
    return len;
  }

  // response-independent part of the forward pass, cacheable per (doc, ctx)
  GroundingCache<T> ground(const EncodedExample& ex, ForwardTrace<T>* trace = nullptr) const {
    GroundingCache<T> cache;
    cache.enc = encode_all(ex, emb, enc_params, trace);
    if (cfg.uses_grounded()) {
      cache.fc = fuse_context(cache.enc.U, cache.enc.D, fus_params, trace);
      if (cfg.ablation == Ablation::NoGround)
        for (auto& views : cache.fc.views) views.erase(views.begin());  // drop the U_i slot
    }
    if (cfg.uses_document()) cache.fd = fuse_document(cache.enc.D, cache.enc.U, fus_params, trace);
    return cache;
  }

  Tensor<T> score_with_cache(const GroundingCache<T>& cache, const std::vector<int>& resp_ids,
                             ForwardTrace<T>* trace = nullptr) const {
    auto er = embed_sequence(emb, resp_ids);
    EncodedSequence<T> R = f_att(er, er, enc_params, trace);

    std::vector<Tensor<T>> vectors;
    {
      std::vector<Tensor<T>> ms;
      for (const auto& u : cache.enc.U) ms.push_back(match_plain_context(u, R, inter_plain, trace));
      vectors.push_back(cnn_vector(build_tensor(ms, cfg.pipeline.n_max), cnn_plain));
    }
    if (cfg.uses_document()) {
      std::vector<Tensor<T>> ms;
      for (const auto& views : cache.fd.views)
        ms.push_back(match_fused_document(views, R, inter_doc, trace));
      vectors.push_back(cnn_vector(build_tensor(ms, cfg.pipeline.m_max), cnn_doc));
    }
    if (cfg.uses_grounded()) {
      if (trace) trace->ctx_level2.assign(cache.fc.views.size(), {});
      std::vector<Tensor<T>> ms;
      for (std::size_t i = 0; i < cache.fc.views.size(); ++i)
        ms.push_back(match_grounded_context(cache.fc.views[i], R, inter_grounded, trace,
                                            trace ? &trace->ctx_level2[i] : nullptr));
      vectors.push_back(cnn_vector(build_tensor(ms, cfg.pipeline.n_max), cnn_grounded));
    }
    Tensor<T> s = score(vectors, score_params);
    if (trace) trace->score = s.item();
    return s;
  }

  Tensor<T> forward(const EncodedExample& ex, ForwardTrace<T>* trace = nullptr) const {
    return score_with_cache(ground(ex, trace), ex.resp_ids, trace);
  }

  // every parameter tensor, addressable by path; order is fixed
  std::vector<std::pair<std::string, Tensor<T>>> named_params() {
    std::vector<std::pair<std::string, Tensor<T>>> out;
    out.emplace_back("embedding.matrix", emb.matrix);
    add_attentive(out, "encoder", enc_params);
    if (!cfg.share_encoder_fusion) add_attentive(out, "fusion", fus_params);
    add_interaction(out, "match.plain", inter_plain);
    if (!cfg.tie_matching_params) {
      if (cfg.uses_grounded()) add_interaction(out, "match.grounded", inter_grounded);
      if (cfg.uses_document()) add_interaction(out, "match.doc", inter_doc);
    }
    add_cnn(out, "cnn.plain", cnn_plain);
    if (cfg.uses_document()) add_cnn(out, "cnn.doc", cnn_doc);
    if (cfg.uses_grounded()) add_cnn(out, "cnn.grounded", cnn_grounded);
    out.emplace_back("score.w_o", score_params.w_o);
    out.emplace_back("score.b_o", score_params.b_o);
    return out;
  }

 private:
  void init_rest(std::mt19937_64& rng) {
    const int d = cfg.d_emb, d_ff = cfg.eff_d_ff();
    const int d_att = cfg.eff_d_att(), d_m = cfg.eff_d_m();
    enc_params = init_attentive_params<T>(d, d_ff, rng);
    fus_params = cfg.share_encoder_fusion ? enc_params : init_attentive_params<T>(d, d_ff, rng);
    inter_plain = init_interaction_params<T>(d, d_att, d_m, rng);
    inter_grounded =
        cfg.tie_matching_params ? inter_plain : init_interaction_params<T>(d, d_att, d_m, rng);
    inter_doc =
        cfg.tie_matching_params ? inter_plain : init_interaction_params<T>(d, d_att, d_m, rng);
    cnn_plain = init_cnn_params<T>(cfg.pipeline.n_max, cfg.pipeline.l_r, d_m, cfg.cnn_filters, rng);
    cnn_grounded =
        init_cnn_params<T>(cfg.pipeline.n_max, cfg.pipeline.l_r, d_m, cfg.cnn_filters, rng);
    cnn_doc = init_cnn_params<T>(cfg.pipeline.m_max, cfg.pipeline.l_r, d_m, cfg.cnn_filters, rng);
    score_params = init_score_params<T>(score_vector_len(), rng);
  }

  static void add_attentive(std::vector<std::pair<std::string, Tensor<T>>>& out,
                            const std::string& prefix, AttentiveModuleParams<T>& p) {
    out.emplace_back(prefix + ".ff1_weight", p.ff1_weight);
    out.emplace_back(prefix + ".ff1_bias", p.ff1_bias);
    out.emplace_back(prefix + ".ff2_weight", p.ff2_weight);
    out.emplace_back(prefix + ".ff2_bias", p.ff2_bias);
    out.emplace_back(prefix + ".norm1_gain", p.norm1_gain);
    out.emplace_back(prefix + ".norm1_bias", p.norm1_bias);
    out.emplace_back(prefix + ".norm2_gain", p.norm2_gain);
    out.emplace_back(prefix + ".norm2_bias", p.norm2_bias);
  }

  static void add_interaction(std::vector<std::pair<std::string, Tensor<T>>>& out,
                              const std::string& prefix, InteractionParams<T>& p) {
    out.emplace_back(prefix + ".level1.w", p.level1.w);
    out.emplace_back(prefix + ".level1.v", p.level1.v);
    out.emplace_back(prefix + ".level1.b", p.level1.b);
    out.emplace_back(prefix + ".level2.w", p.level2.w);
    out.emplace_back(prefix + ".level2.v", p.level2.v);
    out.emplace_back(prefix + ".level2.b", p.level2.b);
    out.emplace_back(prefix + ".w_p", p.w_p);
    out.emplace_back(prefix + ".b_p", p.b_p);
  }

  static void add_cnn(std::vector<std::pair<std::string, Tensor<T>>>& out,
                      const std::string& prefix, CnnParams<T>& p) {
    out.emplace_back(prefix + ".kernels1", p.kernels1);
    out.emplace_back(prefix + ".bias1", p.bias1);
    if (p.second_block) {
      out.emplace_back(prefix + ".kernels2", p.kernels2);
      out.emplace_back(prefix + ".bias2", p.bias2);
    }
  }
};

}  // namespace dgmn
