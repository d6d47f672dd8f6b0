#pragma once

// JSON export of fusion attention weights and second-level interaction
// weights, with token strings attached, for heatmap rendering.

#include <json.hpp>

#include "dgmn/data.hpp"
#include "dgmn/trace.hpp"

namespace dgmn {

inline std::vector<std::string> id_tokens(const std::vector<int>& ids, const Vocabulary& vocab) {
  std::vector<std::string> out;
  for (int id : ids) out.push_back(vocab.token(id));
  return out;
}

template <class T>
nlohmann::json export_trace_json(const ForwardTrace<T>& trace, const EncodedExample& ex,
                                 const Vocabulary& vocab) {
  nlohmann::json j;
  j["score"] = trace.score;
  j["response_tokens"] = id_tokens(ex.resp_ids, vocab);
  nlohmann::json utts = nlohmann::json::array();
  for (std::size_t i = 0; i < trace.fusion_ctx_attn.size(); ++i) {
    nlohmann::json u;
    u["tokens"] = id_tokens(ex.ctx_ids[i], vocab);
    nlohmann::json fus = nlohmann::json::array();
    const int l_d = static_cast<int>(ex.doc_ids[0].size());
    for (std::size_t s = 0; s < trace.fusion_ctx_attn[i].size(); ++s) {
      nlohmann::json f;
      f["sentence"] = s;
      f["sentence_tokens"] = id_tokens(ex.doc_ids[s], vocab);
      const auto& flat = trace.fusion_ctx_attn[i][s];
      nlohmann::json rows = nlohmann::json::array();
      for (std::size_t r = 0; r * l_d < flat.size(); ++r)
        rows.push_back(std::vector<T>(flat.begin() + r * l_d, flat.begin() + (r + 1) * l_d));
      f["weights"] = rows;
      fus.push_back(std::move(f));
    }
    u["fusion"] = fus;
    if (i < trace.ctx_level2.size()) {
      nlohmann::json lvl2 = nlohmann::json::array();
      for (std::size_t p = 0; p < trace.ctx_level2[i].size(); ++p) {
        if (trace.ctx_level2[i][p].empty()) continue;  // PAD response position
        nlohmann::json w;
        w["resp_pos"] = p;
        w["resp_token"] = vocab.token(ex.resp_ids[p]);
        w["weights"] = trace.ctx_level2[i][p];
        lvl2.push_back(std::move(w));
      }
      u["level2"] = lvl2;
    }
    utts.push_back(std::move(u));
  }
  j["utterances"] = utts;
  return j;
}

}  // namespace dgmn
