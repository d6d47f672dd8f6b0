#include "dgmn/config.hpp"

#include <fstream>
#include <sstream>

namespace dgmn {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  std::size_t b = s.find_last_not_of(" \t\r");
  return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw config_error("config: '" + key + "' expects true/false, got '" + v + "'");
}

int parse_int(const std::string& v, const std::string& key) {
  try {
    return std::stoi(v);
  } catch (...) {
    throw config_error("config: '" + key + "' expects an integer, got '" + v + "'");
  }
}

double parse_double(const std::string& v, const std::string& key) {
  try {
    return std::stod(v);
  } catch (...) {
    throw config_error("config: '" + key + "' expects a number, got '" + v + "'");
  }
}

}  // namespace

void apply_override(RunConfig& cfg, const std::string& key, const std::string& value) {
  auto& m = cfg.model;
  auto& p = cfg.model.pipeline;
  auto& t = cfg.train;
  if (key == "pipeline.preset") {
    if (value == "persona")
      p = PipelineConfig::persona();
    else if (value == "cmudog")
      p = PipelineConfig::cmudog();
    else
      throw config_error("config: unknown preset '" + value + "'");
  } else if (key == "pipeline.m_max") {
    p.m_max = parse_int(value, key);
  } else if (key == "pipeline.n_max") {
    p.n_max = parse_int(value, key);
  } else if (key == "pipeline.l_u") {
    p.l_u = parse_int(value, key);
  } else if (key == "pipeline.l_d") {
    p.l_d = parse_int(value, key);
  } else if (key == "pipeline.l_r") {
    p.l_r = parse_int(value, key);
  } else if (key == "pipeline.negatives_per_positive") {
    p.negatives_per_positive = parse_int(value, key);
  } else if (key == "model.d_emb") {
    m.d_emb = parse_int(value, key);
  } else if (key == "model.d_ff") {
    m.d_ff = parse_int(value, key);
  } else if (key == "model.d_att") {
    m.d_att = parse_int(value, key);
  } else if (key == "model.d_m") {
    m.d_m = parse_int(value, key);
  } else if (key == "model.cnn_filters") {
    m.cnn_filters = parse_int(value, key);
  } else if (key == "model.ablation") {
    m.ablation = ablation_from_name(value);
  } else if (key == "model.share_encoder_fusion") {
    m.share_encoder_fusion = parse_bool(value, key);
  } else if (key == "model.tie_matching_params") {
    m.tie_matching_params = parse_bool(value, key);
  } else if (key == "model.trainable_embeddings") {
    m.trainable_embeddings = parse_bool(value, key);
  } else if (key == "train.learning_rate") {
    t.learning_rate = parse_double(value, key);
  } else if (key == "train.batch_size") {
    t.batch_size = parse_int(value, key);
  } else if (key == "train.max_epochs") {
    t.max_epochs = parse_int(value, key);
  } else if (key == "train.patience") {
    t.patience = parse_int(value, key);
  } else if (key == "train.seed") {
    t.seed = static_cast<std::uint64_t>(std::stoull(value));
  } else if (key == "train.mean_reduction") {
    t.mean_reduction = parse_bool(value, key);
  } else {
    throw config_error("config: unknown key '" + key + "'");
  }
}

RunConfig parse_run_config(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line, section;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[' && line.back() == ']') {
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw config_error("config line " + std::to_string(line_no) + ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    apply_override(cfg, section.empty() ? key : section + "." + key, value);
  }
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw config_error("cannot read config file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str());
}

std::string serialize_run_config(const RunConfig& cfg) {
  std::ostringstream os;
  const auto& p = cfg.model.pipeline;
  const auto& m = cfg.model;
  const auto& t = cfg.train;
  os << "[pipeline]\n";
  os << "m_max=" << p.m_max << "\nn_max=" << p.n_max << "\nl_u=" << p.l_u << "\nl_d=" << p.l_d
     << "\nl_r=" << p.l_r << "\nnegatives_per_positive=" << p.negatives_per_positive << "\n";
  os << "[model]\n";
  os << "d_emb=" << m.d_emb << "\nd_ff=" << m.d_ff << "\nd_att=" << m.d_att << "\nd_m=" << m.d_m
     << "\ncnn_filters=" << m.cnn_filters << "\nablation=" << ablation_name(m.ablation)
     << "\nshare_encoder_fusion=" << (m.share_encoder_fusion ? "true" : "false")
     << "\ntie_matching_params=" << (m.tie_matching_params ? "true" : "false")
     << "\ntrainable_embeddings=" << (m.trainable_embeddings ? "true" : "false") << "\n";
  os << "[train]\n";
  os << "learning_rate=" << t.learning_rate << "\nbatch_size=" << t.batch_size
     << "\nmax_epochs=" << t.max_epochs << "\npatience=" << t.patience << "\nseed=" << t.seed
     << "\nmean_reduction=" << (t.mean_reduction ? "true" : "false") << "\n";
  return os.str();
}

}  // namespace dgmn
