#include "dgmn/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace dgmn {

namespace {

constexpr char kMagic[8] = {'D', 'G', 'M', 'N', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

template <class T>
void put(std::string& out, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));  // little-endian hosts only
  out.append(buf, sizeof(T));
}

struct Reader {
  const std::string& bytes;
  std::size_t pos = 0;

  template <class T>
  T get() {
    if (pos + sizeof(T) > bytes.size()) throw checkpoint_error("checkpoint truncated");
    T v;
    std::memcpy(&v, bytes.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
  }
  std::string get_str(std::size_t n) {
    if (pos + n > bytes.size()) throw checkpoint_error("checkpoint truncated");
    std::string s = bytes.substr(pos, n);
    pos += n;
    return s;
  }
};

}  // namespace

void save_checkpoint(DgmnModel<float>& model, const RunConfig& cfg, std::uint64_t vocab_hash,
                     const std::string& path) {
  auto params = model.named_params();
  const std::string config_text = serialize_run_config(cfg);
  const int vocab_size = model.emb.vocab_size();

  std::string data_blob;
  std::string header;
  put<std::uint32_t>(header, static_cast<std::uint32_t>(params.size()));
  for (auto& [name, p] : params) {
    put<std::uint32_t>(header, static_cast<std::uint32_t>(name.size()));
    header.append(name);
    put<std::uint32_t>(header, static_cast<std::uint32_t>(p.shape().size()));
    for (int d : p.shape()) put<std::uint32_t>(header, static_cast<std::uint32_t>(d));
    put<std::uint64_t>(header, static_cast<std::uint64_t>(data_blob.size()));
    for (float v : p.data()) put<float>(data_blob, v);
  }

  std::string out;
  out.append(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kVersion);
  put<std::uint64_t>(out, vocab_hash);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(vocab_size));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(config_text.size()));
  out.append(config_text);
  out.append(header);
  put<std::uint64_t>(out, static_cast<std::uint64_t>(data_blob.size()));
  out.append(data_blob);
  put<std::uint64_t>(out, fnv1a(out));

  std::ofstream f(path, std::ios::binary);
  if (!f) throw checkpoint_error("cannot write checkpoint " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

namespace {

std::string read_and_verify(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw checkpoint_error("cannot read checkpoint " + path);
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (bytes.size() < sizeof(kMagic) + 8 || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
    throw checkpoint_error("not a checkpoint file: " + path);
  std::uint64_t stored;
  std::memcpy(&stored, bytes.data() + bytes.size() - 8, 8);
  const std::string body = bytes.substr(0, bytes.size() - 8);
  if (fnv1a(body) != stored) throw checkpoint_error("checkpoint checksum mismatch: " + path);
  return body;
}

}  // namespace

RunConfig peek_checkpoint_config(const std::string& path, std::uint64_t* vocab_hash) {
  const std::string body = read_and_verify(path);
  Reader r{body, sizeof(kMagic)};
  const auto version = r.get<std::uint32_t>();
  if (version != kVersion)
    throw checkpoint_error("checkpoint version " + std::to_string(version) + " unsupported");
  const auto hash = r.get<std::uint64_t>();
  if (vocab_hash) *vocab_hash = hash;
  r.get<std::uint32_t>();  // vocab size
  const auto cfg_len = r.get<std::uint32_t>();
  return parse_run_config(r.get_str(cfg_len));
}

LoadedCheckpoint load_checkpoint(const std::string& path, const Vocabulary& vocab) {
  const std::string body = read_and_verify(path);
  Reader r{body, sizeof(kMagic)};
  const auto version = r.get<std::uint32_t>();
  if (version != kVersion)
    throw checkpoint_error("checkpoint version " + std::to_string(version) + " unsupported");
  const auto stored_hash = r.get<std::uint64_t>();
  if (stored_hash != vocab.hash())
    throw checkpoint_error("checkpoint vocabulary hash mismatch (incompatible vocabulary)");
  const auto vocab_size = r.get<std::uint32_t>();
  if (static_cast<int>(vocab_size) != vocab.size())
    throw checkpoint_error("checkpoint vocabulary size mismatch");
  const auto cfg_len = r.get<std::uint32_t>();
  RunConfig cfg = parse_run_config(r.get_str(cfg_len));

  DgmnModel<float> model(cfg.model, vocab, /*seed=*/0);
  auto params = model.named_params();

  const auto n_tensors = r.get<std::uint32_t>();
  if (n_tensors != params.size())
    throw checkpoint_error("checkpoint lists " + std::to_string(n_tensors) + " tensors, model has " +
                           std::to_string(params.size()));
  struct Entry {
    std::string name;
    std::vector<int> shape;
    std::uint64_t offset;
  };
  std::vector<Entry> entries;
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    Entry e;
    e.name = r.get_str(r.get<std::uint32_t>());
    const auto nd = r.get<std::uint32_t>();
    for (std::uint32_t k = 0; k < nd; ++k) e.shape.push_back(static_cast<int>(r.get<std::uint32_t>()));
    e.offset = r.get<std::uint64_t>();
    entries.push_back(std::move(e));
  }
  const auto blob_len = r.get<std::uint64_t>();
  const std::size_t blob_start = r.pos;
  if (blob_start + blob_len != body.size())
    throw checkpoint_error("checkpoint data blob length mismatch");

  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& [name, p] = params[i];
    const auto& e = entries[i];
    if (e.name != name)
      throw checkpoint_error("checkpoint tensor '" + e.name + "' does not match expected '" + name +
                             "' (incompatible configuration)");
    if (e.shape != p.shape())
      throw checkpoint_error("checkpoint tensor '" + name + "' has shape " + shape_str(e.shape) +
                             ", model expects " + shape_str(p.shape()));
    auto& d = p.data();
    if (blob_start + e.offset + d.size() * 4 > body.size())
      throw checkpoint_error("checkpoint data out of range for tensor '" + name + "'");
    std::memcpy(d.data(), body.data() + blob_start + e.offset, d.size() * 4);
  }
  return {std::move(cfg), std::move(model)};
}

}  // namespace dgmn
