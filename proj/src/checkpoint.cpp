#include "lmpn/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace lmpn {

namespace {

constexpr char kMagic[4] = {'L', 'M', 'P', 'N'};
constexpr std::uint32_t kVersion = 1;

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}
void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_f32(std::string& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

class Reader {
 public:
  Reader(const std::string& buf, const std::string& path) : buf_(buf), path_(path) {}

  std::uint64_t offset() const { return pos_; }

  void need(std::size_t n, const char* what) {
    if (pos_ + n > buf_.size()) {
      throw std::runtime_error("checkpoint: truncated " + path_ + " reading " + what +
                               " at byte " + std::to_string(pos_));
    }
  }
  std::uint8_t u8(const char* what) {
    need(1, what);
    return static_cast<std::uint8_t>(buf_[pos_++]);
  }
  std::uint16_t u16(const char* what) {
    need(2, what);
    std::uint16_t v = 0;
    for (int i = 0; i < 2; ++i) v |= static_cast<std::uint16_t>(static_cast<std::uint8_t>(buf_[pos_++])) << (8 * i);
    return v;
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(buf_[pos_++])) << (8 * i);
    return v;
  }
  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(buf_[pos_++])) << (8 * i);
    return v;
  }
  std::string bytes(std::size_t n, const char* what) {
    need(n, what);
    std::string s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  float f32(const char* what) {
    const std::uint32_t bits = u32(what);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  bool done() const { return pos_ == buf_.size(); }

 private:
  const std::string& buf_;
  std::string path_;
  std::uint64_t pos_ = 0;
};

std::vector<std::vector<int>> expected_shapes(const TrainConfig& cfg, int vocab_size,
                                              std::vector<std::string>& names) {
  // Mirrors ModelParamsT::named() order.
  const auto& m = cfg.model;
  std::vector<std::vector<int>> shapes;
  names.clear();
  auto push = [&](std::string n, std::vector<int> s) {
    names.push_back(std::move(n));
    shapes.push_back(std::move(s));
  };
  push("word_emb", {vocab_size, m.d_word});
  push("pos_head_emb", {2 * m.max_rel + 1, m.d_pos});
  push("pos_tail_emb", {2 * m.max_rel + 1, m.d_pos});
  push("sent_conv_kernel", {m.window, m.sentence_in_dim(), m.filters});
  push("sent_conv_bias", {m.filters});
  if (m.encoder == EncoderMode::fgf) {
    if (!m.tie_phrase_conv) {
      const int n_convs = m.phrase_cnn == PhraseCnnMode::shared ? 1 : 5;
      for (int i = 0; i < n_convs; ++i) {
        push("phrase_conv_kernel_" + std::to_string(i),
             {m.phrase_window, m.phrase_in_dim(), m.phrase_filters});
        push("phrase_conv_bias_" + std::to_string(i), {m.phrase_filters});
      }
    }
    push("phrase_fc_weight", {5 * m.phrase_filters, m.phrase_hidden});
    push("phrase_fc_bias", {m.phrase_hidden});
  }
  return shapes;
}

}  // namespace

Checkpoint make_checkpoint(const TrainConfig& cfg, const Vocab& vocab,
                           const ModelParams& params, long trained_episodes,
                           double best_val_acc_pct) {
  Checkpoint ckpt;
  nlohmann::json root;
  root["config"] = nlohmann::json::parse(train_config_to_json(cfg));
  root["vocab"] = vocab.words;
  root["trained_episodes"] = trained_episodes;
  root["best_val_accuracy"] = best_val_acc_pct;
  ckpt.config_json = root.dump();
  for (const auto& [name, t] : params.named()) {
    ckpt.tensors.push_back({name, t->shape, t->data});
  }
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::string out;
  out.append(kMagic, 4);
  put_u32(out, ckpt.version);
  put_u64(out, ckpt.config_json.size());
  out += ckpt.config_json;
  put_u32(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& t : ckpt.tensors) {
    if (t.name.size() > 0xffff) throw std::invalid_argument("checkpoint: tensor name too long");
    if (t.shape.size() > 0xff) throw std::invalid_argument("checkpoint: tensor rank too large");
    put_u16(out, static_cast<std::uint16_t>(t.name.size()));
    out += t.name;
    out.push_back(static_cast<char>(t.shape.size()));
    for (int d : t.shape) put_u64(out, static_cast<std::uint64_t>(d));
    for (float v : t.data) put_f32(out, v);
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw std::runtime_error("checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("checkpoint: cannot open " + path);
  std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  Reader r(buf, path);

  const std::string magic = r.bytes(4, "magic");
  if (std::memcmp(magic.data(), kMagic, 4) != 0) {
    throw std::runtime_error("checkpoint: bad magic in " + path);
  }
  Checkpoint ckpt;
  ckpt.version = r.u32("version");
  if (ckpt.version != kVersion) {
    throw std::runtime_error("checkpoint: unsupported version " +
                             std::to_string(ckpt.version) + " in " + path);
  }
  const std::uint64_t cfg_len = r.u64("config length");
  ckpt.config_json = r.bytes(cfg_len, "config JSON");
  const std::uint32_t n_tensors = r.u32("tensor count");
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    TensorBlob t;
    const std::uint16_t name_len = r.u16("tensor name length");
    t.name = r.bytes(name_len, "tensor name");
    const std::uint8_t rank = r.u8("tensor rank");
    std::size_t n = 1;
    for (int d = 0; d < rank; ++d) {
      const std::uint64_t dim = r.u64("tensor dim");
      if (dim == 0 || dim > (1u << 30)) {
        throw std::runtime_error("checkpoint: invalid dimension in tensor " + t.name);
      }
      t.shape.push_back(static_cast<int>(dim));
      n *= dim;
    }
    t.data.resize(n);
    for (std::size_t j = 0; j < n; ++j) t.data[j] = r.f32("tensor payload");
    ckpt.tensors.push_back(std::move(t));
  }
  if (!r.done()) {
    throw std::runtime_error("checkpoint: trailing bytes in " + path + " at byte " +
                             std::to_string(r.offset()));
  }

  // Validate tensor names/shapes against the embedded config.
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(ckpt.config_json);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("checkpoint: embedded config is not valid JSON: " +
                             std::string(e.what()));
  }
  const TrainConfig cfg = parse_train_config(root.at("config").dump());
  const int vocab_size = static_cast<int>(root.at("vocab").size());
  std::vector<std::string> names;
  const auto shapes = expected_shapes(cfg, vocab_size, names);
  if (names.size() != ckpt.tensors.size()) {
    throw std::runtime_error("checkpoint: expected " + std::to_string(names.size()) +
                             " tensors, found " + std::to_string(ckpt.tensors.size()));
  }
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (ckpt.tensors[i].name != names[i] || ckpt.tensors[i].shape != shapes[i]) {
      throw std::runtime_error("checkpoint: tensor " + std::to_string(i) +
                               " does not match the embedded config (expected " +
                               names[i] + ")");
    }
  }
  return ckpt;
}

RestoredModel restore_model(const Checkpoint& ckpt) {
  nlohmann::json root = nlohmann::json::parse(ckpt.config_json);
  RestoredModel out;
  out.cfg = parse_train_config(root.at("config").dump());
  out.trained_episodes = root.at("trained_episodes").get<long>();
  out.best_val_acc_pct = root.at("best_val_accuracy").get<double>();

  out.vocab.words = root.at("vocab").get<std::vector<std::string>>();
  if (out.vocab.words.size() < 2) throw std::runtime_error("checkpoint: vocab too small");
  out.vocab.dim = out.cfg.model.d_word;
  for (std::size_t i = 0; i < out.vocab.words.size(); ++i) {
    out.vocab.index.emplace(out.vocab.words[i], static_cast<int>(i));
  }

  std::vector<std::string> names;
  const auto shapes =
      expected_shapes(out.cfg, static_cast<int>(out.vocab.words.size()), names);
  if (names.size() != ckpt.tensors.size()) {
    throw std::runtime_error("checkpoint: expected " + std::to_string(names.size()) +
                             " tensors, found " + std::to_string(ckpt.tensors.size()));
  }
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (ckpt.tensors[i].name != names[i] || ckpt.tensors[i].shape != shapes[i]) {
      throw std::runtime_error("checkpoint: tensor " + std::to_string(i) +
                               " does not match the embedded config (expected " +
                               names[i] + ")");
    }
  }

  auto blob = [&](const std::string& name) -> const TensorBlob& {
    for (const auto& t : ckpt.tensors) {
      if (t.name == name) return t;
    }
    throw std::runtime_error("checkpoint: missing tensor " + name);
  };
  auto to_tensor = [&](const std::string& name) {
    const auto& b = blob(name);
    return make_tensor<float>(b.shape, b.data, true);
  };

  out.vocab.embedding = blob("word_emb").data;

  ModelParams& p = out.params;
  p.cfg = out.cfg.model;
  p.pad_id = out.vocab.pad_id();
  p.word_emb = to_tensor("word_emb");
  p.pos_head_emb = to_tensor("pos_head_emb");
  p.pos_tail_emb = to_tensor("pos_tail_emb");
  p.sent_kernel = to_tensor("sent_conv_kernel");
  p.sent_bias = to_tensor("sent_conv_bias");
  if (p.cfg.encoder == EncoderMode::fgf) {
    if (!p.cfg.tie_phrase_conv) {
      const int n_convs = p.cfg.phrase_cnn == PhraseCnnMode::shared ? 1 : 5;
      for (int i = 0; i < n_convs; ++i) {
        p.phrase_kernels.push_back(to_tensor("phrase_conv_kernel_" + std::to_string(i)));
        p.phrase_biases.push_back(to_tensor("phrase_conv_bias_" + std::to_string(i)));
      }
    }
    p.fc_weight = to_tensor("phrase_fc_weight");
    p.fc_bias = to_tensor("phrase_fc_bias");
  }
  return out;
}

}  // namespace lmpn
