#include "gates/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "gates/errors.hpp"
#include "gates/rng.hpp"

namespace gates {

static_assert(std::endian::native == std::endian::little, "checkpoint format assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'G', 'A', 'T', 'E', 'C', 'K', 'P', 'T'};

std::uint64_t fnv1a(const std::string& bytes) {
  return hash_text(std::string_view(bytes));
}

class Writer {
 public:
  template <typename T>
  void pod(const T& v) {
    buf_.append(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void text(const std::string& s) {
    pod(static_cast<std::uint32_t>(s.size()));
    buf_ += s;
  }
  void params(const PolicyParams& p) {
    pod(static_cast<std::uint64_t>(p.size()));
    buf_.append(reinterpret_cast<const char*>(p.flat().data()), static_cast<std::size_t>(p.size()) * sizeof(double));
  }
  std::string& bytes() { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  Reader(const std::string& bytes, std::size_t limit, const std::string& path)
      : bytes_(bytes), limit_(limit), path_(path) {}

  template <typename T>
  T pod() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string text() {
    const auto n = pod<std::uint32_t>();
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  PolicyParams params(const NgramShape& shape) {
    const auto n = pod<std::uint64_t>();
    if (n != shape.parameter_count()) fail("parameter block does not match the model shape");
    PolicyParams p(shape);
    need(n * sizeof(double));
    std::memcpy(p.flat().data(), bytes_.data() + pos_, n * sizeof(double));
    pos_ += n * sizeof(double);
    return p;
  }
  bool done() const { return pos_ == limit_; }
  [[noreturn]] void fail(const std::string& what) const { throw DataError("checkpoint " + path_ + ": " + what); }

 private:
  void need(std::size_t n) const {
    if (limit_ - pos_ < n) fail("truncated");
  }
  const std::string& bytes_;
  std::size_t limit_;
  std::size_t pos_ = 0;
  std::string path_;
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Vocabulary& vocab, const TrainState& state) {
  const NgramShape& shape = state.params.shape();
  if (shape.vocab != vocab.size()) throw DataError("save_checkpoint: model and vocabulary sizes differ");
  Writer w;
  w.bytes().append(kMagic, sizeof(kMagic));
  w.pod(kCheckpointVersion);
  w.pod(static_cast<std::uint32_t>(vocab.size()));
  for (const auto& piece : vocab.pieces()) w.text(piece);
  for (int v : {shape.vocab, shape.context, shape.embed_dim, shape.hidden_dim}) w.pod(static_cast<std::int32_t>(v));
  w.params(state.params);
  w.params(state.ref_params);
  w.params(state.optimizer.first_moment);
  w.params(state.optimizer.second_moment);
  w.pod(state.optimizer.updates);
  w.pod(state.step);
  w.pod(state.epoch);
  w.pod(state.seed);
  w.pod(fnv1a(w.bytes()));

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write checkpoint " + tmp.string());
    out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
    if (!out) throw DataError("failed writing checkpoint " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::string name = path.string();
  if (bytes.size() < sizeof(kMagic) + sizeof(std::uint64_t))
    throw DataError("checkpoint " + name + ": truncated");
  if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
    throw DataError("checkpoint " + name + ": not a checkpoint file");

  const std::size_t body = bytes.size() - sizeof(std::uint64_t);
  Reader r(bytes, body, name);
  r.pod<std::array<char, sizeof(kMagic)>>();
  const auto version = r.pod<std::uint32_t>();
  if (version != kCheckpointVersion)
    r.fail("version " + std::to_string(version) + " (expected " + std::to_string(kCheckpointVersion) + ")");
  std::uint64_t stored = 0;
  std::memcpy(&stored, bytes.data() + body, sizeof(stored));
  if (stored != fnv1a(bytes.substr(0, body))) r.fail("checksum mismatch (truncated or corrupt)");

  Checkpoint ck;
  const auto vocab_size = r.pod<std::uint32_t>();
  std::vector<std::string> pieces;
  pieces.reserve(vocab_size);
  for (std::uint32_t i = 0; i < vocab_size; ++i) pieces.push_back(r.text());
  try {
    ck.vocab = Vocabulary(std::move(pieces));
  } catch (const std::exception& e) {
    r.fail(std::string("bad vocabulary: ") + e.what());
  }
  NgramShape shape;
  shape.vocab = r.pod<std::int32_t>();
  shape.context = r.pod<std::int32_t>();
  shape.embed_dim = r.pod<std::int32_t>();
  shape.hidden_dim = r.pod<std::int32_t>();
  if (shape.vocab != static_cast<int>(vocab_size) || shape.context < 1 || shape.embed_dim < 1 || shape.hidden_dim < 1)
    r.fail("inconsistent model shape");
  ck.state.params = r.params(shape);
  ck.state.ref_params = r.params(shape);
  ck.state.optimizer.first_moment = r.params(shape);
  ck.state.optimizer.second_moment = r.params(shape);
  ck.state.optimizer.updates = r.pod<std::int64_t>();
  ck.state.step = r.pod<std::int64_t>();
  ck.state.epoch = r.pod<std::int64_t>();
  ck.state.seed = r.pod<std::uint64_t>();
  if (!r.done()) r.fail("trailing bytes");
  return ck;
}

void require_vocabulary(const Checkpoint& checkpoint, const Vocabulary& vocab) {
  if (!(checkpoint.vocab == vocab))
    throw DataError("checkpoint vocabulary (" + std::to_string(checkpoint.vocab.size()) +
                    " pieces) does not match the dataset vocabulary (" + std::to_string(vocab.size()) + " pieces)");
}

}  // namespace gates
