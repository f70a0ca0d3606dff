#include <doctest.h>

#include <fstream>

#include "gates/checkpoint.hpp"
#include "gates/errors.hpp"
#include "gates/io.hpp"
#include "support.hpp"

using namespace gates;
using gates::testing::ScratchDir;
using gates::testing::tiny_shape;
using gates::testing::tiny_vocabulary;

namespace {

TrainState sample_state(const Vocabulary& v) {
  Rng rng(17);
  PolicyParams p = init_ngram_params<double>(tiny_shape(v.size()), 3, 0.5);
  TrainState st = TrainState::initialize(p, 99);
  for (Eigen::Index i = 0; i < st.params.size(); ++i) {
    st.params.flat()[i] += rng.uniform() - 0.5;
    st.optimizer.first_moment.flat()[i] = rng.uniform();
    st.optimizer.second_moment.flat()[i] = rng.uniform() * 1e-3;
  }
  st.optimizer.updates = 7;
  st.step = 8;
  st.epoch = 2;
  return st;
}

void expect_data_error(const std::filesystem::path& path) { CHECK_THROWS_AS(load_checkpoint(path), DataError); }

}  // namespace

TEST_CASE("checkpoints round-trip exactly") {
  const Vocabulary v = tiny_vocabulary(8);
  const TrainState st = sample_state(v);
  ScratchDir dir;
  const auto path = dir.path() / "a.ckpt";
  save_checkpoint(path, v, st);
  const Checkpoint c = load_checkpoint(path);
  CHECK(c.vocab == v);
  CHECK(c.state == st);
  CHECK_NOTHROW(require_vocabulary(c, v));
  save_checkpoint(dir.path() / "b.ckpt", c.vocab, c.state);
  CHECK(read_text(path) == read_text(dir.path() / "b.ckpt"));
  CHECK_FALSE(std::filesystem::exists(dir.path() / "a.ckpt.tmp"));
}

TEST_CASE("damaged checkpoints are rejected") {
  const Vocabulary v = tiny_vocabulary(8);
  ScratchDir dir;
  const auto good = dir.path() / "good.ckpt";
  save_checkpoint(good, v, sample_state(v));
  const std::string bytes = read_text(good);

  expect_data_error(dir.path() / "missing.ckpt");

  write_text(dir.path() / "empty.ckpt", "");
  expect_data_error(dir.path() / "empty.ckpt");

  for (std::size_t cut : {std::size_t{4}, std::size_t{20}, bytes.size() / 2, bytes.size() - 1}) {
    write_text(dir.path() / "short.ckpt", bytes.substr(0, cut));
    expect_data_error(dir.path() / "short.ckpt");
  }

  for (std::size_t at : {std::size_t{12}, bytes.size() / 2, bytes.size() - 3}) {
    std::string flipped = bytes;
    flipped[at] = static_cast<char>(flipped[at] ^ 0x10);
    write_text(dir.path() / "flip.ckpt", flipped);
    expect_data_error(dir.path() / "flip.ckpt");
  }

  std::string magic = bytes;
  magic[0] = 'X';
  write_text(dir.path() / "magic.ckpt", magic);
  expect_data_error(dir.path() / "magic.ckpt");

  write_text(dir.path() / "long.ckpt", bytes + "x");
  expect_data_error(dir.path() / "long.ckpt");
}

TEST_CASE("vocabulary mismatch") {
  const Vocabulary v = tiny_vocabulary(8);
  ScratchDir dir;
  save_checkpoint(dir.path() / "a.ckpt", v, sample_state(v));
  const Checkpoint c = load_checkpoint(dir.path() / "a.ckpt");
  CHECK_THROWS_AS(require_vocabulary(c, tiny_vocabulary(9)), DataError);
  CHECK_THROWS_AS(save_checkpoint(dir.path() / "b.ckpt", tiny_vocabulary(9), sample_state(v)), std::exception);
}
