#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>

#include <Eigen/Dense>

#include "gates/rng.hpp"
#include "gates/tokens.hpp"

namespace gates {

/// Dimensions of the neural n-gram policy.
///
/// The input to the hidden layer is the concatenated embeddings of the last
/// `context` tokens followed by one prompt-summary vector: the sum of the
/// prompt-embedding rows of every prompt token. The summary is what lets a
/// completion depend on the question (and, for the tutor, the document) once
/// the prompt has scrolled out of the window.
struct NgramShape {
  int vocab = 0;
  int context = 4;
  int embed_dim = 16;
  int hidden_dim = 32;

  int input_dim() const { return (context + 1) * embed_dim; }

  std::size_t embed_offset() const { return 0; }
  std::size_t prompt_embed_offset() const { return embed_offset() + sz(vocab) * sz(embed_dim); }
  std::size_t hidden_w_offset() const { return prompt_embed_offset() + sz(vocab) * sz(embed_dim); }
  std::size_t hidden_b_offset() const { return hidden_w_offset() + sz(input_dim()) * sz(hidden_dim); }
  std::size_t out_w_offset() const { return hidden_b_offset() + sz(hidden_dim); }
  std::size_t out_b_offset() const { return out_w_offset() + sz(hidden_dim) * sz(vocab); }
  std::size_t parameter_count() const { return out_b_offset() + sz(vocab); }

  bool operator==(const NgramShape&) const = default;

 private:
  static std::size_t sz(int v) { return static_cast<std::size_t>(v); }
};

/// All weights live in one flat vector; the named blocks are Eigen maps into it.
template <typename Scalar>
class NgramParams {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  NgramParams() = default;
  explicit NgramParams(const NgramShape& shape)
      : shape_(shape), flat_(Vector::Zero(static_cast<Eigen::Index>(shape.parameter_count()))) {}

  const NgramShape& shape() const { return shape_; }
  Vector& flat() { return flat_; }
  const Vector& flat() const { return flat_; }
  Eigen::Index size() const { return flat_.size(); }

  /// V x d_e, row v is the window embedding of token v.
  Eigen::Map<RowMatrix> embed() { return row_block(shape_.embed_offset()); }
  Eigen::Map<const RowMatrix> embed() const { return row_block(shape_.embed_offset()); }
  /// V x d_e, rows summed over the prompt.
  Eigen::Map<RowMatrix> prompt_embed() { return row_block(shape_.prompt_embed_offset()); }
  Eigen::Map<const RowMatrix> prompt_embed() const { return row_block(shape_.prompt_embed_offset()); }
  /// ((m+1) d_e) x d_h
  Eigen::Map<Matrix> hidden_w() {
    return {ptr(shape_.hidden_w_offset()), shape_.input_dim(), shape_.hidden_dim};
  }
  Eigen::Map<const Matrix> hidden_w() const {
    return {ptr(shape_.hidden_w_offset()), shape_.input_dim(), shape_.hidden_dim};
  }
  Eigen::Map<Vector> hidden_b() { return {ptr(shape_.hidden_b_offset()), shape_.hidden_dim}; }
  Eigen::Map<const Vector> hidden_b() const { return {ptr(shape_.hidden_b_offset()), shape_.hidden_dim}; }
  /// d_h x V
  Eigen::Map<Matrix> out_w() { return {ptr(shape_.out_w_offset()), shape_.hidden_dim, shape_.vocab}; }
  Eigen::Map<const Matrix> out_w() const {
    return {ptr(shape_.out_w_offset()), shape_.hidden_dim, shape_.vocab};
  }
  Eigen::Map<Vector> out_b() { return {ptr(shape_.out_b_offset()), shape_.vocab}; }
  Eigen::Map<const Vector> out_b() const { return {ptr(shape_.out_b_offset()), shape_.vocab}; }

  NgramParams zeros_like() const { return NgramParams(shape_); }

  NgramParams& operator+=(const NgramParams& other) {
    flat_ += other.flat_;
    return *this;
  }
  NgramParams& operator*=(Scalar s) {
    flat_ *= s;
    return *this;
  }

  bool operator==(const NgramParams& other) const {
    return shape_ == other.shape_ && flat_.size() == other.flat_.size() &&
           (flat_.array() == other.flat_.array()).all();
  }

  template <typename Other>
  NgramParams<Other> cast() const {
    NgramParams<Other> out(shape_);
    out.flat() = flat_.template cast<Other>();
    return out;
  }

 private:
  Scalar* ptr(std::size_t off) { return flat_.data() + off; }
  const Scalar* ptr(std::size_t off) const { return flat_.data() + off; }
  Eigen::Map<RowMatrix> row_block(std::size_t off) { return {ptr(off), shape_.vocab, shape_.embed_dim}; }
  Eigen::Map<const RowMatrix> row_block(std::size_t off) const {
    return {ptr(off), shape_.vocab, shape_.embed_dim};
  }

  NgramShape shape_;
  Vector flat_;
};

/// Gaussian initialization; embeddings at `scale`, weight matrices at
/// scale / sqrt(fan_in), biases zero.
template <typename Scalar>
NgramParams<Scalar> init_ngram_params(const NgramShape& shape, std::uint64_t seed, double scale) {
  NgramParams<Scalar> p(shape);
  Rng rng(seed);
  auto fill = [&](auto&& block, double s) {
    for (Eigen::Index i = 0; i < block.rows(); ++i)
      for (Eigen::Index j = 0; j < block.cols(); ++j) block(i, j) = static_cast<Scalar>(s * rng.normal());
  };
  fill(p.embed(), scale);
  fill(p.prompt_embed(), scale);
  fill(p.hidden_w(), scale / std::sqrt(static_cast<double>(shape.input_dim())));
  fill(p.out_w(), scale / std::sqrt(static_cast<double>(shape.hidden_dim)));
  return p;
}

/// Activations of one (prompt, completion) pair, one column per completion position.
template <typename Scalar>
struct NgramForward {
  using Matrix = typename NgramParams<Scalar>::Matrix;
  using Vector = typename NgramParams<Scalar>::Vector;

  Vector prompt_summary;  ///< d_e
  Matrix inputs;          ///< input_dim x L
  Matrix hidden;          ///< d_h x L
  Matrix log_probs;       ///< V x L
  Eigen::Matrix<TokenId, Eigen::Dynamic, Eigen::Dynamic> windows;  ///< m x L
};

namespace detail {

template <typename Scalar>
typename NgramParams<Scalar>::Vector prompt_summary(const NgramParams<Scalar>& params,
                                                    std::span<const TokenId> prompt) {
  typename NgramParams<Scalar>::Vector s =
      NgramParams<Scalar>::Vector::Zero(params.shape().embed_dim);
  auto table = params.prompt_embed();
  for (TokenId t : prompt) s += table.row(t).transpose();
  return s;
}

inline TokenId token_at(std::span<const TokenId> prompt, std::span<const TokenId> completion,
                        std::ptrdiff_t pos, TokenId pad) {
  if (pos < 0) return pad;
  const auto p = static_cast<std::size_t>(pos);
  return p < prompt.size() ? prompt[p] : completion[p - prompt.size()];
}

template <typename Derived>
void log_softmax_columns(Eigen::MatrixBase<Derived>& logits) {
  for (Eigen::Index c = 0; c < logits.cols(); ++c) {
    auto col = logits.col(c);
    const auto mx = col.maxCoeff();
    const auto lse = mx + std::log((col.array() - mx).exp().sum());
    col.array() -= lse;
  }
}

}  // namespace detail

/// Forward pass over every completion position t, each conditioned on the
/// prompt summary and the m tokens preceding t in prompt ++ completion.
/// Positions before the start of the prompt read the padding token.
template <typename Scalar>
NgramForward<Scalar> ngram_forward(const NgramParams<Scalar>& params, std::span<const TokenId> prompt,
                                   std::span<const TokenId> completion, TokenId pad) {
  const NgramShape& sh = params.shape();
  const auto L = static_cast<Eigen::Index>(completion.size());
  NgramForward<Scalar> f;
  f.prompt_summary = detail::prompt_summary(params, prompt);
  f.inputs.resize(sh.input_dim(), L);
  f.windows.resize(sh.context, L);
  auto table = params.embed();
  const auto base = static_cast<std::ptrdiff_t>(prompt.size());
  for (Eigen::Index t = 0; t < L; ++t) {
    for (int s = 0; s < sh.context; ++s) {
      const TokenId tok = detail::token_at(prompt, completion, base + t - sh.context + s, pad);
      f.windows(s, t) = tok;
      f.inputs.block(s * sh.embed_dim, t, sh.embed_dim, 1) = table.row(tok).transpose();
    }
    f.inputs.block(sh.context * sh.embed_dim, t, sh.embed_dim, 1) = f.prompt_summary;
  }
  f.hidden.noalias() = params.hidden_w().transpose() * f.inputs;
  f.hidden.colwise() += params.hidden_b();
  f.hidden = f.hidden.array().tanh().matrix();
  f.log_probs.noalias() = params.out_w().transpose() * f.hidden;
  f.log_probs.colwise() += params.out_b();
  detail::log_softmax_columns(f.log_probs);
  return f;
}

/// Accumulates into `grad` the gradient of sum_t <dlogits.col(t), logits_t>,
/// i.e. backpropagates an upstream gradient given w.r.t. the logits.
template <typename Scalar, typename Derived>
void ngram_backward(const NgramParams<Scalar>& params, std::span<const TokenId> prompt,
                    const NgramForward<Scalar>& f, const Eigen::MatrixBase<Derived>& dlogits,
                    NgramParams<Scalar>& grad) {
  using Matrix = typename NgramParams<Scalar>::Matrix;
  using Vector = typename NgramParams<Scalar>::Vector;
  const NgramShape& sh = params.shape();
  if (dlogits.cols() == 0) return;

  grad.out_w().noalias() += f.hidden * dlogits.transpose();
  grad.out_b() += dlogits.rowwise().sum();
  Matrix dpre = (params.out_w() * dlogits).array() * (Scalar(1) - f.hidden.array().square());
  grad.hidden_w().noalias() += f.inputs * dpre.transpose();
  grad.hidden_b() += dpre.rowwise().sum();
  Matrix dinputs = params.hidden_w() * dpre;

  auto g_embed = grad.embed();
  Vector dsummary = Vector::Zero(sh.embed_dim);
  for (Eigen::Index t = 0; t < dinputs.cols(); ++t) {
    for (int s = 0; s < sh.context; ++s) {
      g_embed.row(f.windows(s, t)) += dinputs.block(s * sh.embed_dim, t, sh.embed_dim, 1).transpose();
    }
    dsummary += dinputs.block(sh.context * sh.embed_dim, t, sh.embed_dim, 1);
  }
  auto g_prompt = grad.prompt_embed();
  for (TokenId tok : prompt) g_prompt.row(tok) += dsummary.transpose();
}

/// Next-token log-probabilities after `prompt ++ prefix` (single position).
template <typename Scalar>
typename NgramParams<Scalar>::Vector ngram_next_log_probs(
    const NgramParams<Scalar>& params, std::span<const TokenId> prompt,
    std::span<const TokenId> prefix, const typename NgramParams<Scalar>::Vector& summary, TokenId pad) {
  using Vector = typename NgramParams<Scalar>::Vector;
  const NgramShape& sh = params.shape();
  Vector x(sh.input_dim());
  auto table = params.embed();
  const auto end = static_cast<std::ptrdiff_t>(prompt.size() + prefix.size());
  for (int s = 0; s < sh.context; ++s) {
    const TokenId tok = detail::token_at(prompt, prefix, end - sh.context + s, pad);
    x.segment(s * sh.embed_dim, sh.embed_dim) = table.row(tok).transpose();
  }
  x.segment(sh.context * sh.embed_dim, sh.embed_dim) = summary;
  Vector h = (params.hidden_w().transpose() * x + params.hidden_b()).array().tanh().matrix();
  Vector logits = params.out_w().transpose() * h + params.out_b();
  detail::log_softmax_columns(logits);
  return logits;
}

}  // namespace gates
