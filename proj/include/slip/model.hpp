#pragma once

// Trainable components: image encoder E_I, text encoder E_T, fusion module R
// and spoof cue map decoder D, with explicit forward caches and backward
// passes. The toy backbone keeps the joint image/text embedding structure at
// a size that trains in seconds on one core. The toy image encoder embeds
// every patch with a shared fc1 + GELU, mean-pools the patch tokens and
// projects with fc2.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "slip/prompt_grammar.hpp"
#include "slip/scm.hpp"
#include "slip/tensor.hpp"

namespace slip {

using Embedding = std::vector<double>;

enum class Component : std::size_t { image_encoder = 0, text_encoder = 1, fusion = 2, decoder = 3 };

inline constexpr std::array<Component, 4> kAllComponents = {
    Component::image_encoder, Component::text_encoder, Component::fusion, Component::decoder};

std::string_view to_string(Component c);

enum class BackboneKind { toy, external_adapter };

struct ModelConfig {
  BackboneKind backbone = BackboneKind::toy;
  /// Square RGB input resolution.
  std::size_t image_size = 64;
  std::size_t patch_size = 8;
  std::size_t image_hidden = 128;
  std::size_t token_dim = 32;
  std::size_t text_hidden = 64;
  std::size_t fusion_hidden = 64;
  std::size_t d_emb = 64;
  std::size_t max_tokens = 32;
  ScmShape scm_shape{1, 16, 16};
  std::uint64_t init_seed = 0;

  void validate() const;
};

/// Whitespace/punctuation tokenizer over the closed vocabulary produced by
/// the prompt grammar. Unknown tokens are an error, never mapped to OOV.
class Tokenizer {
 public:
  Tokenizer() = default;
  Tokenizer(const VocabConfig& vocab, std::size_t max_length);

  std::vector<std::size_t> encode(std::string_view text) const;
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  std::size_t max_length() const { return max_length_; }

  static std::vector<std::string> split(std::string_view text);

 private:
  std::vector<std::string> tokens_;  // sorted
  std::size_t max_length_ = 0;
};

/// Four parameter groups indexed by Component.
struct ModelParams {
  std::array<ParamGroup, 4> groups;

  ParamGroup& operator[](Component c) { return groups[static_cast<std::size_t>(c)]; }
  const ParamGroup& operator[](Component c) const {
    return groups[static_cast<std::size_t>(c)];
  }
  ModelParams zeros_like() const;
  bool all_finite() const;
};

struct ModelState {
  ModelConfig config;
  Tokenizer tokenizer;
  ModelParams params;
};

/// Fresh state with seeded Xavier-uniform weights and zero biases.
ModelState create_model(const ModelConfig& config, const VocabConfig& vocab);

/// Zero the last layer of a component (weights and bias).
void zero_final_layer(ModelState& state, Component component);

/// RGB images in [0, 1], stored count x H x W x 3.
struct ImageBatch {
  std::size_t count = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> pixels;

  std::span<const double> image(std::size_t i) const {
    return {pixels.data() + i * height * width * 3, height * width * 3};
  }
  void append(std::span<const double> image);
};

ImageBatch select_images(const ImageBatch& all, std::span<const std::size_t> indices);

/// One row per non-overlapping patch (image-major, then patch rows and
/// columns), each flattened row-major with interleaved RGB.
Matrix patch_flatten(const ImageBatch& images, std::size_t patch_size);

struct DenseStackCache {
  std::vector<Matrix> inputs;
  std::vector<Matrix> pre;
};

struct ImageEncoderCache {
  Matrix patches;
  Matrix pre;
  Matrix pooled;
};

struct TextEncoderCache {
  std::vector<std::vector<std::size_t>> tokens;
  DenseStackCache mlp;
};

struct FusionCache {
  DenseStackCache mlp;
};

struct DecoderCache {
  Matrix input;
  Matrix pre;
  Matrix hidden;
};

/// Batched forward passes. Rows of the returned matrices are embeddings
/// (encoders, fusion) or flattened C x H x W maps (decoder).
Matrix encode_images(const ModelState& state, const ImageBatch& images,
                     ImageEncoderCache* cache = nullptr);
Matrix encode_texts(const ModelState& state, std::span<const Prompt> prompts,
                    TextEncoderCache* cache = nullptr);
/// R(a, b) on the concatenation [a | b]; order matters.
Matrix fuse(const ModelState& state, const Matrix& first, const Matrix& second,
            FusionCache* cache = nullptr);
Matrix decode(const ModelState& state, const Matrix& embeddings,
              DecoderCache* cache = nullptr);

/// Backward passes accumulate parameter gradients into `grads` (skipped when
/// null, i.e. the component is frozen) and write input gradients when asked.
void backward_image_encoder(const ModelState& state, const ImageEncoderCache& cache,
                            const Matrix& grad_out, ParamGroup& grads);
void backward_text_encoder(const ModelState& state, const TextEncoderCache& cache,
                           const Matrix& grad_out, ParamGroup& grads);
void backward_fusion(const ModelState& state, const FusionCache& cache,
                     const Matrix& grad_out, ParamGroup* grads, Matrix* grad_first,
                     Matrix* grad_second);
void backward_decoder(const ModelState& state, const DecoderCache& cache,
                      const Matrix& grad_out, ParamGroup* grads, Matrix* grad_in);

// Single-sample conveniences.
Embedding encode_image(const ModelState& state, std::span<const double> image);
Embedding encode_text(const ModelState& state, const Prompt& prompt);
Embedding fuse(const ModelState& state, const Embedding& first, const Embedding& second);
SpoofCueMap decode_scm(const ModelState& state, const Embedding& embedding);

Matrix to_matrix(std::span<const Embedding> embeddings);
SpoofCueMap row_to_map(const Matrix& maps, std::size_t row, const ScmShape& shape);
Matrix maps_to_matrix(std::span<const SpoofCueMap> maps);

/// Container precision for tensor payloads.
enum class Precision : std::uint32_t { float32 = 1, float64 = 2 };

inline constexpr std::uint32_t kCheckpointFormatVersion = 1;

/// Versioned binary tensor container: magic, format version, precision,
/// d_emb, scm shape and named little-endian tensors with shape headers.
struct TensorArchive {
  std::uint32_t d_emb = 0;
  ScmShape scm_shape;
  std::vector<Tensor> tensors;
};

void write_archive(const std::filesystem::path& path, const TensorArchive& archive,
                   Precision precision);
TensorArchive read_archive(const std::filesystem::path& path);

/// Model parameters as 32-bit floats, tensors named "<component>/<tensor>".
void save_checkpoint(const std::filesystem::path& path, const ModelState& state,
                     Precision precision = Precision::float32);
/// Loads into a state built from the same config; rejects version, d_emb,
/// scm shape, tensor name or tensor shape mismatches.
void load_checkpoint(const std::filesystem::path& path, ModelState& state);

/// Flattened (component/tensor) view used by checkpoints and the optimizer.
std::vector<Tensor> flatten_params(const ModelParams& params);
void assign_params(ModelParams& params, std::span<const Tensor> tensors);

/// FNV-1a over the raw bytes of all parameters; cheap bitwise fingerprint.
std::uint64_t checksum(const ModelParams& params);

}  // namespace slip
