#include "slip/model.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>

#include "slip/errors.hpp"
#include "slip/kernels.hpp"
#include "slip/rng.hpp"

namespace slip {
namespace {

constexpr std::array<std::string_view, 2> kEncoderLayers = {"fc1", "fc2"};
constexpr std::array<std::string_view, 3> kFusionLayers = {"conv1", "conv2", "conv3"};

Tensor make_tensor(std::string name, std::vector<std::size_t> shape) {
  Tensor t{std::move(name), std::move(shape), {}};
  t.data.assign(t.numel(), 0.0);
  return t;
}

void xavier_fill(Tensor& t, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (double& v : t.data) v = rng.uniform(-bound, bound);
}

std::string weight_name(std::string_view layer) { return std::string(layer) + ".weight"; }
std::string bias_name(std::string_view layer) { return std::string(layer) + ".bias"; }

// Dense (or 1x1 conv) layers with GELU between consecutive layers.
template <std::size_t N>
Matrix dense_stack_forward(const ParamGroup& g, const std::array<std::string_view, N>& layers,
                           const Matrix& x, DenseStackCache* cache) {
  if (cache) {
    cache->inputs.clear();
    cache->pre.clear();
  }
  Matrix h = x;
  for (std::size_t k = 0; k < N; ++k) {
    const Tensor& w = g.at(weight_name(layers[k]));
    const Tensor& b = g.at(bias_name(layers[k]));
    if (w.shape[1] != h.cols) {
      throw ArgumentError(g.name + ": input width " + std::to_string(h.cols) +
                          " does not match layer " + std::string(layers[k]));
    }
    Matrix pre(h.rows, w.shape[0]);
    kernels::affine_forward(w.data, b.data, h, pre);
    if (cache) cache->inputs.push_back(h);
    if (k + 1 < N) {
      kernels::gelu_forward(pre, h);
      if (cache) cache->pre.push_back(std::move(pre));
    } else {
      h = std::move(pre);
    }
  }
  return h;
}

template <std::size_t N>
void dense_stack_backward(const ParamGroup& g, const std::array<std::string_view, N>& layers,
                          const DenseStackCache& cache, const Matrix& grad_out,
                          ParamGroup* grads, Matrix* grad_in) {
  ParamGroup scratch;
  if (grads == nullptr) {
    scratch = g.zeros_like();
    grads = &scratch;
  }
  Matrix grad = grad_out;
  for (std::size_t kk = N; kk-- > 0;) {
    if (kk + 1 < N) {
      Matrix grad_pre;
      kernels::gelu_backward(cache.pre[kk], grad, grad_pre);
      grad = std::move(grad_pre);
    }
    const Tensor& w = g.at(weight_name(layers[kk]));
    Tensor& gw = grads->at(weight_name(layers[kk]));
    Tensor& gb = grads->at(bias_name(layers[kk]));
    const bool need_input = kk > 0 || grad_in != nullptr;
    Matrix grad_x;
    kernels::affine_backward(w.data, cache.inputs[kk], grad, gw.data, gb.data,
                             need_input ? &grad_x : nullptr);
    grad = std::move(grad_x);
  }
  if (grad_in) *grad_in = std::move(grad);
}

kernels::Upsample2x upsample_geometry(const ScmShape& s) {
  return {s.channels, s.channels, s.height / 2, s.width / 2};
}

std::size_t patch_width(const ModelConfig& c) { return c.patch_size * c.patch_size * 3; }

void check_rows(const Matrix& m, std::size_t cols, const char* what) {
  if (m.cols != cols) {
    throw ArgumentError(std::string(what) + ": expected dimension " + std::to_string(cols) +
                        ", got " + std::to_string(m.cols));
  }
}

// Little-endian scalar I/O.
template <typename T>
void put(std::ostream& os, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  os.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  unsigned char bytes[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(bytes), sizeof(T))) {
    throw IoError("checkpoint truncated");
  }
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

constexpr char kMagic[8] = {'S', 'L', 'I', 'P', 'C', 'K', 'P', 'T'};

}  // namespace

std::string_view to_string(Component c) {
  switch (c) {
    case Component::image_encoder: return "image_encoder";
    case Component::text_encoder: return "text_encoder";
    case Component::fusion: return "fusion";
    case Component::decoder: return "decoder";
  }
  return "?";
}

void ModelConfig::validate() const {
  if (backbone != BackboneKind::toy) {
    throw ConfigError("backbone 'external_adapter' is not available in this build; use 'toy'");
  }
  if (image_size == 0 || patch_size == 0 || image_size % patch_size != 0) {
    throw ConfigError("model.image_size must be a positive multiple of model.patch_size");
  }
  if (image_hidden == 0 || token_dim == 0 || text_hidden == 0 || fusion_hidden == 0 ||
      d_emb == 0 || max_tokens == 0) {
    throw ConfigError("model layer widths must be positive");
  }
  if (scm_shape.channels == 0 || scm_shape.height < 2 || scm_shape.width < 2 ||
      scm_shape.height % 2 != 0 || scm_shape.width % 2 != 0) {
    throw ConfigError("model.scm_shape needs positive channels and even height/width");
  }
}

// ---------------------------------------------------------------- tokenizer

std::vector<std::string> Tokenizer::split(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (char ch : text) {
    const auto u = static_cast<unsigned char>(ch);
    if (std::isspace(u)) {
      flush();
    } else if (std::ispunct(u) && ch != '_') {
      flush();
      out.emplace_back(1, ch);
    } else {
      cur.push_back(ch);
    }
  }
  flush();
  return out;
}

Tokenizer::Tokenizer(const VocabConfig& vocab, std::size_t max_length)
    : max_length_(max_length) {
  vocab.validate();
  std::set<std::string> words;
  for (auto family : {PromptFamily::live, PromptFamily::spoof, PromptFamily::content,
                      PromptFamily::hybrid}) {
    for (const auto& p : enumerate_prompts(family, vocab)) {
      for (auto& tok : split(p.text)) words.insert(std::move(tok));
    }
  }
  tokens_.assign(words.begin(), words.end());
}

std::vector<std::size_t> Tokenizer::encode(std::string_view text) const {
  const auto pieces = split(text);
  if (pieces.empty()) throw ArgumentError("cannot tokenize empty text");
  if (pieces.size() > max_length_) {
    throw ArgumentError("token sequence of length " + std::to_string(pieces.size()) +
                        " exceeds max length " + std::to_string(max_length_));
  }
  std::vector<std::size_t> ids;
  ids.reserve(pieces.size());
  for (const auto& p : pieces) {
    auto it = std::lower_bound(tokens_.begin(), tokens_.end(), p);
    if (it == tokens_.end() || *it != p) throw ArgumentError("unknown token '" + p + "'");
    ids.push_back(static_cast<std::size_t>(it - tokens_.begin()));
  }
  return ids;
}

// ------------------------------------------------------------ construction

ModelParams ModelParams::zeros_like() const {
  ModelParams out;
  for (std::size_t i = 0; i < groups.size(); ++i) out.groups[i] = groups[i].zeros_like();
  return out;
}

bool ModelParams::all_finite() const {
  return std::all_of(groups.begin(), groups.end(),
                     [](const ParamGroup& g) { return g.all_finite(); });
}

ModelState create_model(const ModelConfig& config, const VocabConfig& vocab) {
  config.validate();
  ModelState s;
  s.config = config;
  s.tokenizer = Tokenizer(vocab, config.max_tokens);
  const std::size_t d = config.d_emb;
  const std::size_t map_quarter = config.scm_shape.size() / 4;

  auto dense = [](ParamGroup& g, std::string_view layer, std::size_t out, std::size_t in,
                  bool conv) {
    std::vector<std::size_t> wshape = conv ? std::vector<std::size_t>{out, in, 1, 1}
                                           : std::vector<std::size_t>{out, in};
    g.tensors.push_back(make_tensor(weight_name(layer), wshape));
    g.tensors.push_back(make_tensor(bias_name(layer), {out}));
  };

  ParamGroup& ei = s.params[Component::image_encoder];
  ei.name = "image_encoder";
  dense(ei, "fc1", config.image_hidden, patch_width(config), false);
  dense(ei, "fc2", d, config.image_hidden, false);

  ParamGroup& et = s.params[Component::text_encoder];
  et.name = "text_encoder";
  et.tensors.push_back(make_tensor("token_embedding", {s.tokenizer.size(), config.token_dim}));
  dense(et, "fc1", config.text_hidden, config.token_dim, false);
  dense(et, "fc2", d, config.text_hidden, false);

  ParamGroup& r = s.params[Component::fusion];
  r.name = "fusion";
  dense(r, "conv1", config.fusion_hidden, 2 * d, true);
  dense(r, "conv2", config.fusion_hidden, config.fusion_hidden, true);
  dense(r, "conv3", d, config.fusion_hidden, true);

  ParamGroup& dec = s.params[Component::decoder];
  dec.name = "decoder";
  dense(dec, "fc", map_quarter, d, false);
  const std::size_t c = config.scm_shape.channels;
  dec.tensors.push_back(make_tensor("upconv.weight", {c, c, 2, 2}));
  dec.tensors.push_back(make_tensor("upconv.bias", {c}));

  std::uint64_t stream = 0;
  for (Component comp : kAllComponents) {
    for (Tensor& t : s.params[comp].tensors) {
      Rng rng = Rng::derive(config.init_seed, {static_cast<std::uint64_t>(comp), stream++});
      if (t.name == "token_embedding") {
        for (double& v : t.data) v = rng.normal();
      } else if (t.name == "upconv.weight") {
        xavier_fill(t, c * 4, c * 4, rng);
      } else if (t.name.ends_with(".weight")) {
        xavier_fill(t, t.shape[1], t.shape[0], rng);
      }
    }
  }
  return s;
}

void zero_final_layer(ModelState& state, Component component) {
  ParamGroup& g = state.params[component];
  auto zero = [&](const std::string& name) {
    auto& t = g.at(name);
    std::fill(t.data.begin(), t.data.end(), 0.0);
  };
  switch (component) {
    case Component::image_encoder:
    case Component::text_encoder:
      zero("fc2.weight");
      zero("fc2.bias");
      break;
    case Component::fusion:
      zero("conv3.weight");
      zero("conv3.bias");
      break;
    case Component::decoder:
      zero("upconv.weight");
      zero("upconv.bias");
      break;
  }
}

// ------------------------------------------------------------------ images

void ImageBatch::append(std::span<const double> image) {
  if (image.size() != height * width * 3) {
    throw ArgumentError("ImageBatch::append: image size does not match batch geometry");
  }
  pixels.insert(pixels.end(), image.begin(), image.end());
  ++count;
}

ImageBatch select_images(const ImageBatch& all, std::span<const std::size_t> indices) {
  ImageBatch out;
  out.height = all.height;
  out.width = all.width;
  out.pixels.reserve(indices.size() * all.height * all.width * 3);
  for (std::size_t i : indices) {
    if (i >= all.count) throw ArgumentError("select_images: index out of range");
    out.append(all.image(i));
  }
  return out;
}

Matrix patch_flatten(const ImageBatch& images, std::size_t patch_size) {
  const std::size_t h = images.height;
  const std::size_t w = images.width;
  if (patch_size == 0 || h % patch_size != 0 || w % patch_size != 0) {
    throw ArgumentError("patch_flatten: image size is not a multiple of the patch size");
  }
  if (images.pixels.size() != images.count * h * w * 3) {
    throw ArgumentError("patch_flatten: pixel buffer does not match geometry");
  }
  const std::size_t per_image = (h / patch_size) * (w / patch_size);
  Matrix out(images.count * per_image, patch_size * patch_size * 3);
  for (std::size_t n = 0; n < images.count; ++n) {
    const auto img = images.image(n);
    double* dst = out.data.data() + n * per_image * out.cols;
    for (std::size_t py = 0; py < h; py += patch_size) {
      for (std::size_t px = 0; px < w; px += patch_size) {
        for (std::size_t y = py; y < py + patch_size; ++y) {
          const double* src = img.data() + (y * w + px) * 3;
          dst = std::copy(src, src + patch_size * 3, dst);
        }
      }
    }
  }
  return out;
}

// ----------------------------------------------------------------- forward

Matrix encode_images(const ModelState& state, const ImageBatch& images,
                     ImageEncoderCache* cache) {
  const auto& c = state.config;
  if (images.height != c.image_size || images.width != c.image_size) {
    throw ArgumentError("encode_images: expected " + std::to_string(c.image_size) + "x" +
                        std::to_string(c.image_size) + " RGB input, got " +
                        std::to_string(images.height) + "x" + std::to_string(images.width));
  }
  const ParamGroup& g = state.params[Component::image_encoder];
  Matrix patches = patch_flatten(images, c.patch_size);
  const std::size_t per_image = patches.rows / std::max<std::size_t>(images.count, 1);
  const Tensor& w1 = g.at("fc1.weight");
  Matrix pre(patches.rows, w1.shape[0]);
  kernels::affine_forward(w1.data, g.at("fc1.bias").data, patches, pre);
  Matrix hidden;
  kernels::gelu_forward(pre, hidden);
  // Patch tokens share fc1; the image feature is their mean.
  Matrix pooled(images.count, hidden.cols);
  const double inv = 1.0 / static_cast<double>(per_image);
  for (std::size_t n = 0; n < images.count; ++n) {
    auto dst = pooled.row(n);
    for (std::size_t p = 0; p < per_image; ++p) {
      const auto src = hidden.row(n * per_image + p);
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
    }
    for (double& v : dst) v *= inv;
  }
  const Tensor& w2 = g.at("fc2.weight");
  Matrix z(images.count, w2.shape[0]);
  kernels::affine_forward(w2.data, g.at("fc2.bias").data, pooled, z);
  if (cache) {
    cache->patches = std::move(patches);
    cache->pre = std::move(pre);
    cache->pooled = std::move(pooled);
  }
  return z;
}

Matrix encode_texts(const ModelState& state, std::span<const Prompt> prompts,
                    TextEncoderCache* cache) {
  const ParamGroup& g = state.params[Component::text_encoder];
  const Tensor& table = g.at("token_embedding");
  const std::size_t dim = table.shape[1];
  Matrix pooled(prompts.size(), dim);
  std::vector<std::vector<std::size_t>> all_ids;
  all_ids.reserve(prompts.size());
  for (std::size_t n = 0; n < prompts.size(); ++n) {
    auto ids = state.tokenizer.encode(prompts[n].text);
    const double inv = 1.0 / static_cast<double>(ids.size());
    auto row = pooled.row(n);
    for (std::size_t id : ids) {
      const double* e = table.data.data() + id * dim;
      for (std::size_t k = 0; k < dim; ++k) row[k] += e[k];
    }
    for (double& v : row) v *= inv;
    all_ids.push_back(std::move(ids));
  }
  if (cache) cache->tokens = std::move(all_ids);
  return dense_stack_forward(g, kEncoderLayers, pooled, cache ? &cache->mlp : nullptr);
}

Matrix fuse(const ModelState& state, const Matrix& first, const Matrix& second,
            FusionCache* cache) {
  const std::size_t d = state.config.d_emb;
  check_rows(first, d, "fuse");
  check_rows(second, d, "fuse");
  if (first.rows != second.rows) throw ArgumentError("fuse: batch sizes differ");
  Matrix cat(first.rows, 2 * d);
  for (std::size_t n = 0; n < first.rows; ++n) {
    auto dst = cat.row(n);
    std::copy(first.row(n).begin(), first.row(n).end(), dst.begin());
    std::copy(second.row(n).begin(), second.row(n).end(), dst.begin() + static_cast<std::ptrdiff_t>(d));
  }
  return dense_stack_forward(state.params[Component::fusion], kFusionLayers, cat,
                             cache ? &cache->mlp : nullptr);
}

Matrix decode(const ModelState& state, const Matrix& embeddings, DecoderCache* cache) {
  check_rows(embeddings, state.config.d_emb, "decode");
  const ParamGroup& g = state.params[Component::decoder];
  const Tensor& w = g.at("fc.weight");
  Matrix pre(embeddings.rows, w.shape[0]);
  kernels::affine_forward(w.data, g.at("fc.bias").data, embeddings, pre);
  Matrix hidden;
  kernels::gelu_forward(pre, hidden);
  const auto geo = upsample_geometry(state.config.scm_shape);
  Matrix out(embeddings.rows, geo.out_size());
  kernels::upsample_forward(geo, g.at("upconv.weight").data, g.at("upconv.bias").data, hidden,
                            out);
  if (cache) {
    cache->input = embeddings;
    cache->pre = std::move(pre);
    cache->hidden = std::move(hidden);
  }
  return out;
}

// ---------------------------------------------------------------- backward

void backward_image_encoder(const ModelState& state, const ImageEncoderCache& cache,
                            const Matrix& grad_out, ParamGroup& grads) {
  const ParamGroup& g = state.params[Component::image_encoder];
  Matrix grad_pooled;
  kernels::affine_backward(g.at("fc2.weight").data, cache.pooled, grad_out,
                           grads.at("fc2.weight").data, grads.at("fc2.bias").data, &grad_pooled);
  const std::size_t images = cache.pooled.rows;
  const std::size_t per_image = cache.pre.rows / std::max<std::size_t>(images, 1);
  const double inv = 1.0 / static_cast<double>(per_image);
  Matrix grad_hidden(cache.pre.rows, cache.pre.cols);
  for (std::size_t r = 0; r < grad_hidden.rows; ++r) {
    const auto src = grad_pooled.row(r / per_image);
    auto dst = grad_hidden.row(r);
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] = src[k] * inv;
  }
  Matrix grad_pre;
  kernels::gelu_backward(cache.pre, grad_hidden, grad_pre);
  kernels::affine_backward(g.at("fc1.weight").data, cache.patches, grad_pre,
                           grads.at("fc1.weight").data, grads.at("fc1.bias").data, nullptr);
}

void backward_text_encoder(const ModelState& state, const TextEncoderCache& cache,
                           const Matrix& grad_out, ParamGroup& grads) {
  const ParamGroup& g = state.params[Component::text_encoder];
  Matrix grad_pooled;
  dense_stack_backward(g, kEncoderLayers, cache.mlp, grad_out, &grads, &grad_pooled);
  Tensor& gtable = grads.at("token_embedding");
  const std::size_t dim = gtable.shape[1];
  for (std::size_t n = 0; n < cache.tokens.size(); ++n) {
    const auto& ids = cache.tokens[n];
    const double inv = 1.0 / static_cast<double>(ids.size());
    const auto gp = grad_pooled.row(n);
    for (std::size_t id : ids) {
      double* dst = gtable.data.data() + id * dim;
      for (std::size_t k = 0; k < dim; ++k) dst[k] += gp[k] * inv;
    }
  }
}

void backward_fusion(const ModelState& state, const FusionCache& cache, const Matrix& grad_out,
                     ParamGroup* grads, Matrix* grad_first, Matrix* grad_second) {
  const bool need_input = grad_first != nullptr || grad_second != nullptr;
  Matrix grad_cat;
  dense_stack_backward(state.params[Component::fusion], kFusionLayers, cache.mlp, grad_out, grads,
                       need_input ? &grad_cat : nullptr);
  if (!need_input) return;
  const std::size_t d = state.config.d_emb;
  if (grad_first) *grad_first = Matrix(grad_cat.rows, d);
  if (grad_second) *grad_second = Matrix(grad_cat.rows, d);
  for (std::size_t n = 0; n < grad_cat.rows; ++n) {
    const auto src = grad_cat.row(n);
    if (grad_first) std::copy_n(src.begin(), d, grad_first->row(n).begin());
    if (grad_second) {
      std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(d), d, grad_second->row(n).begin());
    }
  }
}

void backward_decoder(const ModelState& state, const DecoderCache& cache, const Matrix& grad_out,
                      ParamGroup* grads, Matrix* grad_in) {
  const ParamGroup& g = state.params[Component::decoder];
  ParamGroup scratch;
  if (grads == nullptr) {
    scratch = g.zeros_like();
    grads = &scratch;
  }
  const auto geo = upsample_geometry(state.config.scm_shape);
  Matrix grad_hidden;
  kernels::upsample_backward(geo, g.at("upconv.weight").data, cache.hidden, grad_out,
                             grads->at("upconv.weight").data, grads->at("upconv.bias").data,
                             &grad_hidden);
  Matrix grad_pre;
  kernels::gelu_backward(cache.pre, grad_hidden, grad_pre);
  kernels::affine_backward(g.at("fc.weight").data, cache.input, grad_pre,
                           grads->at("fc.weight").data, grads->at("fc.bias").data, grad_in);
}

// ----------------------------------------------------------- conveniences

Matrix to_matrix(std::span<const Embedding> embeddings) {
  if (embeddings.empty()) return {};
  Matrix m(embeddings.size(), embeddings.front().size());
  for (std::size_t n = 0; n < embeddings.size(); ++n) {
    if (embeddings[n].size() != m.cols) throw ArgumentError("embeddings differ in dimension");
    std::copy(embeddings[n].begin(), embeddings[n].end(), m.row(n).begin());
  }
  return m;
}

SpoofCueMap row_to_map(const Matrix& maps, std::size_t row, const ScmShape& shape) {
  if (maps.cols != shape.size()) throw ArgumentError("row_to_map: shape mismatch");
  const auto r = maps.row(row);
  return SpoofCueMap{shape, std::vector<double>(r.begin(), r.end())};
}

Matrix maps_to_matrix(std::span<const SpoofCueMap> maps) {
  if (maps.empty()) return {};
  const ScmShape shape = maps.front().shape;
  Matrix m(maps.size(), shape.size());
  for (std::size_t n = 0; n < maps.size(); ++n) {
    if (!(maps[n].shape == shape) || maps[n].data.size() != shape.size()) {
      throw ArgumentError("spoof cue maps differ in shape");
    }
    std::copy(maps[n].data.begin(), maps[n].data.end(), m.row(n).begin());
  }
  return m;
}

Embedding encode_image(const ModelState& state, std::span<const double> image) {
  const std::size_t side = state.config.image_size;
  if (image.size() != side * side * 3) {
    throw ArgumentError("encode_image: expected " + std::to_string(side) + "x" +
                        std::to_string(side) + "x3 input");
  }
  ImageBatch b;
  b.height = b.width = side;
  b.append(image);
  const Matrix z = encode_images(state, b);
  return {z.data.begin(), z.data.end()};
}

Embedding encode_text(const ModelState& state, const Prompt& prompt) {
  const Matrix l = encode_texts(state, std::span<const Prompt>(&prompt, 1));
  return {l.data.begin(), l.data.end()};
}

Embedding fuse(const ModelState& state, const Embedding& first, const Embedding& second) {
  const Matrix out = fuse(state, to_matrix(std::span(&first, 1)), to_matrix(std::span(&second, 1)));
  return {out.data.begin(), out.data.end()};
}

SpoofCueMap decode_scm(const ModelState& state, const Embedding& embedding) {
  const Matrix maps = decode(state, to_matrix(std::span(&embedding, 1)));
  return row_to_map(maps, 0, state.config.scm_shape);
}

// ------------------------------------------------------------ checkpoints

std::vector<Tensor> flatten_params(const ModelParams& params) {
  std::vector<Tensor> out;
  for (Component c : kAllComponents) {
    for (const Tensor& t : params[c].tensors) {
      out.push_back(Tensor{std::string(to_string(c)) + "/" + t.name, t.shape, t.data});
    }
  }
  return out;
}

void assign_params(ModelParams& params, std::span<const Tensor> tensors) {
  std::size_t expected = 0;
  for (Component c : kAllComponents) expected += params[c].tensors.size();
  if (tensors.size() != expected) {
    throw IoError("checkpoint holds " + std::to_string(tensors.size()) + " tensors, model has " +
                  std::to_string(expected));
  }
  std::size_t k = 0;
  for (Component c : kAllComponents) {
    for (Tensor& t : params[c].tensors) {
      const Tensor& src = tensors[k++];
      const std::string want = std::string(to_string(c)) + "/" + t.name;
      if (src.name != want) throw IoError("checkpoint tensor '" + src.name + "' where '" + want + "' was expected");
      if (src.shape != t.shape) throw IoError("checkpoint tensor '" + src.name + "' has a mismatched shape");
      t.data = src.data;
    }
  }
}

void write_archive(const std::filesystem::path& path, const TensorArchive& archive,
                   Precision precision) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  os.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(os, kCheckpointFormatVersion);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(precision));
  put<std::uint32_t>(os, archive.d_emb);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(archive.scm_shape.channels));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(archive.scm_shape.height));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(archive.scm_shape.width));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(archive.tensors.size()));
  for (const Tensor& t : archive.tensors) {
    put<std::uint32_t>(os, static_cast<std::uint32_t>(t.name.size()));
    os.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(t.shape.size()));
    for (std::size_t dim : t.shape) put<std::uint32_t>(os, static_cast<std::uint32_t>(dim));
    for (double v : t.data) {
      if (precision == Precision::float32) {
        put<float>(os, static_cast<float>(v));
      } else {
        put<double>(os, v);
      }
    }
  }
  if (!os) throw IoError("failed writing '" + path.string() + "'");
}

TensorArchive read_archive(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint '" + path.string() + "'");
  char magic[sizeof(kMagic)];
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw IoError("'" + path.string() + "' is not a checkpoint file");
  }
  const auto version = get<std::uint32_t>(is);
  if (version != kCheckpointFormatVersion) {
    throw IoError("unsupported checkpoint format version " + std::to_string(version));
  }
  const auto precision = static_cast<Precision>(get<std::uint32_t>(is));
  if (precision != Precision::float32 && precision != Precision::float64) {
    throw IoError("unknown checkpoint precision code");
  }
  TensorArchive a;
  a.d_emb = get<std::uint32_t>(is);
  a.scm_shape.channels = get<std::uint32_t>(is);
  a.scm_shape.height = get<std::uint32_t>(is);
  a.scm_shape.width = get<std::uint32_t>(is);
  const auto count = get<std::uint32_t>(is);
  for (std::uint32_t k = 0; k < count; ++k) {
    Tensor t;
    t.name.resize(get<std::uint32_t>(is));
    if (!is.read(t.name.data(), static_cast<std::streamsize>(t.name.size()))) {
      throw IoError("checkpoint truncated");
    }
    const auto ndim = get<std::uint32_t>(is);
    for (std::uint32_t d = 0; d < ndim; ++d) t.shape.push_back(get<std::uint32_t>(is));
    t.data.resize(t.numel());
    for (double& v : t.data) {
      v = precision == Precision::float32 ? static_cast<double>(get<float>(is)) : get<double>(is);
    }
    a.tensors.push_back(std::move(t));
  }
  return a;
}

void save_checkpoint(const std::filesystem::path& path, const ModelState& state,
                     Precision precision) {
  TensorArchive a;
  a.d_emb = static_cast<std::uint32_t>(state.config.d_emb);
  a.scm_shape = state.config.scm_shape;
  a.tensors = flatten_params(state.params);
  write_archive(path, a, precision);
}

void load_checkpoint(const std::filesystem::path& path, ModelState& state) {
  const TensorArchive a = read_archive(path);
  if (a.d_emb != state.config.d_emb) {
    throw IoError("checkpoint d_emb " + std::to_string(a.d_emb) + " does not match config " +
                  std::to_string(state.config.d_emb));
  }
  if (!(a.scm_shape == state.config.scm_shape)) {
    throw IoError("checkpoint scm shape " + to_string(a.scm_shape) + " does not match config " +
                  to_string(state.config.scm_shape));
  }
  assign_params(state.params, a.tensors);
}

std::uint64_t checksum(const ModelParams& params) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const ParamGroup& g : params.groups) {
    for (const Tensor& t : g.tensors) {
      const auto* bytes = reinterpret_cast<const unsigned char*>(t.data.data());
      for (std::size_t i = 0; i < t.data.size() * sizeof(double); ++i) {
        h ^= bytes[i];
        h *= 0x100000001b3ULL;
      }
    }
  }
  return h;
}

}  // namespace slip
