#include "formant/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace formant {

using json = nlohmann::json;

void EncoderConfig::validate() const {
  if (channel_plan.size() < 2) throw std::invalid_argument("encoder channel plan needs at least two entries");
  if (channel_plan.front() != 1 || channel_plan.back() != 1) {
    throw std::invalid_argument("encoder channel plan must start and end with 1");
  }
  for (int c : channel_plan) {
    if (c <= 0) throw std::invalid_argument("encoder channel counts must be positive");
  }
  if (kernel <= 0 || kernel % 2 == 0) throw std::invalid_argument("encoder kernel must be odd and positive");
  if (dropout_rate < 0.0 || dropout_rate >= 1.0) throw std::invalid_argument("encoder dropout rate must be in [0, 1)");
}

void DecoderConfig::validate(int num_bins) const {
  if (bottleneck_plan.size() != 3) throw std::invalid_argument("decoder bottleneck plan must have three entries");
  if (bottleneck_plan.front() != num_bins || bottleneck_plan.back() != num_bins) {
    throw std::invalid_argument("decoder bottleneck must start and end at the bin count");
  }
  if (bottleneck_plan[1] <= 0) throw std::invalid_argument("decoder bottleneck width must be positive");
  if (time_kernel <= 0 || time_kernel % 2 == 0) throw std::invalid_argument("decoder time kernel must be odd and positive");
  if (bias_enabled) throw std::invalid_argument("decoder heads must not use bias terms");
  if (num_heads <= 0 || num_heads > num_bins) throw std::invalid_argument("decoder head count out of range");
  if (dropout_rate < 0.0 || dropout_rate >= 1.0) throw std::invalid_argument("decoder dropout rate must be in [0, 1)");
}

void ModelConfig::validate() const {
  bins.validate();
  encoder.validate();
  decoder.validate(bins.num_bins);
}

ModelConfig ModelConfig::for_bins(int num_bins) {
  ModelConfig cfg;
  cfg.bins.num_bins = num_bins;
  cfg.bins.max_hz = (num_bins - 1) * cfg.bins.bin_width;
  const int width = std::min(cfg.decoder.bottleneck_plan[1], num_bins);
  cfg.decoder.bottleneck_plan = {num_bins, width, num_bins};
  return cfg;
}

Eigen::MatrixXd mask_lower(const Eigen::MatrixXd& z, const std::vector<int>& lower_bins) {
  if (static_cast<Eigen::Index>(lower_bins.size()) != z.cols()) {
    throw std::invalid_argument("mask needs one bin index per frame");
  }
  for (int b : lower_bins) {
    if (b >= z.rows()) throw std::out_of_range("mask bin index out of range");
  }
  Eigen::MatrixXd out = z;
  mask_lower_inplace(out, lower_bins);
  return out;
}

template <typename S>
FormantNet<S>::FormantNet(ModelConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
  cfg_.validate();
  nn::Rng rng(seed);
  const auto& plan = cfg_.encoder.channel_plan;
  const int k = cfg_.encoder.kernel;
  const bool bn = cfg_.encoder.uses_batchnorm;
  const std::size_t layers = plan.size() - 1;
  for (std::size_t i = 0; i + 1 < layers; ++i) {
    const std::string name = "encoder.block" + std::to_string(i);
    EncoderBlock block{nn::Conv<S>(name + ".conv", plan[i], plan[i + 1], k, k, !bn), std::nullopt, std::nullopt};
    block.conv.init(rng, std::sqrt(2.0));
    if (bn) block.bn.emplace(name + ".bn", plan[i + 1], true);
    if (plan[i] != plan[i + 1]) {
      block.projection.emplace(name + ".proj", plan[i], plan[i + 1], 1, 1, false);
      block.projection->init(rng, 1.0);
    }
    blocks_.push_back(std::move(block));
  }
  final_.conv = nn::Conv<S>("encoder.out.conv", plan[layers - 1], plan[layers], k, k, true);
  final_.conv.init(rng, 1.0);
  if (plan[layers - 1] != plan[layers]) {
    final_.projection.emplace("encoder.out.proj", plan[layers - 1], plan[layers], 1, 1, false);
    final_.projection->init(rng, 1.0);
  }

  const auto& dec = cfg_.decoder;
  for (int h = 0; h < dec.num_heads; ++h) {
    const std::string name = "decoder.head" + std::to_string(h);
    Head head{nn::Conv<S>(name + ".expand", dec.bottleneck_plan[0], dec.bottleneck_plan[1], dec.time_kernel, 1, false),
              std::nullopt,
              nn::Conv<S>(name + ".restore", dec.bottleneck_plan[1], dec.bottleneck_plan[2], dec.time_kernel, 1, false)};
    head.expand.init(rng, std::sqrt(2.0));
    head.restore.init(rng, 1.0);
    // Scale-only normalization keeps the head free of additive offsets.
    if (dec.uses_batchnorm) head.bn.emplace(name + ".bn", dec.bottleneck_plan[1], false);
    heads_.push_back(std::move(head));
  }
}

template <typename S>
typename FormantNet<S>::Matrix FormantNet<S>::encode(const Matrix& input, const nn::GridLayout& layout) const {
  if (layout.bins != num_bins() || input.rows() != 1 || input.cols() != layout.positions()) {
    throw std::invalid_argument("encoder input shape does not match the model's bin count");
  }
  Matrix x = input;
  for (const auto& block : blocks_) {
    Matrix h = block.conv.forward(x, layout);
    if (block.bn) h = block.bn->infer(h);
    Matrix y = h.cwiseMax(S(0));
    if (block.projection) {
      y += block.projection->forward(x, layout);
    } else {
      y += x;
    }
    x = std::move(y);
  }
  Matrix z = final_.conv.forward(x, layout);
  z += final_.projection ? final_.projection->forward(x, layout) : x;
  return Eigen::Map<Matrix>(z.data(), num_bins(), layout.total_frames());
}

template <typename S>
typename FormantNet<S>::Matrix FormantNet<S>::encode_train(const Matrix& input, const nn::GridLayout& layout,
                                                           nn::Rng& rng, EncoderCache& cache) {
  if (layout.bins != num_bins() || input.rows() != 1 || input.cols() != layout.positions()) {
    throw std::invalid_argument("encoder input shape does not match the model's bin count");
  }
  cache.blocks.assign(blocks_.size(), {});
  Matrix x = input;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    auto& block = blocks_[i];
    auto& c = cache.blocks[i];
    Matrix h = block.conv.forward(x, layout);
    if (block.bn) h = block.bn->forward(h, &c.bn);
    c.gate = nn::relu_dropout_gate(h, cfg_.encoder.dropout_rate, nn::Mode::train, &rng);
    Matrix y = h.cwiseProduct(c.gate);
    if (block.projection) {
      y += block.projection->forward(x, layout);
    } else {
      y += x;
    }
    c.input = std::move(x);
    x = std::move(y);
  }
  Matrix z = final_.conv.forward(x, layout);
  z += final_.projection ? final_.projection->forward(x, layout) : x;
  cache.final_input = std::move(x);
  return Eigen::Map<Matrix>(z.data(), num_bins(), layout.total_frames());
}

template <typename S>
void FormantNet<S>::encode_backward(const Matrix& dlatent, const nn::GridLayout& layout, EncoderCache& cache) {
  Matrix dz = Eigen::Map<const Matrix>(dlatent.data(), 1, dlatent.size());
  Matrix dx = final_.conv.backward(dz, cache.final_input, layout);
  if (final_.projection) {
    dx += final_.projection->backward(dz, cache.final_input, layout);
  } else {
    dx += dz;
  }
  for (std::size_t i = blocks_.size(); i-- > 0;) {
    auto& block = blocks_[i];
    auto& c = cache.blocks[i];
    Matrix dskip = block.projection ? block.projection->backward(dx, c.input, layout) : dx;
    Matrix dh = dx.cwiseProduct(c.gate);
    if (block.bn) dh = block.bn->backward(dh, c.bn);
    dx = block.conv.backward(dh, c.input, layout);
    dx += dskip;
  }
}

template <typename S>
typename FormantNet<S>::Matrix FormantNet<S>::head_logits(int head, const Matrix& z_masked,
                                                          const nn::GridLayout& frames) const {
  const Head& h = heads_.at(head);
  Matrix hidden = h.expand.forward(z_masked, frames);
  if (h.bn) hidden = h.bn->infer(hidden);
  hidden = hidden.cwiseMax(S(0));
  Matrix logits = h.restore.forward(hidden, frames);
  logits += z_masked;
  return logits;
}

template <typename S>
typename FormantNet<S>::Matrix FormantNet<S>::head_logits_train(int head, const Matrix& z_masked,
                                                                const nn::GridLayout& frames, nn::Rng& rng,
                                                                HeadCache& cache) {
  Head& h = heads_.at(head);
  Matrix pre = h.expand.forward(z_masked, frames);
  if (h.bn) pre = h.bn->forward(pre, &cache.bn);
  cache.gate = nn::relu_dropout_gate(pre, cfg_.decoder.dropout_rate, nn::Mode::train, &rng);
  cache.hidden = pre.cwiseProduct(cache.gate);
  cache.input = z_masked;
  Matrix logits = h.restore.forward(cache.hidden, frames);
  logits += z_masked;
  return logits;
}

template <typename S>
typename FormantNet<S>::Matrix FormantNet<S>::head_backward(int head, const Matrix& dlogits,
                                                            const nn::GridLayout& frames, HeadCache& cache) {
  Head& h = heads_.at(head);
  Matrix dhidden = h.restore.backward(dlogits, cache.hidden, frames);
  dhidden = dhidden.cwiseProduct(cache.gate);
  if (h.bn) dhidden = h.bn->backward(dhidden, cache.bn);
  Matrix dz = h.expand.backward(dhidden, cache.input, frames);
  dz += dlogits;
  return dz;
}

template <typename S>
typename FormantNet<S>::Matrix FormantNet<S>::head_probabilities(int head, const Matrix& logits,
                                                                 const std::vector<int>& lower) const {
  std::vector<int> lo(lower.size());
  for (std::size_t i = 0; i < lower.size(); ++i) lo[i] = lower[i] + 1;
  const std::vector<int> hi(lower.size(), upper_bin(head));
  return nn::masked_softmax(logits, lo, hi);
}

template <typename S>
std::vector<nn::Parameter<S>*> FormantNet<S>::encoder_parameters() {
  std::vector<nn::Parameter<S>*> out;
  for (auto& block : blocks_) {
    block.conv.collect(out);
    if (block.bn) block.bn->collect(out);
    if (block.projection) block.projection->collect(out);
  }
  final_.conv.collect(out);
  if (final_.projection) final_.projection->collect(out);
  return out;
}

template <typename S>
std::vector<nn::Parameter<S>*> FormantNet<S>::head_parameters(int head) {
  std::vector<nn::Parameter<S>*> out;
  Head& h = heads_.at(head);
  h.expand.collect(out);
  if (h.bn) h.bn->collect(out);
  h.restore.collect(out);
  return out;
}

template <typename S>
std::vector<nn::Parameter<S>*> FormantNet<S>::parameters() {
  auto out = encoder_parameters();
  for (int h = 0; h < num_heads(); ++h) {
    auto head = head_parameters(h);
    out.insert(out.end(), head.begin(), head.end());
  }
  return out;
}

template <typename S>
std::vector<nn::Buffer<S>> FormantNet<S>::buffers() {
  std::vector<nn::Buffer<S>> out;
  for (auto& block : blocks_) {
    if (block.bn) block.bn->collect_buffers(out);
  }
  for (auto& head : heads_) {
    if (head.bn) head.bn->collect_buffers(out);
  }
  return out;
}

template <typename S>
std::size_t FormantNet<S>::parameter_count() const {
  std::size_t n = 0;
  for (auto* p : const_cast<FormantNet<S>*>(this)->parameters()) n += static_cast<std::size_t>(p->value.size());
  return n;
}

template <typename S>
void FormantNet<S>::zero_grad() {
  for (auto* p : parameters()) p->zero_grad();
}

template class FormantNet<float>;
template class FormantNet<double>;

Eigen::MatrixXd encode(const FormantModel& model, const Spectrogram& s) {
  if (s.num_bins() != model.num_bins()) {
    throw std::invalid_argument("spectrogram has " + std::to_string(s.num_bins()) + " bins, model expects " +
                                std::to_string(model.num_bins()));
  }
  const auto layout = nn::GridLayout::from_frames(model.num_bins(), {s.num_frames()});
  const nn::Matrix<float> input = s.values.cast<float>().reshaped(1, s.values.size());
  return model.encode(input, layout).cast<double>();
}

Eigen::MatrixXd decode_head(const FormantModel& model, int head, const Eigen::MatrixXd& z_masked,
                            const std::vector<int>& lower_bins) {
  if (head < 0 || head >= model.num_heads()) throw std::out_of_range("head index out of range");
  if (z_masked.rows() != model.num_bins() || static_cast<Eigen::Index>(lower_bins.size()) != z_masked.cols()) {
    throw std::invalid_argument("masked latent shape mismatch");
  }
  const auto frames = nn::GridLayout::from_frames(1, {static_cast<int>(z_masked.cols())});
  const nn::Matrix<float> z = z_masked.cast<float>();
  return model.head_probabilities(head, model.head_logits(head, z, frames), lower_bins).cast<double>();
}

// ---------------------------------------------------------------------------
// Checkpoint container

namespace {

// Conv weights are Cout x (taps * Cin) with tap-major columns; they are
// exported as [out, kernel_time, kernel_freq, in] row-major, which is the
// same byte order as the row-major matrix.
std::vector<std::int64_t> conv_shape(const std::string& name, Eigen::Index rows, Eigen::Index cols,
                                     const ModelConfig& cfg) {
  if (name.starts_with("encoder.") && name.ends_with(".conv.weight")) {
    const auto k = static_cast<std::int64_t>(cfg.encoder.kernel);
    return {rows, k, k, cols / (k * k)};
  }
  if (name.starts_with("decoder.") && name.ends_with(".weight") && !name.ends_with(".bn.weight")) {
    const auto k = static_cast<std::int64_t>(cfg.decoder.time_kernel);
    return {rows, k, 1, cols / k};
  }
  if (name.ends_with(".proj.weight")) return {rows, 1, 1, cols};
  return {rows};
}

template <typename M>
Tensor to_tensor(const M& m, std::vector<std::int64_t> shape) {
  Tensor t;
  t.shape = std::move(shape);
  const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> row = m;
  t.data.assign(row.data(), row.data() + row.size());
  return t;
}

void from_tensor(const Tensor& t, const std::vector<std::int64_t>& expected, nn::Matrix<float>& out,
                 const std::string& name) {
  if (t.shape != expected) {
    std::string got;
    std::string want;
    for (auto d : t.shape) got += std::to_string(d) + " ";
    for (auto d : expected) want += std::to_string(d) + " ";
    throw std::runtime_error("checkpoint tensor '" + name + "' has shape [ " + got + "], expected [ " + want + "]");
  }
  out = Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      t.data.data(), out.rows(), out.cols());
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  json header = json::object();
  std::uint64_t offset = 0;
  for (const auto& [name, tensor] : ckpt.tensors) {
    const std::int64_t count =
        std::accumulate(tensor.shape.begin(), tensor.shape.end(), std::int64_t{1}, std::multiplies<>());
    if (count != static_cast<std::int64_t>(tensor.data.size())) {
      throw std::invalid_argument("tensor '" + name + "' shape does not match its data");
    }
    const std::uint64_t bytes = tensor.data.size() * sizeof(float);
    header[name] = {{"dtype", "F32"}, {"shape", tensor.shape}, {"data_offsets", {offset, offset + bytes}}};
    offset += bytes;
  }
  if (!ckpt.metadata.empty()) header["__metadata__"] = ckpt.metadata;
  std::string text = header.dump();
  while (text.size() % 8 != 0) text.push_back(' ');

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  const std::uint64_t n = text.size();
  for (int i = 0; i < 8; ++i) out.put(static_cast<char>((n >> (8 * i)) & 0xff));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& [name, tensor] : ckpt.tensors) {
    static_assert(sizeof(float) == 4);
    out.write(reinterpret_cast<const char*>(tensor.data.data()),
              static_cast<std::streamsize>(tensor.data.size() * sizeof(float)));
  }
  if (!out) throw std::runtime_error("failed writing checkpoint " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  unsigned char len[8];
  in.read(reinterpret_cast<char*>(len), 8);
  if (!in) throw std::runtime_error(path.string() + ": truncated checkpoint header");
  std::uint64_t n = 0;
  for (int i = 7; i >= 0; --i) n = (n << 8) | len[i];
  if (n > (std::uint64_t{1} << 30)) throw std::runtime_error(path.string() + ": implausible header size");
  std::string text(n, '\0');
  in.read(text.data(), static_cast<std::streamsize>(n));
  if (!in) throw std::runtime_error(path.string() + ": truncated checkpoint header");
  const json header = json::parse(text);
  const std::streamoff data_start = 8 + static_cast<std::streamoff>(n);

  Checkpoint ckpt;
  for (const auto& [name, entry] : header.items()) {
    if (name == "__metadata__") {
      ckpt.metadata = entry.get<std::map<std::string, std::string>>();
      continue;
    }
    if (entry.at("dtype") != "F32") throw std::runtime_error("tensor '" + name + "' is not F32");
    Tensor t;
    t.shape = entry.at("shape").get<std::vector<std::int64_t>>();
    const auto offsets = entry.at("data_offsets").get<std::vector<std::uint64_t>>();
    if (offsets.size() != 2 || offsets[1] < offsets[0]) throw std::runtime_error("tensor '" + name + "' has bad offsets");
    t.data.resize((offsets[1] - offsets[0]) / sizeof(float));
    in.seekg(data_start + static_cast<std::streamoff>(offsets[0]));
    in.read(reinterpret_cast<char*>(t.data.data()), static_cast<std::streamsize>(offsets[1] - offsets[0]));
    if (!in) throw std::runtime_error(path.string() + ": truncated tensor '" + name + "'");
    const std::int64_t count = std::accumulate(t.shape.begin(), t.shape.end(), std::int64_t{1}, std::multiplies<>());
    if (count != static_cast<std::int64_t>(t.data.size())) {
      throw std::runtime_error("tensor '" + name + "' shape does not match its data");
    }
    ckpt.tensors.emplace(name, std::move(t));
  }
  return ckpt;
}

std::string encoder_config_to_json(const EncoderConfig& cfg) {
  return json{{"channel_plan", cfg.channel_plan},
              {"kernel", cfg.kernel},
              {"dropout_rate", cfg.dropout_rate},
              {"uses_batchnorm", cfg.uses_batchnorm}}
      .dump();
}

std::string decoder_config_to_json(const DecoderConfig& cfg) {
  return json{{"bottleneck_plan", cfg.bottleneck_plan},
              {"time_kernel", cfg.time_kernel},
              {"bias_enabled", cfg.bias_enabled},
              {"num_heads", cfg.num_heads},
              {"dropout_rate", cfg.dropout_rate},
              {"uses_batchnorm", cfg.uses_batchnorm}}
      .dump();
}

std::string bin_spec_to_json(const BinSpec& spec) {
  return json{{"bin_width", spec.bin_width}, {"num_bins", spec.num_bins}, {"max_hz", spec.max_hz}}.dump();
}

EncoderConfig encoder_config_from_json(const std::string& text) {
  const json j = json::parse(text);
  EncoderConfig cfg;
  cfg.channel_plan = j.at("channel_plan").get<std::vector<int>>();
  cfg.kernel = j.at("kernel").get<int>();
  cfg.dropout_rate = j.at("dropout_rate").get<double>();
  cfg.uses_batchnorm = j.at("uses_batchnorm").get<bool>();
  return cfg;
}

DecoderConfig decoder_config_from_json(const std::string& text) {
  const json j = json::parse(text);
  DecoderConfig cfg;
  cfg.bottleneck_plan = j.at("bottleneck_plan").get<std::vector<int>>();
  cfg.time_kernel = j.at("time_kernel").get<int>();
  cfg.bias_enabled = j.at("bias_enabled").get<bool>();
  cfg.num_heads = j.at("num_heads").get<int>();
  cfg.dropout_rate = j.at("dropout_rate").get<double>();
  cfg.uses_batchnorm = j.at("uses_batchnorm").get<bool>();
  return cfg;
}

BinSpec bin_spec_from_json(const std::string& text) {
  const json j = json::parse(text);
  return BinSpec{j.at("bin_width").get<double>(), j.at("num_bins").get<int>(), j.at("max_hz").get<double>()};
}

std::vector<std::pair<std::string, std::vector<std::int64_t>>> parameter_inventory(const FormantModel& model) {
  std::vector<std::pair<std::string, std::vector<std::int64_t>>> out;
  auto& m = const_cast<FormantModel&>(model);
  for (auto* p : m.parameters()) {
    out.emplace_back(p->name, conv_shape(p->name, p->value.rows(), p->value.cols(), model.config()));
  }
  return out;
}

Checkpoint model_to_checkpoint(const FormantModel& model) {
  Checkpoint ckpt;
  auto& m = const_cast<FormantModel&>(model);
  for (auto* p : m.parameters()) {
    ckpt.tensors[p->name] = to_tensor(p->value, conv_shape(p->name, p->value.rows(), p->value.cols(), model.config()));
  }
  for (const auto& b : m.buffers()) {
    ckpt.tensors[b.name] = to_tensor(*b.value, {b.value->rows()});
  }
  ckpt.metadata["format"] = "formant-checkpoint/1";
  ckpt.metadata["encoder_config"] = encoder_config_to_json(model.config().encoder);
  ckpt.metadata["decoder_config"] = decoder_config_to_json(model.config().decoder);
  ckpt.metadata["bin_spec"] = bin_spec_to_json(model.config().bins);
  return ckpt;
}

FormantModel model_from_checkpoint(const Checkpoint& ckpt) {
  auto meta = [&](const std::string& key) -> const std::string& {
    const auto it = ckpt.metadata.find(key);
    if (it == ckpt.metadata.end()) throw std::runtime_error("checkpoint metadata lacks '" + key + "'");
    return it->second;
  };
  ModelConfig cfg;
  cfg.encoder = encoder_config_from_json(meta("encoder_config"));
  cfg.decoder = decoder_config_from_json(meta("decoder_config"));
  cfg.bins = bin_spec_from_json(meta("bin_spec"));
  FormantModel model(cfg, 0);

  std::size_t consumed = 0;
  auto take = [&](const std::string& name, const std::vector<std::int64_t>& shape, nn::Matrix<float>& dst) {
    const auto it = ckpt.tensors.find(name);
    if (it == ckpt.tensors.end()) throw std::runtime_error("checkpoint is missing tensor '" + name + "'");
    from_tensor(it->second, shape, dst, name);
    ++consumed;
  };
  for (auto* p : model.parameters()) {
    take(p->name, conv_shape(p->name, p->value.rows(), p->value.cols(), cfg), p->value);
  }
  for (const auto& b : model.buffers()) take(b.name, {b.value->rows()}, *b.value);

  std::size_t model_tensors = 0;
  for (const auto& [name, t] : ckpt.tensors) {
    if (name.starts_with("encoder.") || name.starts_with("decoder.")) ++model_tensors;
  }
  if (model_tensors != consumed) throw std::runtime_error("checkpoint holds unexpected model tensors");
  return model;
}

void save_model(const std::filesystem::path& path, const FormantModel& model) {
  write_checkpoint(path, model_to_checkpoint(model));
}

FormantModel load_model(const std::filesystem::path& path) { return model_from_checkpoint(read_checkpoint(path)); }

}  // namespace formant
