// Layer layouts follow the reference torchvision definitions so that weights
// exported from them map one-to-one onto these modules.

#include "backbones.hpp"

#include <algorithm>
#include <array>
#include <string>
#include <vector>

namespace landcover::detail {

namespace nn = torch::nn;

namespace {

nn::Conv2d conv(std::int64_t in, std::int64_t out, std::array<std::int64_t, 2> kernel, std::int64_t stride = 1,
                std::array<std::int64_t, 2> padding = {0, 0}, std::int64_t groups = 1, bool bias = false) {
  return nn::Conv2d(nn::Conv2dOptions(in, out, {kernel[0], kernel[1]})
                        .stride(stride)
                        .padding({padding[0], padding[1]})
                        .groups(groups)
                        .bias(bias));
}

nn::Conv2d conv(std::int64_t in, std::int64_t out, std::int64_t kernel, std::int64_t stride = 1,
                std::int64_t padding = 0, std::int64_t groups = 1, bool bias = false) {
  return conv(in, out, {kernel, kernel}, stride, {padding, padding}, groups, bias);
}

nn::BatchNorm2d batch_norm(std::int64_t channels, double eps = 1e-5, double momentum = 0.1) {
  return nn::BatchNorm2d(nn::BatchNorm2dOptions(channels).eps(eps).momentum(momentum));
}

void kaiming_init(nn::Module& root) {
  for (auto& m : root.modules(/*include_self=*/false)) {
    if (auto* c = m->as<nn::Conv2d>()) {
      nn::init::kaiming_normal_(c->weight, 0.0, torch::kFanOut, torch::kReLU);
      if (c->options.bias()) nn::init::zeros_(c->bias);
    } else if (auto* bn = m->as<nn::BatchNorm2d>()) {
      nn::init::ones_(bn->weight);
      nn::init::zeros_(bn->bias);
    }
  }
}

torch::Tensor global_pool(const torch::Tensor& x) {
  return torch::adaptive_avg_pool2d(x, {1, 1}).flatten(1);
}

// ---------------------------------------------------------------------------
// ResNet-50 / Wide ResNet-50-2

struct BottleneckImpl : nn::Module {
  static constexpr std::int64_t kExpansion = 4;

  BottleneckImpl(std::int64_t in, std::int64_t planes, std::int64_t stride, std::int64_t base_width) {
    std::int64_t width = planes * base_width / 64;
    conv1 = register_module("conv1", conv(in, width, 1));
    bn1 = register_module("bn1", batch_norm(width));
    conv2 = register_module("conv2", conv(width, width, 3, stride, 1));
    bn2 = register_module("bn2", batch_norm(width));
    conv3 = register_module("conv3", conv(width, planes * kExpansion, 1));
    bn3 = register_module("bn3", batch_norm(planes * kExpansion));
    if (stride != 1 || in != planes * kExpansion) {
      downsample = register_module(
          "downsample", nn::Sequential(conv(in, planes * kExpansion, 1, stride), batch_norm(planes * kExpansion)));
    }
  }

  torch::Tensor forward(const torch::Tensor& x) {
    auto out = torch::relu(bn1(conv1(x)));
    out = torch::relu(bn2(conv2(out)));
    out = bn3(conv3(out));
    auto identity = downsample ? downsample->forward(x) : x;
    return torch::relu(out + identity);
  }

  nn::Conv2d conv1{nullptr}, conv2{nullptr}, conv3{nullptr};
  nn::BatchNorm2d bn1{nullptr}, bn2{nullptr}, bn3{nullptr};
  nn::Sequential downsample{nullptr};
};
TORCH_MODULE(Bottleneck);

struct ResNetImpl : nn::Module {
  explicit ResNetImpl(std::int64_t base_width) {
    conv1 = register_module("conv1", conv(3, 64, 7, 2, 3));
    bn1 = register_module("bn1", batch_norm(64));
    std::int64_t in = 64;
    const std::array<std::int64_t, 4> blocks{3, 4, 6, 3};
    const std::array<std::int64_t, 4> planes{64, 128, 256, 512};
    for (std::size_t stage = 0; stage < 4; ++stage) {
      nn::Sequential layer;
      for (std::int64_t b = 0; b < blocks[stage]; ++b) {
        std::int64_t stride = (b == 0 && stage > 0) ? 2 : 1;
        layer->push_back(Bottleneck(in, planes[stage], stride, base_width));
        in = planes[stage] * BottleneckImpl::kExpansion;
      }
      layers.push_back(register_module("layer" + std::to_string(stage + 1), layer));
    }
    kaiming_init(*this);
  }

  torch::Tensor forward(const torch::Tensor& x) {
    auto out = torch::relu(bn1(conv1(x)));
    out = torch::max_pool2d(out, 3, 2, 1);
    for (auto& layer : layers) out = layer->forward(out);
    return global_pool(out);
  }

  nn::Conv2d conv1{nullptr};
  nn::BatchNorm2d bn1{nullptr};
  std::vector<nn::Sequential> layers;
};
TORCH_MODULE(ResNet);

// ---------------------------------------------------------------------------
// DenseNet-201

struct DenseLayerImpl : nn::Module {
  DenseLayerImpl(std::int64_t in, std::int64_t growth, std::int64_t bn_size) {
    norm1 = register_module("norm1", batch_norm(in));
    conv1 = register_module("conv1", conv(in, bn_size * growth, 1));
    norm2 = register_module("norm2", batch_norm(bn_size * growth));
    conv2 = register_module("conv2", conv(bn_size * growth, growth, 3, 1, 1));
  }

  torch::Tensor forward(const torch::Tensor& x) {
    auto out = conv1(torch::relu(norm1(x)));
    out = conv2(torch::relu(norm2(out)));
    return torch::cat({x, out}, 1);
  }

  nn::BatchNorm2d norm1{nullptr}, norm2{nullptr};
  nn::Conv2d conv1{nullptr}, conv2{nullptr};
};
TORCH_MODULE(DenseLayer);

struct DenseBlockImpl : nn::Module {
  DenseBlockImpl(std::int64_t in, std::int64_t layers, std::int64_t growth, std::int64_t bn_size) {
    for (std::int64_t l = 0; l < layers; ++l) {
      blocks.push_back(register_module("denselayer" + std::to_string(l + 1), DenseLayer(in + l * growth, growth, bn_size)));
    }
  }
  torch::Tensor forward(torch::Tensor x) {
    for (auto& layer : blocks) x = layer->forward(x);
    return x;
  }
  std::vector<DenseLayer> blocks;
};
TORCH_MODULE(DenseBlock);

struct TransitionImpl : nn::Module {
  TransitionImpl(std::int64_t in, std::int64_t out) {
    norm = register_module("norm", batch_norm(in));
    conv_ = register_module("conv", conv(in, out, 1));
  }
  torch::Tensor forward(const torch::Tensor& x) {
    return torch::avg_pool2d(conv_(torch::relu(norm(x))), 2, 2);
  }
  nn::BatchNorm2d norm{nullptr};
  nn::Conv2d conv_{nullptr};
};
TORCH_MODULE(Transition);

struct DenseNetImpl : nn::Module {
  static constexpr std::int64_t kGrowth = 32;
  static constexpr std::int64_t kBnSize = 4;

  DenseNetImpl() {
    features->push_back("conv0", conv(3, 64, 7, 2, 3));
    features->push_back("norm0", batch_norm(64));
    features->push_back("relu0", nn::ReLU());
    features->push_back("pool0", nn::MaxPool2d(nn::MaxPool2dOptions(3).stride(2).padding(1)));
    std::int64_t channels = 64;
    const std::array<std::int64_t, 4> config{6, 12, 48, 32};
    for (std::size_t i = 0; i < config.size(); ++i) {
      DenseBlock block(channels, config[i], kGrowth, kBnSize);
      channels += config[i] * kGrowth;
      features->push_back("denseblock" + std::to_string(i + 1), block);
      if (i + 1 != config.size()) {
        features->push_back("transition" + std::to_string(i + 1), Transition(channels, channels / 2));
        channels /= 2;
      }
    }
    features->push_back("norm5", batch_norm(channels));
    out_features = channels;
    register_module("features", features);
    kaiming_init(*this);
  }

  torch::Tensor forward(const torch::Tensor& x) { return global_pool(torch::relu(features->forward(x))); }

  nn::Sequential features;
  std::int64_t out_features = 0;
};
TORCH_MODULE(DenseNet);

// ---------------------------------------------------------------------------
// MobileNet-V3 (large)

std::int64_t make_divisible(double v, std::int64_t divisor = 8) {
  auto new_v = std::max(divisor, static_cast<std::int64_t>(v + divisor / 2.0) / divisor * divisor);
  if (static_cast<double>(new_v) < 0.9 * v) new_v += divisor;
  return new_v;
}

enum class Act { Relu, Hardswish, None };

torch::Tensor activate(const torch::Tensor& x, Act act) {
  switch (act) {
    case Act::Relu: return torch::relu(x);
    case Act::Hardswish: return torch::hardswish(x);
    case Act::None: return x;
  }
  return x;
}

struct ConvBnActImpl : nn::Module {
  ConvBnActImpl(std::int64_t in, std::int64_t out, std::int64_t kernel, std::int64_t stride, std::int64_t groups,
                Act act)
      : act(act) {
    conv_ = register_module("0", conv(in, out, kernel, stride, (kernel - 1) / 2, groups));
    bn = register_module("1", batch_norm(out, 0.001, 0.01));
  }
  torch::Tensor forward(const torch::Tensor& x) { return activate(bn(conv_(x)), act); }
  Act act;
  nn::Conv2d conv_{nullptr};
  nn::BatchNorm2d bn{nullptr};
};
TORCH_MODULE(ConvBnAct);

struct SqueezeExcitationImpl : nn::Module {
  SqueezeExcitationImpl(std::int64_t channels, std::int64_t squeeze) {
    fc1 = register_module("fc1", conv(channels, squeeze, 1, 1, 0, 1, true));
    fc2 = register_module("fc2", conv(squeeze, channels, 1, 1, 0, 1, true));
  }
  torch::Tensor forward(const torch::Tensor& x) {
    auto scale = torch::adaptive_avg_pool2d(x, {1, 1});
    scale = torch::hardsigmoid(fc2(torch::relu(fc1(scale))));
    return x * scale;
  }
  nn::Conv2d fc1{nullptr}, fc2{nullptr};
};
TORCH_MODULE(SqueezeExcitation);

struct InvertedResidualConfig {
  std::int64_t in, kernel, expanded, out;
  bool use_se;
  Act act;
  std::int64_t stride;
};

struct InvertedResidualImpl : nn::Module {
  explicit InvertedResidualImpl(const InvertedResidualConfig& c)
      : use_residual(c.stride == 1 && c.in == c.out) {
    if (c.expanded != c.in) block->push_back(ConvBnAct(c.in, c.expanded, 1, 1, 1, c.act));
    block->push_back(ConvBnAct(c.expanded, c.expanded, c.kernel, c.stride, c.expanded, c.act));
    if (c.use_se) block->push_back(SqueezeExcitation(c.expanded, make_divisible(c.expanded / 4.0)));
    block->push_back(ConvBnAct(c.expanded, c.out, 1, 1, 1, Act::None));
    register_module("block", block);
  }
  torch::Tensor forward(const torch::Tensor& x) {
    auto out = block->forward(x);
    return use_residual ? out + x : out;
  }
  bool use_residual;
  nn::Sequential block;
};
TORCH_MODULE(InvertedResidual);

struct MobileNetV3Impl : nn::Module {
  static constexpr std::int64_t kLastChannel = 1280;

  MobileNetV3Impl() {
    constexpr Act RE = Act::Relu;
    constexpr Act HS = Act::Hardswish;
    const std::vector<InvertedResidualConfig> settings{
        {16, 3, 16, 16, false, RE, 1},    {16, 3, 64, 24, false, RE, 2},    {24, 3, 72, 24, false, RE, 1},
        {24, 5, 72, 40, true, RE, 2},     {40, 5, 120, 40, true, RE, 1},    {40, 5, 120, 40, true, RE, 1},
        {40, 3, 240, 80, false, HS, 2},   {80, 3, 200, 80, false, HS, 1},   {80, 3, 184, 80, false, HS, 1},
        {80, 3, 184, 80, false, HS, 1},   {80, 3, 480, 112, true, HS, 1},   {112, 3, 672, 112, true, HS, 1},
        {112, 5, 672, 160, true, HS, 2},  {160, 5, 960, 160, true, HS, 1},  {160, 5, 960, 160, true, HS, 1},
    };
    features->push_back(ConvBnAct(3, 16, 3, 2, 1, HS));
    for (const auto& s : settings) features->push_back(InvertedResidual(s));
    features->push_back(ConvBnAct(160, 960, 1, 1, 1, HS));
    register_module("features", features);
    // First classifier layer belongs to the feature extractor; only the last
    // linear layer is replaced by the multi-label head.
    hidden = register_module("hidden", nn::Linear(960, kLastChannel));
    kaiming_init(*this);
  }

  torch::Tensor forward(const torch::Tensor& x) {
    auto pooled = global_pool(features->forward(x));
    return torch::hardswish(hidden(pooled));
  }

  nn::Sequential features;
  nn::Linear hidden{nullptr};
};
TORCH_MODULE(MobileNetV3);

// ---------------------------------------------------------------------------
// Inception-V3 (auxiliary classifier omitted; it only shapes the training loss)

using Pair = std::array<std::int64_t, 2>;

struct BasicConvImpl : nn::Module {
  BasicConvImpl(std::int64_t in, std::int64_t out, Pair kernel, std::int64_t stride = 1, Pair padding = {0, 0}) {
    conv_ = register_module("conv", conv(in, out, kernel, stride, padding));
    bn = register_module("bn", batch_norm(out, 0.001));
  }
  BasicConvImpl(std::int64_t in, std::int64_t out, std::int64_t kernel, std::int64_t stride = 1,
                std::int64_t padding = 0)
      : BasicConvImpl(in, out, {kernel, kernel}, stride, {padding, padding}) {}
  torch::Tensor forward(const torch::Tensor& x) { return torch::relu(bn(conv_(x))); }
  nn::Conv2d conv_{nullptr};
  nn::BatchNorm2d bn{nullptr};
};
TORCH_MODULE(BasicConv);

torch::Tensor avg3(const torch::Tensor& x) { return torch::avg_pool2d(x, 3, 1, 1); }

struct InceptionAImpl : nn::Module {
  InceptionAImpl(std::int64_t in, std::int64_t pool_features)
      : b1x1(register_module("branch1x1", BasicConv(in, 64, 1))),
        b5x5_1(register_module("branch5x5_1", BasicConv(in, 48, 1))),
        b5x5_2(register_module("branch5x5_2", BasicConv(48, 64, 5, 1, 2))),
        b3x3dbl_1(register_module("branch3x3dbl_1", BasicConv(in, 64, 1))),
        b3x3dbl_2(register_module("branch3x3dbl_2", BasicConv(64, 96, 3, 1, 1))),
        b3x3dbl_3(register_module("branch3x3dbl_3", BasicConv(96, 96, 3, 1, 1))),
        bpool(register_module("branch_pool", BasicConv(in, pool_features, 1))) {}

  torch::Tensor forward(const torch::Tensor& x) {
    return torch::cat({b1x1(x), b5x5_2(b5x5_1(x)), b3x3dbl_3(b3x3dbl_2(b3x3dbl_1(x))), bpool(avg3(x))}, 1);
  }
  BasicConv b1x1, b5x5_1, b5x5_2, b3x3dbl_1, b3x3dbl_2, b3x3dbl_3, bpool;
};
TORCH_MODULE(InceptionA);

struct InceptionBImpl : nn::Module {
  explicit InceptionBImpl(std::int64_t in)
      : b3x3(register_module("branch3x3", BasicConv(in, 384, 3, 2))),
        b3x3dbl_1(register_module("branch3x3dbl_1", BasicConv(in, 64, 1))),
        b3x3dbl_2(register_module("branch3x3dbl_2", BasicConv(64, 96, 3, 1, 1))),
        b3x3dbl_3(register_module("branch3x3dbl_3", BasicConv(96, 96, 3, 2))) {}

  torch::Tensor forward(const torch::Tensor& x) {
    return torch::cat({b3x3(x), b3x3dbl_3(b3x3dbl_2(b3x3dbl_1(x))), torch::max_pool2d(x, 3, 2)}, 1);
  }
  BasicConv b3x3, b3x3dbl_1, b3x3dbl_2, b3x3dbl_3;
};
TORCH_MODULE(InceptionB);

struct InceptionCImpl : nn::Module {
  InceptionCImpl(std::int64_t in, std::int64_t c7)
      : b1x1(register_module("branch1x1", BasicConv(in, 192, 1))),
        b7x7_1(register_module("branch7x7_1", BasicConv(in, c7, 1))),
        b7x7_2(register_module("branch7x7_2", BasicConv(c7, c7, Pair{1, 7}, 1, Pair{0, 3}))),
        b7x7_3(register_module("branch7x7_3", BasicConv(c7, 192, Pair{7, 1}, 1, Pair{3, 0}))),
        b7x7dbl_1(register_module("branch7x7dbl_1", BasicConv(in, c7, 1))),
        b7x7dbl_2(register_module("branch7x7dbl_2", BasicConv(c7, c7, Pair{7, 1}, 1, Pair{3, 0}))),
        b7x7dbl_3(register_module("branch7x7dbl_3", BasicConv(c7, c7, Pair{1, 7}, 1, Pair{0, 3}))),
        b7x7dbl_4(register_module("branch7x7dbl_4", BasicConv(c7, c7, Pair{7, 1}, 1, Pair{3, 0}))),
        b7x7dbl_5(register_module("branch7x7dbl_5", BasicConv(c7, 192, Pair{1, 7}, 1, Pair{0, 3}))),
        bpool(register_module("branch_pool", BasicConv(in, 192, 1))) {}

  torch::Tensor forward(const torch::Tensor& x) {
    auto b7 = b7x7_3(b7x7_2(b7x7_1(x)));
    auto b7dbl = b7x7dbl_5(b7x7dbl_4(b7x7dbl_3(b7x7dbl_2(b7x7dbl_1(x)))));
    return torch::cat({b1x1(x), b7, b7dbl, bpool(avg3(x))}, 1);
  }
  BasicConv b1x1, b7x7_1, b7x7_2, b7x7_3, b7x7dbl_1, b7x7dbl_2, b7x7dbl_3, b7x7dbl_4, b7x7dbl_5, bpool;
};
TORCH_MODULE(InceptionC);

struct InceptionDImpl : nn::Module {
  explicit InceptionDImpl(std::int64_t in)
      : b3x3_1(register_module("branch3x3_1", BasicConv(in, 192, 1))),
        b3x3_2(register_module("branch3x3_2", BasicConv(192, 320, 3, 2))),
        b7x7x3_1(register_module("branch7x7x3_1", BasicConv(in, 192, 1))),
        b7x7x3_2(register_module("branch7x7x3_2", BasicConv(192, 192, Pair{1, 7}, 1, Pair{0, 3}))),
        b7x7x3_3(register_module("branch7x7x3_3", BasicConv(192, 192, Pair{7, 1}, 1, Pair{3, 0}))),
        b7x7x3_4(register_module("branch7x7x3_4", BasicConv(192, 192, 3, 2))) {}

  torch::Tensor forward(const torch::Tensor& x) {
    return torch::cat(
        {b3x3_2(b3x3_1(x)), b7x7x3_4(b7x7x3_3(b7x7x3_2(b7x7x3_1(x)))), torch::max_pool2d(x, 3, 2)}, 1);
  }
  BasicConv b3x3_1, b3x3_2, b7x7x3_1, b7x7x3_2, b7x7x3_3, b7x7x3_4;
};
TORCH_MODULE(InceptionD);

struct InceptionEImpl : nn::Module {
  explicit InceptionEImpl(std::int64_t in)
      : b1x1(register_module("branch1x1", BasicConv(in, 320, 1))),
        b3x3_1(register_module("branch3x3_1", BasicConv(in, 384, 1))),
        b3x3_2a(register_module("branch3x3_2a", BasicConv(384, 384, Pair{1, 3}, 1, Pair{0, 1}))),
        b3x3_2b(register_module("branch3x3_2b", BasicConv(384, 384, Pair{3, 1}, 1, Pair{1, 0}))),
        b3x3dbl_1(register_module("branch3x3dbl_1", BasicConv(in, 448, 1))),
        b3x3dbl_2(register_module("branch3x3dbl_2", BasicConv(448, 384, 3, 1, 1))),
        b3x3dbl_3a(register_module("branch3x3dbl_3a", BasicConv(384, 384, Pair{1, 3}, 1, Pair{0, 1}))),
        b3x3dbl_3b(register_module("branch3x3dbl_3b", BasicConv(384, 384, Pair{3, 1}, 1, Pair{1, 0}))),
        bpool(register_module("branch_pool", BasicConv(in, 192, 1))) {}

  torch::Tensor forward(const torch::Tensor& x) {
    auto b3 = b3x3_1(x);
    auto b3dbl = b3x3dbl_2(b3x3dbl_1(x));
    return torch::cat({b1x1(x), torch::cat({b3x3_2a(b3), b3x3_2b(b3)}, 1),
                       torch::cat({b3x3dbl_3a(b3dbl), b3x3dbl_3b(b3dbl)}, 1), bpool(avg3(x))},
                      1);
  }
  BasicConv b1x1, b3x3_1, b3x3_2a, b3x3_2b, b3x3dbl_1, b3x3dbl_2, b3x3dbl_3a, b3x3dbl_3b, bpool;
};
TORCH_MODULE(InceptionE);

struct InceptionV3Impl : nn::Module {
  InceptionV3Impl() {
    stem->push_back("Conv2d_1a_3x3", BasicConv(3, 32, 3, 2));
    stem->push_back("Conv2d_2a_3x3", BasicConv(32, 32, 3));
    stem->push_back("Conv2d_2b_3x3", BasicConv(32, 64, 3, 1, 1));
    stem->push_back("maxpool1", nn::MaxPool2d(nn::MaxPool2dOptions(3).stride(2)));
    stem->push_back("Conv2d_3b_1x1", BasicConv(64, 80, 1));
    stem->push_back("Conv2d_4a_3x3", BasicConv(80, 192, 3));
    stem->push_back("maxpool2", nn::MaxPool2d(nn::MaxPool2dOptions(3).stride(2)));
    stem->push_back("Mixed_5b", InceptionA(192, 32));
    stem->push_back("Mixed_5c", InceptionA(256, 64));
    stem->push_back("Mixed_5d", InceptionA(288, 64));
    stem->push_back("Mixed_6a", InceptionB(288));
    stem->push_back("Mixed_6b", InceptionC(768, 128));
    stem->push_back("Mixed_6c", InceptionC(768, 160));
    stem->push_back("Mixed_6d", InceptionC(768, 160));
    stem->push_back("Mixed_6e", InceptionC(768, 192));
    stem->push_back("Mixed_7a", InceptionD(768));
    stem->push_back("Mixed_7b", InceptionE(1280));
    stem->push_back("Mixed_7c", InceptionE(2048));
    register_module("layers", stem);
    kaiming_init(*this);
  }

  torch::Tensor forward(const torch::Tensor& x) { return global_pool(stem->forward(x)); }

  nn::Sequential stem;
};
TORCH_MODULE(InceptionV3);

// ---------------------------------------------------------------------------
// tiny_cnn: three conv/BN/ReLU/max-pool blocks and global average pooling.

struct TinyCnnImpl : nn::Module {
  static constexpr std::int64_t kFeatures = 64;

  TinyCnnImpl() {
    std::int64_t in = 3;
    for (std::int64_t out : {16, 32, 64}) {
      blocks->push_back(conv(in, out, 3, 1, 1));
      blocks->push_back(batch_norm(out));
      blocks->push_back(nn::ReLU());
      blocks->push_back(nn::MaxPool2d(nn::MaxPool2dOptions(2).stride(2)));
      in = out;
    }
    register_module("blocks", blocks);
    kaiming_init(*this);
  }

  torch::Tensor forward(const torch::Tensor& x) { return global_pool(blocks->forward(x)); }

  nn::Sequential blocks;
};
TORCH_MODULE(TinyCnn);

template <typename Holder>
BackboneModule wrap(Holder holder, std::int64_t features) {
  auto ptr = holder.ptr();
  return {nn::AnyModule(std::move(holder)), ptr, features};
}

}  // namespace

BackboneModule make_backbone(Backbone id) {
  switch (id) {
    case Backbone::ResNet50: return wrap(ResNet(64), 2048);
    case Backbone::WideResNet50: return wrap(ResNet(128), 2048);
    case Backbone::DenseNet201: {
      DenseNet net;
      auto features = net->out_features;
      return wrap(std::move(net), features);
    }
    case Backbone::MobileNetV3: return wrap(MobileNetV3(), MobileNetV3Impl::kLastChannel);
    case Backbone::InceptionV3: return wrap(InceptionV3(), 2048);
    case Backbone::TinyCnn: return wrap(TinyCnn(), TinyCnnImpl::kFeatures);
  }
  throw std::logic_error("unhandled backbone");
}

}  // namespace landcover::detail
