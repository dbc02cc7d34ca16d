#pragma once

#include <cstdint>
#include <memory>

#include <torch/torch.h>

#include "landcover/models.hpp"

namespace landcover::detail {

/// A feature extractor mapping a normalized N x 3 x S x S batch to N x F.
struct BackboneModule {
  torch::nn::AnyModule module;
  std::shared_ptr<torch::nn::Module> ptr;
  std::int64_t feature_dim = 0;
};

BackboneModule make_backbone(Backbone id);

}  // namespace landcover::detail
