#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wmhseg/array4.hpp"
#include "wmhseg/graph.hpp"
#include "wmhseg/parameter.hpp"

namespace wmhseg {

enum class BlockKind { Residual, Plain };

const char* to_string(BlockKind kind);
BlockKind block_kind_from_string(const std::string& s);

/// One resolution stage. Residual: relu?(skip(x) + conv3(relu(conv3(x)))),
/// where skip is a 1x1 projection or the identity. Plain: two conv3+relu.
struct ResidualBlockSpec {
    std::size_t in_channels = 1;
    std::size_t out_channels = 1;
    BlockKind kind = BlockKind::Residual;
    /// Use a 1x1 projection on the skip path. Required when channels differ.
    bool projection = true;
    bool post_add_relu = true;

    void validate() const;
};

/// Borrowed parameters of one block. proj_* are null when the skip is the identity.
struct BlockParameters {
    Parameter* conv1_w = nullptr;
    Parameter* conv1_b = nullptr;
    Parameter* conv2_w = nullptr;
    Parameter* conv2_b = nullptr;
    Parameter* proj_w = nullptr;
    Parameter* proj_b = nullptr;
};

/// Adds a block's parameters to a set under "<prefix>.conv1.w" etc. Values
/// are left at zero. The returned pointers stay valid until the set grows again.
BlockParameters add_block_parameters(ParameterSet& set, const std::string& prefix,
                                     const ResidualBlockSpec& spec);

/// Eager forward through a single block.
Array4 residual_block_forward(const Array4& x, const ResidualBlockSpec& spec,
                              const BlockParameters& params);
/// Taped forward through a single block.
NodeId residual_block_forward(Graph& graph, NodeId x, const ResidualBlockSpec& spec,
                              const BlockParameters& params);

/// Encoder/decoder layout. Encoder stage s has base_width * 2^s channels for
/// s < depth; the bottleneck has base_width * 2^depth.
struct NetworkSpec {
    std::string name = "resunet";
    std::size_t in_channels = 2;
    std::size_t base_width = 64;
    std::size_t depth = 4;
    BlockKind block = BlockKind::Residual;
    std::size_t out_channels = 1;
    bool post_add_relu = true;

    void validate() const;
    std::vector<std::size_t> stage_channels() const;
    std::size_t bottleneck_channels() const;
    std::size_t downsampling_factor() const { return std::size_t{1} << depth; }
    /// Block description for an encoder stage (0..depth-1), the bottleneck
    /// (stage == depth), or a decoder stage.
    ResidualBlockSpec encoder_block(std::size_t stage) const;
    ResidualBlockSpec decoder_block(std::size_t stage) const;

    std::string to_json() const;
    static NetworkSpec from_json(const std::string& text);

    bool operator==(const NetworkSpec&) const = default;
};

NetworkSpec build_resunet(std::size_t in_channels = 2, std::size_t base_width = 64,
                          std::size_t depth = 4);
/// Standard U-Net with plain double-conv stages; the ablation baseline.
NetworkSpec build_plain_unet(std::size_t in_channels = 2, std::size_t base_width = 64,
                             std::size_t depth = 4);
/// Plain U-Net with the last pooling stage removed, for white matter.
NetworkSpec build_trimmed_unet(std::size_t in_channels = 1, std::size_t base_width = 64,
                               std::size_t depth = 3);

/// Mirror-pads rows and columns at the bottom/right edge up to the next
/// multiple of `multiple`.
Array4 reflect_pad(const Array4& x, std::size_t multiple);
/// Keeps the top-left h x w window.
Array4 crop(const Array4& x, std::size_t h, std::size_t w);
/// Inverse of crop: places x in the top-left corner of a zero array.
Array4 embed(const Array4& x, std::size_t h, std::size_t w);

class Network {
public:
    /// Allocates every parameter and fills weights with He-normal values drawn
    /// from init_seed; biases start at zero. In residual blocks the second
    /// branch conv and the projection are scaled by 1/sqrt(2).
    Network(NetworkSpec spec, std::uint64_t init_seed);
    /// Adopts existing parameters; names and shapes must match `spec`.
    Network(NetworkSpec spec, ParameterSet params);

    Network(const Network& other);
    Network& operator=(const Network& other);
    Network(Network&&) = default;
    Network& operator=(Network&&) = default;

    const NetworkSpec& spec() const { return spec_; }
    ParameterSet& parameters() { return params_; }
    const ParameterSet& parameters() const { return params_; }

    struct Outputs {
        NodeId logits;
        NodeId probabilities;
    };
    /// Records the forward pass on a tape. Spatial dims must be divisible by
    /// the downsampling factor.
    Outputs forward(Graph& graph, NodeId input);

    /// Probability map for any spatial size; pads and crops as needed.
    Array4 predict(const Array4& batch) const;

private:
    void bind();

    NetworkSpec spec_;
    ParameterSet params_;
    std::vector<BlockParameters> encoder_;
    BlockParameters bottleneck_;
    std::vector<BlockParameters> decoder_;
    std::vector<std::pair<Parameter*, Parameter*>> upconv_;
    Parameter* head_w_ = nullptr;
    Parameter* head_b_ = nullptr;
};

/// Eager network evaluation with padding: probabilities in (0, 1).
Array4 network_forward(const Network& net, const Array4& batch);

}  // namespace wmhseg
