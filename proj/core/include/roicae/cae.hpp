#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>

#include "roicae/optim.hpp"
#include "roicae/preprocess.hpp"
#include "roicae/rng.hpp"
#include "roicae/tape.hpp"
#include "roicae/tensor.hpp"

namespace roicae {

/// Encoder-bottleneck-decoder layout. Four stride-2 stages halve the spatial
/// dims, so input height/width must be divisible by 16.
struct CaeConfig {
    int height = 112;
    int width = 160;
    std::array<int, 4> channels{8, 16, 32, 64};
    int bottleneck = 64;
    int latent_dim = 128;

    int feat_h() const { return height / 16; }
    int feat_w() const { return width / 16; }
    void validate() const;
    bool operator==(const CaeConfig&) const = default;
};

/// Uniform +-1/sqrt(fan_in) init per layer, drawn from the seeded Rng.
ParamMap init_cae_params(const CaeConfig& cfg, Rng& rng);

/// Node handles of one forward build on a tape. Parameters enter the tape as
/// leaves so backward() accumulates their gradients.
struct CaeGraph {
    std::map<std::string, Tape::NodeId> params;
    Tape::NodeId input = -1;
    Tape::NodeId zmap = -1;
    Tape::NodeId z = -1;
    Tape::NodeId xhat = -1;
};

/// Build encoder (and optionally decoder) for a batch x: N x 1 x H x W.
CaeGraph cae_forward(Tape& tape, const CaeConfig& cfg, const ParamMap& params,
                     const Tensor& x, bool with_decoder = true);

// Forward-only conveniences (no gradient use).
struct EncodeResult {
    Tensor zmap;  // N x C x H/16 x W/16
    Tensor z;     // N x latent_dim
};
EncodeResult encode_latent(const CaeConfig& cfg, const ParamMap& params, const Tensor& x);
Tensor cae_decode(const CaeConfig& cfg, const ParamMap& params, const Tensor& z);

/// Mean of z_map over the feature cells covered by the ROI (canvas coords
/// scaled by 1/16; floor/ceil so partially overlapped cells count; nearest
/// cell if the box covers none). zmap: 1 x C x h x w.
std::vector<double> roi_pool_features(const Tensor& zmap, const RoiBox& roi);

struct Checkpoint {
    CaeConfig config;
    ParamMap params;
    std::string phase = "P1";  // "P1" or "P2"
    int epoch = 0;
    std::uint64_t seed = 0;
    bool has_loss_weights = false;
    double w_glob = 0.0, w_l1 = 0.0, w_edge = 0.0;
};

/// Versioned binary format: magic, JSON header (config + parameter
/// manifest), raw little-endian f64 blocks. Round-trips bit-exactly.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path, const std::optional<CaeConfig>& expected = std::nullopt);

}  // namespace roicae
