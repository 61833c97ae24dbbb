#include "roicae/cae.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace roicae {

namespace {
constexpr double kLeakyAlpha = 0.1;

Tensor uniform_tensor(std::vector<int> shape, double bound, Rng& rng) {
    Tensor t(std::move(shape));
    for (double& v : t.data) v = rng.uniform(-bound, bound);
    return t;
}
}  // namespace

void CaeConfig::validate() const {
    if (height < 16 || width < 16 || height % 16 != 0 || width % 16 != 0)
        throw std::invalid_argument("cae: input dims must be >=16 and divisible by 16");
    if (latent_dim < 8) throw std::invalid_argument("cae: latent dim must be >= 8");
    for (int c : channels)
        if (c < 1) throw std::invalid_argument("cae: channel width must be positive");
    if (bottleneck < 1) throw std::invalid_argument("cae: bottleneck width must be positive");
}

ParamMap init_cae_params(const CaeConfig& cfg, Rng& rng) {
    cfg.validate();
    ParamMap p;
    auto add_conv = [&](const std::string& name, int out_c, int in_c, int k) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(in_c) * k * k);
        p[name + ".w"] = uniform_tensor({out_c, in_c, k, k}, bound, rng);
        p[name + ".b"] = uniform_tensor({out_c}, bound, rng);
    };
    auto add_convt = [&](const std::string& name, int in_c, int out_c, int k) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(in_c) * k * k);
        p[name + ".w"] = uniform_tensor({in_c, out_c, k, k}, bound, rng);
        p[name + ".b"] = uniform_tensor({out_c}, bound, rng);
    };
    auto add_linear = [&](const std::string& name, int out_d, int in_d) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(in_d));
        p[name + ".w"] = uniform_tensor({out_d, in_d}, bound, rng);
        p[name + ".b"] = uniform_tensor({out_d}, bound, rng);
    };

    add_conv("enc1", cfg.channels[0], 1, 4);
    add_conv("enc2", cfg.channels[1], cfg.channels[0], 4);
    add_conv("enc3", cfg.channels[2], cfg.channels[1], 4);
    add_conv("enc4", cfg.channels[3], cfg.channels[2], 4);
    add_conv("bott", cfg.bottleneck, cfg.channels[3], 1);
    add_linear("proj", cfg.latent_dim, cfg.bottleneck);
    add_linear("unproj", cfg.bottleneck * cfg.feat_h() * cfg.feat_w(), cfg.latent_dim);
    add_convt("dec1", cfg.bottleneck, cfg.channels[3], 4);
    add_convt("dec2", cfg.channels[3], cfg.channels[2], 4);
    add_convt("dec3", cfg.channels[2], cfg.channels[1], 4);
    add_convt("dec4", cfg.channels[1], 1, 4);
    return p;
}

CaeGraph cae_forward(Tape& tape, const CaeConfig& cfg, const ParamMap& params,
                     const Tensor& x, bool with_decoder) {
    cfg.validate();
    if (x.ndim() != 4 || x.dim(1) != 1 || x.dim(2) != cfg.height || x.dim(3) != cfg.width)
        throw std::invalid_argument("cae: input shape " + shape_to_string(x.shape) +
                                    " does not match config " + std::to_string(cfg.height) + "x" +
                                    std::to_string(cfg.width));
    CaeGraph g;
    for (const auto& [name, t] : params) g.params[name] = tape.leaf(t, name);
    auto pn = [&](const std::string& n) {
        auto it = g.params.find(n);
        if (it == g.params.end()) throw std::invalid_argument("cae: missing parameter " + n);
        return it->second;
    };

    g.input = tape.leaf(x, "input");
    Tape::NodeId h = g.input;
    for (int s = 1; s <= 4; ++s) {
        const std::string n = "enc" + std::to_string(s);
        h = tape.leaky_relu(tape.conv2d(h, pn(n + ".w"), pn(n + ".b"), 2, 1), kLeakyAlpha);
    }
    g.zmap = tape.leaky_relu(tape.conv2d(h, pn("bott.w"), pn("bott.b"), 1, 0), kLeakyAlpha);
    g.z = tape.linear(tape.global_avg_pool(g.zmap), pn("proj.w"), pn("proj.b"));

    if (with_decoder) {
        const int N = x.dim(0);
        Tape::NodeId u = tape.linear(g.z, pn("unproj.w"), pn("unproj.b"));
        u = tape.reshape(u, {N, cfg.bottleneck, cfg.feat_h(), cfg.feat_w()});
        u = tape.leaky_relu(tape.conv_transpose2d(u, pn("dec1.w"), pn("dec1.b"), 2, 1), kLeakyAlpha);
        u = tape.leaky_relu(tape.conv_transpose2d(u, pn("dec2.w"), pn("dec2.b"), 2, 1), kLeakyAlpha);
        u = tape.leaky_relu(tape.conv_transpose2d(u, pn("dec3.w"), pn("dec3.b"), 2, 1), kLeakyAlpha);
        g.xhat = tape.sigmoid(tape.conv_transpose2d(u, pn("dec4.w"), pn("dec4.b"), 2, 1));
    }
    return g;
}

EncodeResult encode_latent(const CaeConfig& cfg, const ParamMap& params, const Tensor& x) {
    Tape tape;
    CaeGraph g = cae_forward(tape, cfg, params, x, /*with_decoder=*/false);
    return {tape.val(g.zmap), tape.val(g.z)};
}

Tensor cae_decode(const CaeConfig& cfg, const ParamMap& params, const Tensor& z) {
    cfg.validate();
    if (z.ndim() != 2 || z.dim(1) != cfg.latent_dim)
        throw std::invalid_argument("cae_decode: latent shape " + shape_to_string(z.shape) +
                                    " does not match latent dim " + std::to_string(cfg.latent_dim));
    Tape tape;
    std::map<std::string, Tape::NodeId> pn;
    for (const auto& [name, t] : params) pn[name] = tape.leaf(t, name);
    const int N = z.dim(0);
    Tape::NodeId u = tape.linear(tape.leaf(z, "z"), pn.at("unproj.w"), pn.at("unproj.b"));
    u = tape.reshape(u, {N, cfg.bottleneck, cfg.feat_h(), cfg.feat_w()});
    u = tape.leaky_relu(tape.conv_transpose2d(u, pn.at("dec1.w"), pn.at("dec1.b"), 2, 1), kLeakyAlpha);
    u = tape.leaky_relu(tape.conv_transpose2d(u, pn.at("dec2.w"), pn.at("dec2.b"), 2, 1), kLeakyAlpha);
    u = tape.leaky_relu(tape.conv_transpose2d(u, pn.at("dec3.w"), pn.at("dec3.b"), 2, 1), kLeakyAlpha);
    u = tape.sigmoid(tape.conv_transpose2d(u, pn.at("dec4.w"), pn.at("dec4.b"), 2, 1));
    return tape.val(u);
}

std::vector<double> roi_pool_features(const Tensor& zmap, const RoiBox& roi) {
    if (zmap.ndim() != 4 || zmap.dim(0) != 1)
        throw std::invalid_argument("roi_pool_features: expected 1 x C x h x w feature map");
    const int C = zmap.dim(1), h = zmap.dim(2), w = zmap.dim(3);
    int cx1 = static_cast<int>(std::floor(roi.x1 / 16.0));
    int cy1 = static_cast<int>(std::floor(roi.y1 / 16.0));
    int cx2 = static_cast<int>(std::ceil(roi.x2 / 16.0));
    int cy2 = static_cast<int>(std::ceil(roi.y2 / 16.0));
    cx1 = std::clamp(cx1, 0, w - 1);
    cy1 = std::clamp(cy1, 0, h - 1);
    cx2 = std::clamp(cx2, cx1 + 1, w);
    cy2 = std::clamp(cy2, cy1 + 1, h);
    const double inv = 1.0 / (static_cast<double>(cx2 - cx1) * (cy2 - cy1));
    std::vector<double> out(static_cast<std::size_t>(C), 0.0);
    for (int c = 0; c < C; ++c) {
        double s = 0.0;
        for (int yy = cy1; yy < cy2; ++yy)
            for (int xx = cx1; xx < cx2; ++xx) s += zmap.at4(0, c, yy, xx);
        out[static_cast<std::size_t>(c)] = s * inv;
    }
    return out;
}

// ---- checkpoint persistence ----

namespace {
constexpr char kMagic[8] = {'R', 'C', 'A', 'E', 'c', 'k', 'p', '1'};
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    nlohmann::json hdr;
    hdr["format_version"] = 1;
    hdr["config"] = {{"height", ckpt.config.height},
                     {"width", ckpt.config.width},
                     {"channels", ckpt.config.channels},
                     {"bottleneck", ckpt.config.bottleneck},
                     {"latent_dim", ckpt.config.latent_dim}};
    hdr["phase"] = ckpt.phase;
    hdr["epoch"] = ckpt.epoch;
    hdr["seed"] = ckpt.seed;
    if (ckpt.has_loss_weights)
        hdr["loss_weights"] = {{"glob", ckpt.w_glob}, {"l1", ckpt.w_l1}, {"edge", ckpt.w_edge}};
    nlohmann::json manifest = nlohmann::json::array();
    for (const auto& [name, t] : ckpt.params)
        manifest.push_back({{"name", name}, {"shape", t.shape}});
    hdr["params"] = manifest;

    const std::string hs = hdr.dump();
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("checkpoint: cannot open for writing: " + path);
    f.write(kMagic, sizeof(kMagic));
    const std::uint64_t hlen = hs.size();
    f.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
    f.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    for (const auto& [name, t] : ckpt.params)
        f.write(reinterpret_cast<const char*>(t.data.data()),
                static_cast<std::streamsize>(t.data.size() * sizeof(double)));
    if (!f) throw std::runtime_error("checkpoint: write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path, const std::optional<CaeConfig>& expected) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("checkpoint: cannot open: " + path);
    char magic[8];
    f.read(magic, sizeof(magic));
    if (!f || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw std::runtime_error("checkpoint: bad magic / version in " + path);
    std::uint64_t hlen = 0;
    f.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
    if (!f || hlen > (1ull << 30)) throw std::runtime_error("checkpoint: corrupt header in " + path);
    std::string hs(hlen, '\0');
    f.read(hs.data(), static_cast<std::streamsize>(hlen));
    if (!f) throw std::runtime_error("checkpoint: truncated header in " + path);

    nlohmann::json hdr;
    try {
        hdr = nlohmann::json::parse(hs);
    } catch (const nlohmann::json::exception&) {
        throw std::runtime_error("checkpoint: corrupt header JSON in " + path);
    }

    Checkpoint c;
    const auto& jc = hdr.at("config");
    c.config.height = jc.at("height").get<int>();
    c.config.width = jc.at("width").get<int>();
    c.config.channels = jc.at("channels").get<std::array<int, 4>>();
    c.config.bottleneck = jc.at("bottleneck").get<int>();
    c.config.latent_dim = jc.at("latent_dim").get<int>();
    c.phase = hdr.at("phase").get<std::string>();
    c.epoch = hdr.at("epoch").get<int>();
    c.seed = hdr.at("seed").get<std::uint64_t>();
    if (hdr.contains("loss_weights")) {
        c.has_loss_weights = true;
        c.w_glob = hdr["loss_weights"].at("glob").get<double>();
        c.w_l1 = hdr["loss_weights"].at("l1").get<double>();
        c.w_edge = hdr["loss_weights"].at("edge").get<double>();
    }
    if (expected && !(*expected == c.config))
        throw std::runtime_error("checkpoint: config mismatch in " + path +
                                 " (file latent_dim=" + std::to_string(c.config.latent_dim) + ")");

    for (const auto& entry : hdr.at("params")) {
        const std::string name = entry.at("name").get<std::string>();
        const std::vector<int> shape = entry.at("shape").get<std::vector<int>>();
        Tensor t(shape);
        f.read(reinterpret_cast<char*>(t.data.data()),
               static_cast<std::streamsize>(t.data.size() * sizeof(double)));
        if (!f) throw std::runtime_error("checkpoint: truncated parameter block '" + name + "' in " + path);
        c.params[name] = std::move(t);
    }
    return c;
}

}  // namespace roicae
