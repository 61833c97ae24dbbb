#include "roicae/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace roicae {

using json = nlohmann::json;

void TrainConfig::validate() const {
    if (lr_p1 <= 0.0 || lr_p2 <= 0.0) throw std::invalid_argument("train config: learning rates must be positive");
    if (batch_size < 1) throw std::invalid_argument("train config: batch size must be >= 1");
    if (max_epochs_p1 < 1 || max_epochs_p2 < 1)
        throw std::invalid_argument("train config: max epochs must be >= 1");
    if (patience_p1 < 1 || patience_p2 < 1) throw std::invalid_argument("train config: patience must be >= 1");
    if (min_delta_p1 < 0.0 || min_delta_p2 < 0.0)
        throw std::invalid_argument("train config: min delta must be non-negative");
    if (seeds.empty()) throw std::invalid_argument("train config: at least one seed required");
    if (ablation_horizon < 1) throw std::invalid_argument("train config: ablation horizon must be >= 1");
    if (!term_glob && !term_l1 && !term_edge)
        throw std::invalid_argument("train config: at least one loss term must be enabled");
}

std::string train_config_to_json(const TrainConfig& cfg) {
    json j;
    j["lr_p1"] = cfg.lr_p1;
    j["lr_p2"] = cfg.lr_p2;
    j["batch_size"] = cfg.batch_size;
    j["max_epochs_p1"] = cfg.max_epochs_p1;
    j["max_epochs_p2"] = cfg.max_epochs_p2;
    j["patience_p1"] = cfg.patience_p1;
    j["patience_p2"] = cfg.patience_p2;
    j["min_delta_p1"] = cfg.min_delta_p1;
    j["min_delta_p2"] = cfg.min_delta_p2;
    j["seeds"] = cfg.seeds;
    j["term_glob"] = cfg.term_glob;
    j["term_l1"] = cfg.term_l1;
    j["term_edge"] = cfg.term_edge;
    j["pin_glob"] = cfg.pin_glob;
    j["ablation_horizon"] = cfg.ablation_horizon;
    return j.dump(2);
}

TrainConfig train_config_from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open train config: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw std::runtime_error("malformed train config " + path + ": " + e.what());
    }
    TrainConfig cfg;
    auto get = [&](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("lr_p1", cfg.lr_p1);
    get("lr_p2", cfg.lr_p2);
    get("batch_size", cfg.batch_size);
    get("max_epochs_p1", cfg.max_epochs_p1);
    get("max_epochs_p2", cfg.max_epochs_p2);
    get("patience_p1", cfg.patience_p1);
    get("patience_p2", cfg.patience_p2);
    get("min_delta_p1", cfg.min_delta_p1);
    get("min_delta_p2", cfg.min_delta_p2);
    get("seeds", cfg.seeds);
    get("term_glob", cfg.term_glob);
    get("term_l1", cfg.term_l1);
    get("term_edge", cfg.term_edge);
    get("pin_glob", cfg.pin_glob);
    get("ablation_horizon", cfg.ablation_horizon);
    cfg.validate();
    return cfg;
}

std::pair<EarlyStopState, bool> early_stop_update(EarlyStopState state, double val_loss, int epoch,
                                                  double min_delta, int patience) {
    if (!std::isfinite(val_loss)) throw std::runtime_error("early stop: non-finite validation loss");
    if (!state.has_best || val_loss < state.best - min_delta) {
        state.best = val_loss;
        state.has_best = true;
        state.best_epoch = epoch;
        state.epochs_since_improvement = 0;
        return {state, false};
    }
    state.epochs_since_improvement += 1;
    return {state, state.epochs_since_improvement >= patience};
}

namespace {

struct Batch {
    Tensor x;        // B x 1 x H x W
    Tensor weights;  // B x 1 x H x W (P2 only)
};

Batch build_batch(const CaeConfig& cfg, const std::vector<const Sample*>& items, bool with_roi) {
    const int b = static_cast<int>(items.size());
    Tensor x = Tensor::zeros({b, 1, cfg.height, cfg.width});
    std::vector<Tensor> masks;
    for (int n = 0; n < b; ++n) {
        const Sample& s = *items[n];
        if (s.image.shape != std::vector<int>{1, 1, cfg.height, cfg.width})
            throw std::runtime_error("sample " + s.id + " does not match the model canvas " +
                                     std::to_string(cfg.width) + "x" + std::to_string(cfg.height));
        std::copy(s.image.data.begin(), s.image.data.end(),
                  x.data.begin() + static_cast<std::ptrdiff_t>(n) * cfg.height * cfg.width);
        if (with_roi) masks.push_back(roi_mask(s.roi, cfg.width, cfg.height));
    }
    Batch out;
    out.x = std::move(x);
    if (with_roi) out.weights = roi_weights(masks);
    return out;
}

// Loss with gradient; returns loss value, fills grads keyed like params.
double batch_loss_and_grads(const CaeConfig& cfg, const ParamMap& params, const Batch& batch,
                            Phase phase, const LossWeights& w, ParamMap& grads) {
    Tape tape;
    CaeGraph g = cae_forward(tape, cfg, params, batch.x, true);
    Tape::NodeId loss = phase == Phase::P1
                            ? phase1_loss_node(tape, g.input, g.xhat)
                            : phase2_total_node(tape, g.input, g.xhat, batch.weights, w);
    double v = tape.val(loss).data[0];
    if (!std::isfinite(v)) return v;
    tape.backward(loss);
    grads.clear();
    for (const auto& [name, id] : g.params) grads.emplace(name, tape.grad(id));
    return v;
}

double forward_loss(const CaeConfig& cfg, const ParamMap& params, const Batch& batch, Phase phase,
                    const LossWeights& w) {
    Tape tape;
    CaeGraph g = cae_forward(tape, cfg, params, batch.x, true);
    Tape::NodeId loss = phase == Phase::P1
                            ? phase1_loss_node(tape, g.input, g.xhat)
                            : phase2_total_node(tape, g.input, g.xhat, batch.weights, w);
    return tape.val(loss).data[0];
}

const Sample& sample_by_id(const std::map<std::string, Sample>& samples, const std::string& id) {
    auto it = samples.find(id);
    if (it == samples.end()) throw std::runtime_error("split references unknown sample id: " + id);
    return it->second;
}

}  // namespace

CalibrationReport calibrate_weights(const CaeConfig& model_cfg, const ParamMap& params,
                                    const std::vector<Sample>& calib_batch, const TrainConfig& cfg) {
    if (calib_batch.size() < 4)
        throw std::invalid_argument("calibration requires a batch of at least 4 samples, got " +
                                    std::to_string(calib_batch.size()));
    std::vector<const Sample*> items;
    for (const auto& s : calib_batch) items.push_back(&s);
    Batch batch = build_batch(model_cfg, items, true);

    auto term_norm = [&](int term) -> double {
        Tape tape;
        CaeGraph g = cae_forward(tape, model_cfg, params, batch.x, true);
        Tape::NodeId loss;
        switch (term) {
            case 0: loss = phase1_loss_node(tape, g.input, g.xhat); break;
            case 1: loss = roi_l1_node(tape, g.input, g.xhat, batch.weights); break;
            default: loss = roi_edge_loss_node(tape, g.input, g.xhat, batch.weights); break;
        }
        if (!std::isfinite(tape.val(loss).data[0]))
            throw std::runtime_error("calibration: non-finite loss term value");
        tape.backward(loss);
        ParamMap grads;
        for (const auto& [name, id] : g.params) grads.emplace(name, tape.grad(id));
        return grad_global_norm(grads);
    };

    CalibrationReport rep;
    rep.g_glob = cfg.term_glob ? term_norm(0) : 0.0;
    rep.g_l1 = cfg.term_l1 ? term_norm(1) : 0.0;
    rep.g_edge = cfg.term_edge ? term_norm(2) : 0.0;

    const double norms[3] = {rep.g_glob, rep.g_l1, rep.g_edge};
    const bool enabled[3] = {cfg.term_glob, cfg.term_l1, cfg.term_edge};
    double lambdas[3] = {0.0, 0.0, 0.0};
    if (cfg.pin_glob) {
        if (!cfg.term_glob || rep.g_glob <= 0.0)
            throw std::runtime_error("pin-glob calibration requires a nonzero global gradient");
        lambdas[0] = 1.0;
        for (int k = 1; k < 3; ++k)
            if (enabled[k] && norms[k] > 0.0) lambdas[k] = rep.g_glob / norms[k];
    } else {
        double sum_inv = 0.0;
        for (int k = 0; k < 3; ++k)
            if (enabled[k] && norms[k] > 0.0) sum_inv += 1.0 / norms[k];
        if (sum_inv == 0.0)
            throw std::runtime_error("calibration: all enabled loss terms have zero gradient");
        for (int k = 0; k < 3; ++k)
            if (enabled[k] && norms[k] > 0.0) lambdas[k] = (1.0 / norms[k]) / sum_inv;
    }
    rep.weights = LossWeights{lambdas[0], lambdas[1], lambdas[2]};
    return rep;
}

TrainResult train_phase(const CaeConfig& model_cfg, const ParamMap& start_params,
                        const std::map<std::string, Sample>& samples, const SplitPlan& split,
                        Phase phase, const TrainConfig& cfg, std::uint64_t seed,
                        std::optional<LossWeights> weights, std::optional<int> max_epochs_override,
                        bool disable_early_stop) {
    model_cfg.validate();
    cfg.validate();
    if (split.train_ids.empty()) throw std::runtime_error("training split is empty");
    if (split.val_ids.empty()) throw std::runtime_error("validation split is empty");

    TrainResult result;
    const bool with_roi = phase == Phase::P2;
    LossWeights w{1.0, 0.0, 0.0};
    if (phase == Phase::P2) {
        if (weights) {
            w = *weights;
        } else {
            std::vector<Sample> calib;
            const std::size_t n = std::min<std::size_t>(split.val_ids.size(),
                                                        static_cast<std::size_t>(cfg.batch_size));
            for (std::size_t i = 0; i < n; ++i)
                calib.push_back(sample_by_id(samples, split.val_ids[i]));
            result.calibration = calibrate_weights(model_cfg, start_params, calib, cfg);
            w = result.calibration.weights;
        }
    }

    ParamMap params = start_params;
    AdamState adam(cfg.lr(phase));
    Rng root(seed);
    const int max_epochs = max_epochs_override.value_or(cfg.max_epochs(phase));
    const int patience = cfg.patience(phase);
    const double min_delta = cfg.min_delta(phase);

    // pre-built per-sample validation batches (eval order is fixed)
    std::vector<Batch> val_batches;
    for (const auto& id : split.val_ids) {
        const Sample& s = sample_by_id(samples, id);
        std::vector<const Sample*> one{&s};
        val_batches.push_back(build_batch(model_cfg, one, with_roi));
    }

    EarlyStopState es;
    ParamMap best_params = params;
    int best_epoch = 0;
    bool stopped = false;

    for (int epoch = 1; epoch <= max_epochs && !stopped; ++epoch) {
        std::vector<std::string> order = split.train_ids;
        Rng epoch_rng = root.sub(0xE50000u + static_cast<std::uint64_t>(epoch));
        epoch_rng.shuffle(order);

        double train_sum = 0.0;
        std::size_t train_count = 0;
        int batch_index = 0;
        for (std::size_t off = 0; off < order.size(); off += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end = std::min(order.size(), off + static_cast<std::size_t>(cfg.batch_size));
            std::vector<const Sample*> items;
            for (std::size_t i = off; i < end; ++i) items.push_back(&sample_by_id(samples, order[i]));
            Batch batch = build_batch(model_cfg, items, with_roi);
            ParamMap grads;
            const double loss = batch_loss_and_grads(model_cfg, params, batch, phase, w, grads);
            if (!std::isfinite(loss))
                throw std::runtime_error("training diverged: non-finite loss at epoch " +
                                         std::to_string(epoch) + ", batch " + std::to_string(batch_index));
            adam_step(params, grads, adam);
            train_sum += loss * static_cast<double>(items.size());
            train_count += items.size();
            ++batch_index;
        }
        const double train_loss = train_sum / static_cast<double>(train_count);

        double val_sum = 0.0;
        for (const auto& vb : val_batches) val_sum += forward_loss(model_cfg, params, vb, phase, w);
        const double val_loss = val_sum / static_cast<double>(val_batches.size());

        bool stop_now = false;
        std::tie(es, stop_now) = early_stop_update(es, val_loss, epoch, min_delta, patience);
        if (es.best_epoch == epoch) {
            best_params = params;
            best_epoch = epoch;
        }
        if (disable_early_stop) stop_now = false;
        stopped = stop_now;
        result.trace.push_back(TraceRow{epoch, train_loss, val_loss, stop_now});
    }

    result.best.config = model_cfg;
    result.best.params = std::move(best_params);
    result.best.phase = phase == Phase::P1 ? "P1" : "P2";
    result.best.epoch = best_epoch;
    result.best.seed = seed;
    if (phase == Phase::P2) {
        result.best.has_loss_weights = true;
        result.best.w_glob = w.glob;
        result.best.w_l1 = w.l1;
        result.best.w_edge = w.edge;
    }
    return result;
}

std::vector<MetricRecord> evaluate_checkpoint(const CaeConfig& cfg, const ParamMap& params,
                                              const std::vector<Sample>& samples,
                                              const std::string& split_tag) {
    std::vector<MetricRecord> out;
    out.reserve(samples.size());
    for (const auto& s : samples) {
        EncodeResult enc = encode_latent(cfg, params, s.image);
        Tensor xhat = cae_decode(cfg, params, enc.z);
        MetricRecord rec = compute_metrics(s.image, xhat, s.roi);
        rec.id = s.id;
        rec.site = s.site;
        rec.split = split_tag;
        out.push_back(std::move(rec));
    }
    return out;
}

void write_trace_csv(const std::vector<TraceRow>& trace, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open trace file for writing: " + path);
    out << "epoch,train_loss,val_loss,stopped_flag\n";
    char buf[128];
    for (const auto& row : trace) {
        std::snprintf(buf, sizeof(buf), "%d,%.12g,%.12g,%d\n", row.epoch, row.train_loss, row.val_loss,
                      row.stopped ? 1 : 0);
        out << buf;
    }
}

}  // namespace roicae
