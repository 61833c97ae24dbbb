#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "roicae/cae.hpp"
#include "roicae/datasynth.hpp"
#include "roicae/losses.hpp"
#include "roicae/optim.hpp"

namespace roicae {

enum class Phase { P1, P2 };

struct TrainConfig {
    double lr_p1 = 1e-4;
    double lr_p2 = 1e-5;
    int batch_size = 8;
    int max_epochs_p1 = 250;
    int max_epochs_p2 = 250;
    int patience_p1 = 5;
    int patience_p2 = 7;
    double min_delta_p1 = 2e-5;
    double min_delta_p2 = 5e-5;
    std::vector<std::uint64_t> seeds{1000, 1001, 1002, 1003, 1004};
    // Phase-2 term toggles (ablations); disabling a term is identical to
    // forcing its lambda to zero.
    bool term_glob = true;
    bool term_l1 = true;
    bool term_edge = true;
    // keep lambda_glob pinned to 1 instead of joint normalization
    bool pin_glob = false;
    int ablation_horizon = 15;

    void validate() const;
    double lr(Phase p) const { return p == Phase::P1 ? lr_p1 : lr_p2; }
    int max_epochs(Phase p) const { return p == Phase::P1 ? max_epochs_p1 : max_epochs_p2; }
    int patience(Phase p) const { return p == Phase::P1 ? patience_p1 : patience_p2; }
    double min_delta(Phase p) const { return p == Phase::P1 ? min_delta_p1 : min_delta_p2; }
};

TrainConfig train_config_from_json_file(const std::string& path);
std::string train_config_to_json(const TrainConfig& cfg);

struct EarlyStopState {
    double best = 0.0;
    bool has_best = false;
    int epochs_since_improvement = 0;
    int best_epoch = -1;
};

/// Improvement iff val_loss < best - min_delta (strict); counter resets on
/// improvement; stop once the counter reaches the patience.
std::pair<EarlyStopState, bool> early_stop_update(EarlyStopState state, double val_loss, int epoch,
                                                  double min_delta, int patience);

struct CalibrationReport {
    double g_glob = 0.0, g_l1 = 0.0, g_edge = 0.0;  // per-term gradient norms
    LossWeights weights;
};

/// Gradient-magnitude weight calibration at Phase-2 onset: backprop each
/// enabled loss term alone on the calibration batch and set lambda_k
/// inversely proportional to the measured gradient norms (normalized to sum
/// to 1). A zero-gradient term gets lambda 0 and the rest renormalize.
CalibrationReport calibrate_weights(const CaeConfig& model_cfg, const ParamMap& params,
                                    const std::vector<Sample>& calib_batch, const TrainConfig& cfg);

struct TraceRow {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    bool stopped = false;
};

struct TrainResult {
    Checkpoint best;
    std::vector<TraceRow> trace;
    CalibrationReport calibration;  // meaningful for P2 only
};

/// One training phase with Adam, per-epoch validation and early stopping.
/// Returns the best-validation checkpoint; bit-deterministic per seed.
/// P2 requires Phase-1 parameters; weights are auto-calibrated on the first
/// validation batch when not supplied.
TrainResult train_phase(const CaeConfig& model_cfg, const ParamMap& start_params,
                        const std::map<std::string, Sample>& samples, const SplitPlan& split,
                        Phase phase, const TrainConfig& cfg, std::uint64_t seed,
                        std::optional<LossWeights> weights = std::nullopt,
                        std::optional<int> max_epochs_override = std::nullopt,
                        bool disable_early_stop = false);

/// Per-sample reconstruction metrics of a frozen checkpoint.
std::vector<MetricRecord> evaluate_checkpoint(const CaeConfig& cfg, const ParamMap& params,
                                              const std::vector<Sample>& samples,
                                              const std::string& split_tag);

void write_trace_csv(const std::vector<TraceRow>& trace, const std::string& path);

}  // namespace roicae
