#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cladapt/core_types.hpp"
#include "cladapt/errors.hpp"
#include "cladapt/features.hpp"

namespace cladapt {
namespace lstm {

inline constexpr int kClasses = 3;
inline constexpr char kModelMagic[9] = "CLADVR01";

// One layer's parameters. Gate rows are ordered input, forget, candidate,
// output; each block is `hidden` rows.
struct LayerParams {
    int input_dim = 0;
    int hidden = 0;
    std::vector<double> w_x;  // [4H x D] row-major
    std::vector<double> w_h;  // [4H x H] row-major
    std::vector<double> b;    // [4H]

    void resize(int in_dim, int h);
    void check_shapes() const;
};

struct ModelParams {
    LayerParams layer1;
    LayerParams layer2;
    std::vector<double> w_out;  // [classes x H] row-major
    std::vector<double> b_out;  // [classes]
    double dropout_rate = 0.2;

    int input_dim() const { return layer1.input_dim; }
    int hidden() const { return layer2.hidden; }

    void check_shapes() const;

    // Applies fn to every parameter tensor, in a fixed order (also the disk
    // order): layer1 w_x, w_h, b; layer2 w_x, w_h, b; w_out; b_out.
    template <typename Fn>
    void for_each_tensor(Fn&& fn) {
        fn(layer1.w_x); fn(layer1.w_h); fn(layer1.b);
        fn(layer2.w_x); fn(layer2.w_h); fn(layer2.b);
        fn(w_out); fn(b_out);
    }
    template <typename Fn>
    void for_each_tensor(Fn&& fn) const {
        fn(layer1.w_x); fn(layer1.w_h); fn(layer1.b);
        fn(layer2.w_x); fn(layer2.w_h); fn(layer2.b);
        fn(w_out); fn(b_out);
    }
};

// Gradients share the parameter layout.
using Gradients = ModelParams;

Gradients zero_like(const ModelParams& p);

// Seeded Xavier-uniform init; forget-gate bias starts at +1.
ModelParams init_params(int input_dim, int hidden, double dropout_rate, uint64_t seed);

// T x D input matrix (one row per sub-frame).
using FeatureMatrix = std::vector<std::vector<double>>;

FeatureMatrix to_matrix(const FeatureSequence& seq);

struct Sample {
    FeatureMatrix x;
    int label = 0;  // class index, see LoadState
};

enum class RunMode { train, eval };

// Single cell step: i,f,o = logistic, g = tanh, c' = f*c + i*g,
// h' = o * tanh(c'). Throws Error("shape_mismatch") / Error("non_finite").
void cell_forward(std::span<const double> x, std::span<const double> h,
                  std::span<const double> c, const LayerParams& p,
                  std::span<double> h_out, std::span<double> c_out);

// Full forward pass: layer1 unrolled over the frames, ReLU on each layer's
// output stream, inverted dropout after each layer in train mode, dense +
// softmax on the final step. Probabilities sum to 1 within 1e-12.
std::array<double, kClasses> forward(const FeatureMatrix& x, const ModelParams& p,
                                     RunMode mode, uint64_t dropout_seed = 0);
std::array<double, kClasses> forward(const FeatureSequence& seq, const ModelParams& p,
                                     RunMode mode, uint64_t dropout_seed = 0);

// Categorical cross-entropy, probabilities floored at 1e-12.
double cross_entropy(const std::array<double, kClasses>& probs, int label);

struct BatchResult {
    double mean_loss = 0.0;
    std::vector<std::array<double, kClasses>> probs;
    Gradients grads;
};

// Forward + BPTT over the batch; gradients are of the mean loss. The dropout
// masks drawn here are the ones differentiated (single paired pass).
BatchResult backward(std::span<const Sample> batch, const ModelParams& p,
                     uint64_t dropout_seed);

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    AdamConfig cfg;
    long step = 0;
    Gradients m;
    Gradients v;

    static AdamState init(const ModelParams& p, AdamConfig cfg);
};

// Bias-corrected Adam update, in place.
void adam_step(ModelParams& p, const Gradients& grads, AdamState& state);

struct TrainConfig {
    int epochs = 40;
    int batch_size = 32;
    uint64_t seed = 1;
    double val_fraction = 0.2;
    int patience = 6;           // early stop on val loss
    int hidden = 64;
    double dropout_rate = 0.2;
    AdamConfig adam;
    int min_per_class = 30;
};

struct EpochStats {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double train_acc = 0.0;
    double val_acc = 0.0;
};

struct TrainResult {
    ModelParams params;
    std::vector<EpochStats> history;
};

// Seeded shuffle + split, then train_split. Throws Error("too_few_samples")
// when a class has fewer than cfg.min_per_class samples.
TrainResult train(const std::vector<Sample>& dataset, const TrainConfig& cfg);

// Trains on a caller-provided split. Throws Error("class_missing") when a
// class is absent from the training part. Keeps the best-val-loss weights.
TrainResult train_split(std::vector<Sample> train_set, const std::vector<Sample>& val_set,
                        const TrainConfig& cfg);

// Expected-severity mapping of the class probabilities onto [0, 1].
double load_score(const std::array<double, kClasses>& probs);

struct LoadedModel {
    ModelParams params;
    Thresholds thresholds;
    NormStats norms;
};

// Binary model file: magic "CLADVR01", little-endian u32 dims (input, hidden,
// layers=2, classes=3), all weights as little-endian f64 in for_each_tensor
// order, then t_low, t_high, norm mean[input], norm std[input].
void save_model(const std::string& path, const ModelParams& p, const Thresholds& th,
                const NormStats& norms);
LoadedModel load_model(const std::string& path);

}  // namespace lstm
}  // namespace cladapt
