#include "cladapt/lstm.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>

#include "cladapt/rng.hpp"

namespace cladapt {
namespace lstm {

namespace {

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// y = W x with W row-major [rows x cols].
void matvec(std::span<const double> w, std::span<const double> x, std::span<double> y) {
    const size_t rows = y.size();
    const size_t cols = x.size();
    for (size_t r = 0; r < rows; ++r) {
        double acc = 0.0;
        const double* wr = w.data() + r * cols;
        for (size_t c = 0; c < cols; ++c) acc += wr[c] * x[c];
        y[r] = acc;
    }
}

// y += W^T g with W row-major [rows x cols]; g has `rows` entries.
void matvec_transpose_add(std::span<const double> w, std::span<const double> g,
                          std::span<double> y) {
    const size_t rows = g.size();
    const size_t cols = y.size();
    for (size_t r = 0; r < rows; ++r) {
        const double gr = g[r];
        if (gr == 0.0) continue;
        const double* wr = w.data() + r * cols;
        for (size_t c = 0; c < cols; ++c) y[c] += gr * wr[c];
    }
}

// W += g (outer) x, row-major [rows x cols].
void outer_add(std::span<double> w, std::span<const double> g, std::span<const double> x) {
    const size_t rows = g.size();
    const size_t cols = x.size();
    for (size_t r = 0; r < rows; ++r) {
        const double gr = g[r];
        if (gr == 0.0) continue;
        double* wr = w.data() + r * cols;
        for (size_t c = 0; c < cols; ++c) wr[c] += gr * x[c];
    }
}

uint64_t mix_seed(uint64_t a, uint64_t b, uint64_t c) {
    uint64_t x = a;
    x ^= b + 0x9E3779B97F4A7C15ULL + (x << 6) + (x >> 2);
    x ^= c + 0x9E3779B97F4A7C15ULL + (x << 6) + (x >> 2);
    return x;
}

// Per-timestep state kept for BPTT.
struct StepCache {
    std::vector<double> x_in;     // layer input at t (post previous layer's dropout)
    std::vector<double> h_prev, c_prev;
    std::vector<double> i, f, g, o;  // post-activation gates
    std::vector<double> c, tanh_c, h;
    std::vector<double> mask;     // dropout multiplier on relu(h): 0 or 1/keep
    std::vector<double> stream;   // mask .* relu(h), what the next stage sees
};

struct LayerCaches {
    std::vector<StepCache> steps;
};

void run_layer_step(const LayerParams& p, std::span<const double> x,
                    std::span<const double> h_prev, std::span<const double> c_prev,
                    StepCache* cache, std::span<double> h_out, std::span<double> c_out) {
    const int hidden = p.hidden;
    std::vector<double> z(static_cast<size_t>(4) * hidden);
    matvec(p.w_x, x, z);
    {
        std::vector<double> zh(static_cast<size_t>(4) * hidden);
        matvec(p.w_h, h_prev, zh);
        for (size_t k = 0; k < z.size(); ++k) z[k] += zh[k] + p.b[k];
    }
    if (cache) {
        cache->i.resize(hidden);
        cache->f.resize(hidden);
        cache->g.resize(hidden);
        cache->o.resize(hidden);
        cache->c.resize(hidden);
        cache->tanh_c.resize(hidden);
        cache->h.resize(hidden);
    }
    for (int u = 0; u < hidden; ++u) {
        const double gi = logistic(z[u]);
        const double gf = logistic(z[hidden + u]);
        const double gg = std::tanh(z[2 * hidden + u]);
        const double go = logistic(z[3 * hidden + u]);
        const double cu = gf * c_prev[u] + gi * gg;
        const double tc = std::tanh(cu);
        const double hu = go * tc;
        h_out[u] = hu;
        c_out[u] = cu;
        if (cache) {
            cache->i[u] = gi;
            cache->f[u] = gf;
            cache->g[u] = gg;
            cache->o[u] = go;
            cache->c[u] = cu;
            cache->tanh_c[u] = tc;
            cache->h[u] = hu;
        }
    }
}

std::array<double, kClasses> softmax3(const std::array<double, kClasses>& logits) {
    const double m = std::max({logits[0], logits[1], logits[2]});
    std::array<double, kClasses> out{};
    double sum = 0.0;
    for (int k = 0; k < kClasses; ++k) {
        out[k] = std::exp(logits[k] - m);
        sum += out[k];
    }
    for (double& v : out) v /= sum;
    return out;
}

// Full forward over one sample. When `caches` is non-null the pass records
// everything BPTT needs (and draws dropout masks from `rng` if training).
std::array<double, kClasses> forward_one(const FeatureMatrix& x, const ModelParams& p,
                                         RunMode mode, Rng* rng, LayerCaches* c1,
                                         LayerCaches* c2,
                                         std::vector<double>* head_input_out) {
    p.check_shapes();
    const size_t t_len = x.size();
    if (t_len == 0) throw Error("shape_mismatch", "empty input sequence");
    for (const auto& row : x) {
        if (row.size() != static_cast<size_t>(p.input_dim())) {
            throw Error("shape_mismatch", "input row width != model input dim");
        }
        for (double v : row) {
            if (!std::isfinite(v)) throw Error("non_finite", "non-finite model input");
        }
    }
    const int hidden = p.hidden();
    const bool training = mode == RunMode::train;
    const double rate = training ? p.dropout_rate : 0.0;
    const double keep = 1.0 - rate;

    auto draw_mask = [&](std::vector<double>& mask) {
        mask.assign(hidden, 1.0);
        if (rate <= 0.0) return;
        for (int u = 0; u < hidden; ++u) {
            mask[u] = (rng && rng->uniform() < keep) ? 1.0 / keep : 0.0;
        }
    };

    std::vector<double> h1(hidden, 0.0), cell1(hidden, 0.0);
    std::vector<double> h2(hidden, 0.0), cell2(hidden, 0.0);
    std::vector<double> stream1(hidden), stream2(hidden), mask(hidden);

    if (c1) c1->steps.resize(t_len);
    if (c2) c2->steps.resize(t_len);

    std::vector<double> h_new(hidden), c_new(hidden);
    for (size_t t = 0; t < t_len; ++t) {
        StepCache* s1 = c1 ? &c1->steps[t] : nullptr;
        if (s1) {
            s1->x_in = x[t];
            s1->h_prev = h1;
            s1->c_prev = cell1;
        }
        run_layer_step(p.layer1, x[t], h1, cell1, s1, h_new, c_new);
        h1 = h_new;
        cell1 = c_new;

        draw_mask(mask);
        for (int u = 0; u < hidden; ++u) {
            stream1[u] = mask[u] * std::max(h1[u], 0.0);
        }
        if (s1) {
            s1->mask = mask;
            s1->stream = stream1;
        }

        StepCache* s2 = c2 ? &c2->steps[t] : nullptr;
        if (s2) {
            s2->x_in = stream1;
            s2->h_prev = h2;
            s2->c_prev = cell2;
        }
        run_layer_step(p.layer2, stream1, h2, cell2, s2, h_new, c_new);
        h2 = h_new;
        cell2 = c_new;

        draw_mask(mask);
        for (int u = 0; u < hidden; ++u) {
            stream2[u] = mask[u] * std::max(h2[u], 0.0);
        }
        if (s2) {
            s2->mask = mask;
            s2->stream = stream2;
        }
    }

    std::array<double, kClasses> logits{};
    for (int k = 0; k < kClasses; ++k) {
        double acc = p.b_out[k];
        const double* wr = p.w_out.data() + static_cast<size_t>(k) * hidden;
        for (int u = 0; u < hidden; ++u) acc += wr[u] * stream2[u];
        logits[k] = acc;
    }
    const auto probs = softmax3(logits);
    for (double v : probs) {
        if (!std::isfinite(v)) {
            throw Error("non_finite", "forward pass produced non-finite probabilities");
        }
    }
    if (head_input_out) *head_input_out = stream2;
    return probs;
}

// BPTT through one layer given the gradient flowing into its output stream
// at each timestep. Returns d(input stream) per timestep via dx_out.
void layer_backward(const LayerParams& p, const LayerCaches& caches,
                    const std::vector<std::vector<double>>& dstream, LayerParams& grads,
                    std::vector<std::vector<double>>* dx_out) {
    const int hidden = p.hidden;
    const size_t t_len = caches.steps.size();
    std::vector<double> dh_rec(hidden, 0.0), dc_rec(hidden, 0.0);
    std::vector<double> dz(static_cast<size_t>(4) * hidden);
    if (dx_out) dx_out->assign(t_len, std::vector<double>(p.input_dim, 0.0));

    for (size_t t = t_len; t-- > 0;) {
        const StepCache& s = caches.steps[t];
        for (int u = 0; u < hidden; ++u) {
            // stream = mask * relu(h): route the stream gradient through both.
            const double relu_grad = s.h[u] > 0.0 ? s.mask[u] : 0.0;
            const double dh = dstream[t][u] * relu_grad + dh_rec[u];
            const double do_ = dh * s.tanh_c[u];
            const double dc = dc_rec[u] + dh * s.o[u] * (1.0 - s.tanh_c[u] * s.tanh_c[u]);
            const double df = dc * s.c_prev[u];
            const double di = dc * s.g[u];
            const double dg = dc * s.i[u];
            dz[u] = di * s.i[u] * (1.0 - s.i[u]);
            dz[hidden + u] = df * s.f[u] * (1.0 - s.f[u]);
            dz[2 * hidden + u] = dg * (1.0 - s.g[u] * s.g[u]);
            dz[3 * hidden + u] = do_ * s.o[u] * (1.0 - s.o[u]);
            dc_rec[u] = dc * s.f[u];
        }
        outer_add(grads.w_x, dz, s.x_in);
        outer_add(grads.w_h, dz, s.h_prev);
        for (size_t k = 0; k < dz.size(); ++k) grads.b[k] += dz[k];
        if (dx_out) matvec_transpose_add(p.w_x, dz, (*dx_out)[t]);
        std::fill(dh_rec.begin(), dh_rec.end(), 0.0);
        matvec_transpose_add(p.w_h, dz, dh_rec);
    }
}

}  // namespace

void LayerParams::resize(int in_dim, int h) {
    input_dim = in_dim;
    hidden = h;
    w_x.assign(static_cast<size_t>(4) * h * in_dim, 0.0);
    w_h.assign(static_cast<size_t>(4) * h * h, 0.0);
    b.assign(static_cast<size_t>(4) * h, 0.0);
}

void LayerParams::check_shapes() const {
    if (input_dim <= 0 || hidden <= 0 ||
        w_x.size() != static_cast<size_t>(4) * hidden * input_dim ||
        w_h.size() != static_cast<size_t>(4) * hidden * hidden ||
        b.size() != static_cast<size_t>(4) * hidden) {
        throw Error("shape_mismatch", "inconsistent LSTM layer shapes");
    }
}

void ModelParams::check_shapes() const {
    layer1.check_shapes();
    layer2.check_shapes();
    if (layer2.input_dim != layer1.hidden || layer1.hidden != layer2.hidden ||
        w_out.size() != static_cast<size_t>(kClasses) * layer2.hidden ||
        b_out.size() != static_cast<size_t>(kClasses)) {
        throw Error("shape_mismatch", "inconsistent model shapes");
    }
}

Gradients zero_like(const ModelParams& p) {
    Gradients g;
    g.layer1.resize(p.layer1.input_dim, p.layer1.hidden);
    g.layer2.resize(p.layer2.input_dim, p.layer2.hidden);
    g.w_out.assign(p.w_out.size(), 0.0);
    g.b_out.assign(p.b_out.size(), 0.0);
    g.dropout_rate = 0.0;
    return g;
}

ModelParams init_params(int input_dim, int hidden, double dropout_rate, uint64_t seed) {
    Rng rng = Rng(seed).fork(17);
    ModelParams p;
    p.dropout_rate = dropout_rate;
    p.layer1.resize(input_dim, hidden);
    p.layer2.resize(hidden, hidden);
    p.w_out.assign(static_cast<size_t>(kClasses) * hidden, 0.0);
    p.b_out.assign(kClasses, 0.0);

    auto xavier = [&](std::vector<double>& w, int fan_in, int fan_out) {
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        for (double& v : w) v = rng.uniform(-limit, limit);
    };
    xavier(p.layer1.w_x, input_dim, hidden);
    xavier(p.layer1.w_h, hidden, hidden);
    xavier(p.layer2.w_x, hidden, hidden);
    xavier(p.layer2.w_h, hidden, hidden);
    xavier(p.w_out, hidden, kClasses);
    // Forget-gate bias +1 keeps early memory open.
    for (int u = 0; u < hidden; ++u) {
        p.layer1.b[hidden + u] = 1.0;
        p.layer2.b[hidden + u] = 1.0;
    }
    return p;
}

FeatureMatrix to_matrix(const FeatureSequence& seq) {
    FeatureMatrix m;
    m.reserve(seq.frames.size());
    for (const auto& f : seq.frames) m.emplace_back(f.begin(), f.end());
    return m;
}

void cell_forward(std::span<const double> x, std::span<const double> h,
                  std::span<const double> c, const LayerParams& p, std::span<double> h_out,
                  std::span<double> c_out) {
    p.check_shapes();
    if (x.size() != static_cast<size_t>(p.input_dim) ||
        h.size() != static_cast<size_t>(p.hidden) || c.size() != static_cast<size_t>(p.hidden) ||
        h_out.size() != static_cast<size_t>(p.hidden) ||
        c_out.size() != static_cast<size_t>(p.hidden)) {
        throw Error("shape_mismatch", "cell_forward vector sizes do not match layer shapes");
    }
    for (double v : x) {
        if (!std::isfinite(v)) throw Error("non_finite", "non-finite cell input");
    }
    run_layer_step(p, x, h, c, nullptr, h_out, c_out);
}

std::array<double, kClasses> forward(const FeatureMatrix& x, const ModelParams& p, RunMode mode,
                                     uint64_t dropout_seed) {
    Rng rng(dropout_seed);
    return forward_one(x, p, mode, &rng, nullptr, nullptr, nullptr);
}

std::array<double, kClasses> forward(const FeatureSequence& seq, const ModelParams& p,
                                     RunMode mode, uint64_t dropout_seed) {
    return forward(to_matrix(seq), p, mode, dropout_seed);
}

double cross_entropy(const std::array<double, kClasses>& probs, int label) {
    if (label < 0 || label >= kClasses) throw Error("bad_label", "label out of range");
    return -std::log(std::max(probs[label], 1e-12));
}

BatchResult backward(std::span<const Sample> batch, const ModelParams& p,
                     uint64_t dropout_seed) {
    if (batch.empty()) throw Error("shape_mismatch", "empty batch");
    BatchResult result;
    result.grads = zero_like(p);
    result.probs.reserve(batch.size());
    Rng rng(dropout_seed);
    const int hidden = p.hidden();
    const size_t t_len = batch.front().x.size();

    std::vector<std::vector<double>> dstream2(t_len, std::vector<double>(hidden, 0.0));
    std::vector<std::vector<double>> dstream1;
    LayerCaches c1, c2;

    for (const Sample& sample : batch) {
        if (sample.x.size() != t_len) {
            throw Error("shape_mismatch", "batch sequences must share one length");
        }
        std::vector<double> head_input;
        const auto probs =
            forward_one(sample.x, p, RunMode::train, &rng, &c1, &c2, &head_input);
        result.probs.push_back(probs);
        result.mean_loss += cross_entropy(probs, sample.label);

        std::array<double, kClasses> dlogits = probs;
        dlogits[sample.label] -= 1.0;

        outer_add(result.grads.w_out, dlogits, head_input);
        for (int k = 0; k < kClasses; ++k) result.grads.b_out[k] += dlogits[k];

        for (auto& row : dstream2) std::fill(row.begin(), row.end(), 0.0);
        matvec_transpose_add(p.w_out, dlogits, dstream2[t_len - 1]);

        layer_backward(p.layer2, c2, dstream2, result.grads.layer2, &dstream1);
        layer_backward(p.layer1, c1, dstream1, result.grads.layer1, nullptr);
    }

    const double inv_b = 1.0 / static_cast<double>(batch.size());
    result.mean_loss *= inv_b;
    result.grads.for_each_tensor([&](std::vector<double>& t) {
        for (double& v : t) v *= inv_b;
    });
    return result;
}

AdamState AdamState::init(const ModelParams& p, AdamConfig cfg) {
    AdamState s;
    s.cfg = cfg;
    s.m = zero_like(p);
    s.v = zero_like(p);
    return s;
}

void adam_step(ModelParams& p, const Gradients& grads, AdamState& state) {
    ++state.step;
    const double b1 = state.cfg.beta1;
    const double b2 = state.cfg.beta2;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step));

    std::vector<std::vector<double>*> pt, mt, vt;
    std::vector<const std::vector<double>*> gt;
    p.for_each_tensor([&](std::vector<double>& t) { pt.push_back(&t); });
    state.m.for_each_tensor([&](std::vector<double>& t) { mt.push_back(&t); });
    state.v.for_each_tensor([&](std::vector<double>& t) { vt.push_back(&t); });
    grads.for_each_tensor([&](const std::vector<double>& t) { gt.push_back(&t); });

    for (size_t i = 0; i < pt.size(); ++i) {
        auto& param = *pt[i];
        auto& m = *mt[i];
        auto& v = *vt[i];
        const auto& g = *gt[i];
        if (param.size() != g.size()) throw Error("shape_mismatch", "gradient/parameter shapes");
        for (size_t k = 0; k < param.size(); ++k) {
            m[k] = b1 * m[k] + (1.0 - b1) * g[k];
            v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
            const double m_hat = m[k] / bc1;
            const double v_hat = v[k] / bc2;
            param[k] -= state.cfg.lr * m_hat / (std::sqrt(v_hat) + state.cfg.eps);
        }
    }
}

namespace {

double accuracy(const std::vector<std::array<double, kClasses>>& probs,
                std::span<const Sample> samples) {
    if (samples.empty()) return 0.0;
    int hits = 0;
    for (size_t i = 0; i < samples.size(); ++i) {
        const auto& pr = probs[i];
        const int arg = static_cast<int>(std::max_element(pr.begin(), pr.end()) - pr.begin());
        if (arg == samples[i].label) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(samples.size());
}

}  // namespace

TrainResult train(const std::vector<Sample>& dataset, const TrainConfig& cfg) {
    std::array<int, kClasses> per_class{};
    for (const Sample& s : dataset) {
        if (s.label < 0 || s.label >= kClasses) throw Error("bad_label", "label out of range");
        ++per_class[s.label];
    }
    for (int k = 0; k < kClasses; ++k) {
        if (per_class[k] < cfg.min_per_class) {
            throw Error("too_few_samples",
                        "class " + std::to_string(k) + " has " + std::to_string(per_class[k]) +
                            " samples, need >= " + std::to_string(cfg.min_per_class));
        }
    }
    std::vector<Sample> shuffled = dataset;
    Rng order = Rng(cfg.seed).fork(7);
    order.shuffle(shuffled);
    size_t n_val = static_cast<size_t>(
        std::llround(cfg.val_fraction * static_cast<double>(shuffled.size())));
    n_val = std::clamp<size_t>(n_val, 1, shuffled.size() - 1);
    std::vector<Sample> val_set(shuffled.end() - static_cast<long>(n_val), shuffled.end());
    shuffled.resize(shuffled.size() - n_val);
    return train_split(std::move(shuffled), val_set, cfg);
}

TrainResult train_split(std::vector<Sample> train_set, const std::vector<Sample>& val_set,
                        const TrainConfig& cfg) {
    if (train_set.empty() || train_set.front().x.empty()) {
        throw Error("too_few_samples", "empty training set");
    }
    std::array<bool, kClasses> seen{};
    for (const Sample& s : train_set) {
        if (s.label < 0 || s.label >= kClasses) throw Error("bad_label", "label out of range");
        seen[s.label] = true;
    }
    for (int k = 0; k < kClasses; ++k) {
        if (!seen[k]) {
            throw Error("class_missing",
                        "class " + std::to_string(k) + " absent from training split");
        }
    }
    const int input_dim = static_cast<int>(train_set.front().x.front().size());

    TrainResult result;
    result.params = init_params(input_dim, cfg.hidden, cfg.dropout_rate, cfg.seed);
    if (cfg.epochs <= 0) return result;

    AdamState adam = AdamState::init(result.params, cfg.adam);
    Rng order_rng = Rng(cfg.seed).fork(101);

    ModelParams best = result.params;
    double best_val_loss = std::numeric_limits<double>::infinity();
    int since_best = 0;

    std::vector<size_t> idx(train_set.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;

    auto evaluate = [&](std::span<const Sample> set, double& loss, double& acc) {
        loss = 0.0;
        std::vector<std::array<double, kClasses>> probs;
        probs.reserve(set.size());
        for (const Sample& s : set) {
            const auto pr = forward_one(s.x, result.params, RunMode::eval, nullptr, nullptr,
                                        nullptr, nullptr);
            loss += cross_entropy(pr, s.label);
            probs.push_back(pr);
        }
        loss /= static_cast<double>(set.size());
        acc = accuracy(probs, set);
    };

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        order_rng.shuffle(idx);
        double train_loss = 0.0;
        int train_hits = 0;
        for (size_t start = 0; start < idx.size(); start += cfg.batch_size) {
            const size_t end = std::min(idx.size(), start + cfg.batch_size);
            std::vector<Sample> batch;
            batch.reserve(end - start);
            for (size_t i = start; i < end; ++i) batch.push_back(train_set[idx[i]]);
            const uint64_t mask_seed =
                mix_seed(cfg.seed, static_cast<uint64_t>(epoch), start / cfg.batch_size);
            BatchResult br = backward(batch, result.params, mask_seed);
            adam_step(result.params, br.grads, adam);
            train_loss += br.mean_loss * static_cast<double>(batch.size());
            for (size_t i = 0; i < batch.size(); ++i) {
                const auto& pr = br.probs[i];
                const int arg =
                    static_cast<int>(std::max_element(pr.begin(), pr.end()) - pr.begin());
                if (arg == batch[i].label) ++train_hits;
            }
        }
        EpochStats es;
        es.epoch = epoch;
        es.train_loss = train_loss / static_cast<double>(train_set.size());
        es.train_acc = static_cast<double>(train_hits) / static_cast<double>(train_set.size());
        if (!val_set.empty()) {
            evaluate(val_set, es.val_loss, es.val_acc);
        }
        result.history.push_back(es);

        if (!val_set.empty()) {
            if (es.val_loss < best_val_loss - 1e-12) {
                best_val_loss = es.val_loss;
                best = result.params;
                since_best = 0;
            } else if (++since_best >= cfg.patience) {
                break;
            }
        }
    }
    if (!val_set.empty()) result.params = best;
    return result;
}

double load_score(const std::array<double, kClasses>& probs) {
    return 0.5 * probs[1] + 1.0 * probs[2];
}

namespace {

void write_bytes(std::ofstream& out, const void* data, size_t n) {
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
}

void write_u32(std::ofstream& out, uint32_t v) { write_bytes(out, &v, sizeof v); }

void write_f64s(std::ofstream& out, std::span<const double> v) {
    write_bytes(out, v.data(), v.size() * sizeof(double));
}

void read_bytes(std::ifstream& in, void* data, size_t n) {
    in.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
    if (in.gcount() != static_cast<std::streamsize>(n)) {
        throw Error("truncated_file", "model file ends prematurely");
    }
}

uint32_t read_u32(std::ifstream& in) {
    uint32_t v = 0;
    read_bytes(in, &v, sizeof v);
    return v;
}

void read_f64s(std::ifstream& in, std::span<double> v) {
    read_bytes(in, v.data(), v.size() * sizeof(double));
}

}  // namespace

void save_model(const std::string& path, const ModelParams& p, const Thresholds& th,
                const NormStats& norms) {
    p.check_shapes();
    if (p.input_dim() != kFeatureCount) {
        throw Error("dim_mismatch", "model input dim must match the feature vector");
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("io_error", "cannot open model file for writing: " + path);
    write_bytes(out, kModelMagic, 8);
    write_u32(out, static_cast<uint32_t>(p.input_dim()));
    write_u32(out, static_cast<uint32_t>(p.hidden()));
    write_u32(out, 2);  // layers
    write_u32(out, kClasses);
    p.for_each_tensor([&](const std::vector<double>& t) { write_f64s(out, t); });
    const double tl = th.t_low, thg = th.t_high;
    write_f64s(out, std::span<const double>(&tl, 1));
    write_f64s(out, std::span<const double>(&thg, 1));
    write_f64s(out, norms.mean);
    write_f64s(out, norms.stddev);
    if (!out) throw Error("io_error", "write failed: " + path);
}

LoadedModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("io_error", "cannot open model file: " + path);
    char magic[8];
    read_bytes(in, magic, 8);
    if (std::memcmp(magic, kModelMagic, 8) != 0) {
        throw Error("bad_magic", "not a model file (bad magic)");
    }
    const uint32_t input = read_u32(in);
    const uint32_t hidden = read_u32(in);
    const uint32_t layers = read_u32(in);
    const uint32_t classes = read_u32(in);
    if (input != kFeatureCount || hidden == 0 || hidden > 4096 || layers != 2 ||
        classes != kClasses) {
        throw Error("dim_mismatch", "unsupported model dimensions");
    }

    LoadedModel m;
    m.params.layer1.resize(static_cast<int>(input), static_cast<int>(hidden));
    m.params.layer2.resize(static_cast<int>(hidden), static_cast<int>(hidden));
    m.params.w_out.assign(static_cast<size_t>(kClasses) * hidden, 0.0);
    m.params.b_out.assign(kClasses, 0.0);
    m.params.for_each_tensor([&](std::vector<double>& t) { read_f64s(in, t); });
    double tl = 0.0, thg = 0.0;
    read_f64s(in, std::span<double>(&tl, 1));
    read_f64s(in, std::span<double>(&thg, 1));
    m.thresholds = Thresholds{tl, thg};
    read_f64s(in, m.norms.mean);
    read_f64s(in, m.norms.stddev);
    in.peek();
    if (!in.eof()) throw Error("trailing_data", "model file has trailing bytes");
    m.params.check_shapes();
    return m;
}

}  // namespace lstm
}  // namespace cladapt
