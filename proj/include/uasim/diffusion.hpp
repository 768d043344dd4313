// Conditional latent DDPM: noise schedules, forward corruption, the
// residual-MLP denoiser with time embedding and latent conditioning, the
// reverse sampler, and both training regimes (short-term prediction
// pre-training and generative fine-tuning with epoch-reshuffled pairs).
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "uasim/autoencoder.hpp"  // TrainConfig, EpochLog, TrainResult
#include "uasim/checkpoint.hpp"
#include "uasim/nn.hpp"
#include "uasim/rng.hpp"

namespace uasim {

// ---- noise schedules --------------------------------------------------------

enum class ScheduleKind { kLinear, kSigmoid };

inline std::string schedule_kind_name(ScheduleKind k) {
    return k == ScheduleKind::kLinear ? "linear" : "sigmoid";
}

inline ScheduleKind schedule_kind_from_name(const std::string& s) {
    if (s == "linear") return ScheduleKind::kLinear;
    if (s == "sigmoid") return ScheduleKind::kSigmoid;
    throw InvalidInput("unknown schedule kind: " + s);
}

struct NoiseSchedule {
    ScheduleKind kind = ScheduleKind::kLinear;
    size_t T_diff = 100;
    double beta_min = 1e-4;
    double beta_max = 1e-2;
    std::vector<double> beta;       // index 0 <-> t = 1
    std::vector<double> alpha;      // 1 - beta_t
    std::vector<double> alpha_bar;  // running product

    double beta_at(size_t t) const { return beta[check(t)]; }
    double alpha_at(size_t t) const { return alpha[check(t)]; }
    double alpha_bar_at(size_t t) const { return alpha_bar[check(t)]; }

private:
    size_t check(size_t t) const {
        require(t >= 1 && t <= T_diff, "schedule: step out of range");
        return t - 1;
    }
};

// Sigmoid-shaped beta as a function of u = t / T.
inline double sigmoid_beta(double u, double beta_min, double beta_max) {
    return beta_min + (beta_max - beta_min) / (1.0 + std::exp(-10.0 * (u - 0.5)));
}

inline NoiseSchedule make_schedule(ScheduleKind kind, size_t T_diff, double beta_min = 1e-4,
                                   double beta_max = 1e-2) {
    require(T_diff >= 1, "make_schedule: T_diff must be >= 1");
    require(0.0 < beta_min && beta_min < beta_max && beta_max < 1.0,
            "make_schedule: need 0 < beta_min < beta_max < 1");
    NoiseSchedule s;
    s.kind = kind;
    s.T_diff = T_diff;
    s.beta_min = beta_min;
    s.beta_max = beta_max;
    s.beta.resize(T_diff);
    for (size_t t = 1; t <= T_diff; ++t) {
        if (kind == ScheduleKind::kLinear) {
            s.beta[t - 1] = T_diff == 1 ? beta_min
                                        : beta_min + (beta_max - beta_min) *
                                                         static_cast<double>(t - 1) /
                                                         static_cast<double>(T_diff - 1);
        } else {
            s.beta[t - 1] = sigmoid_beta(static_cast<double>(t) / static_cast<double>(T_diff),
                                         beta_min, beta_max);
        }
    }
    s.alpha.resize(T_diff);
    s.alpha_bar.resize(T_diff);
    double prod = 1.0;
    for (size_t i = 0; i < T_diff; ++i) {
        s.alpha[i] = 1.0 - s.beta[i];
        prod *= s.alpha[i];
        s.alpha_bar[i] = prod;
    }
    return s;
}

// ---- forward process ---------------------------------------------------------

// Closed form z_t = sqrt(abar_t) z_0 + sqrt(1 - abar_t) eps.
inline std::vector<double> forward_sample(const std::vector<double>& z0, size_t t,
                                          const std::vector<double>& eps,
                                          const NoiseSchedule& sched) {
    require(eps.size() == z0.size(), "forward_sample: eps size mismatch");
    const double ab = sched.alpha_bar_at(t);
    const double a = std::sqrt(ab);
    const double b = std::sqrt(1.0 - ab);
    std::vector<double> out(z0.size());
    for (size_t i = 0; i < z0.size(); ++i) out[i] = a * z0[i] + b * eps[i];
    return out;
}

// Stepwise recursion z_s = sqrt(1-beta_s) z_{s-1} + sqrt(beta_s) eps;
// distributionally equal to forward_sample.
inline std::vector<double> iterated_forward(const std::vector<double>& z0, size_t t, Rng& rng,
                                            const NoiseSchedule& sched) {
    require(t >= 1 && t <= sched.T_diff, "iterated_forward: step out of range");
    std::vector<double> z = z0;
    for (size_t s = 1; s <= t; ++s) {
        const double a = std::sqrt(1.0 - sched.beta_at(s));
        const double b = std::sqrt(sched.beta_at(s));
        for (double& v : z) v = a * v + b * rng.normal();
    }
    return z;
}

// Interleaved sin/cos positional embedding, frequencies 10000^(-2k/dim).
inline std::vector<double> time_embedding(size_t t, size_t dim = 32) {
    require(dim >= 2 && dim % 2 == 0, "time_embedding: dim must be even");
    std::vector<double> emb(dim);
    for (size_t k = 0; k < dim / 2; ++k) {
        const double omega =
            std::pow(10000.0, -2.0 * static_cast<double>(k) / static_cast<double>(dim));
        emb[2 * k] = std::sin(static_cast<double>(t) * omega);
        emb[2 * k + 1] = std::cos(static_cast<double>(t) * omega);
    }
    return emb;
}

// One reverse update; the stochastic term is suppressed at t = 1 so the
// final refinement is deterministic given the predicted noise.
inline std::vector<double> reverse_step(const std::vector<double>& z_t,
                                        const std::vector<double>& eps_hat, size_t t,
                                        const NoiseSchedule& sched, Rng* rng) {
    require(eps_hat.size() == z_t.size(), "reverse_step: size mismatch");
    const double beta = sched.beta_at(t);
    const double inv_sqrt_alpha = 1.0 / std::sqrt(sched.alpha_at(t));
    const double coef = beta / std::sqrt(1.0 - sched.alpha_bar_at(t));
    const double sigma = std::sqrt(beta);
    const bool add_noise = t > 1;
    require(!add_noise || rng != nullptr, "reverse_step: rng required for t > 1");
    std::vector<double> out(z_t.size());
    for (size_t i = 0; i < z_t.size(); ++i) {
        out[i] = inv_sqrt_alpha * (z_t[i] - coef * eps_hat[i]);
        if (add_noise) out[i] += sigma * rng->normal();
    }
    return out;
}

// ---- denoiser network ----------------------------------------------------------

struct DenoiserConfig {
    size_t latent = 128;
    size_t cond = 128;
    size_t temb_dim = 32;
    size_t width = 2048;
    size_t hidden_blocks = 3;
    double leaky_slope = 0.01;
};

template <class S>
class Denoiser {
public:
    DenoiserConfig cfg;
    nn::ParamStore<S> params;

    void init(const DenoiserConfig& c, Rng& rng) {
        cfg = c;
        params = nn::ParamStore<S>();
        const size_t in = cfg.latent + cfg.cond + cfg.temb_dim;
        in_w_ = params.add("in.w", nn::xavier_uniform<S>(cfg.width, in, rng));
        in_b_ = params.add("in.b", nn::Tensor<S>({cfg.width}));
        hidden_w_.clear();
        hidden_b_.clear();
        ln_gain_.clear();
        ln_bias_.clear();
        for (size_t k = 0; k < cfg.hidden_blocks; ++k) {
            const std::string p = "h" + std::to_string(k);
            hidden_w_.push_back(params.add(p + ".w", nn::xavier_uniform<S>(cfg.width, cfg.width, rng)));
            hidden_b_.push_back(params.add(p + ".b", nn::Tensor<S>({cfg.width})));
            ln_gain_.push_back(params.add(p + ".ln.gain", nn::Tensor<S>({cfg.width}, S(1))));
            ln_bias_.push_back(params.add(p + ".ln.bias", nn::Tensor<S>({cfg.width})));
        }
        bridge_w_ = params.add("bridge.w", nn::xavier_uniform<S>(cfg.width, in, rng));
        // Zero-initialized head: the untrained model predicts zero noise.
        out_w_ = params.add("out.w", nn::Tensor<S>({cfg.latent, cfg.width}));
        out_b_ = params.add("out.b", nn::Tensor<S>({cfg.latent}));
    }

    // x = [z_t, z_c, temb]; hidden blocks are dense + layer norm +
    // LeakyReLU; a linear bridge from x joins the last block's output
    // before the head.
    int graph(nn::Tape<S>& tp, nn::Binding<S>& bind, int z_t, int z_c, int temb) const {
        const int x = tp.concat_cols({z_t, z_c, temb});
        int u = nn::dense(tp, x, bind(in_w_), bind(in_b_));
        for (size_t k = 0; k < cfg.hidden_blocks; ++k) {
            u = nn::dense(tp, u, bind(hidden_w_[k]), bind(hidden_b_[k]));
            u = tp.layer_norm(u, bind(ln_gain_[k]), bind(ln_bias_[k]));
            u = tp.leaky_relu(u, static_cast<S>(cfg.leaky_slope));
        }
        u = tp.add(u, tp.matmul_nt(x, bind(bridge_w_)));
        return nn::dense(tp, u, bind(out_w_), bind(out_b_));
    }

    // Batched prediction: rows of z_t/z_c are samples, t per row.
    std::vector<std::vector<double>> predict_batch(const std::vector<std::vector<double>>& z_t,
                                                   const std::vector<std::vector<double>>& z_c,
                                                   const std::vector<size_t>& t) const {
        require(!z_t.empty() && z_t.size() == z_c.size() && z_t.size() == t.size(),
                "predict_batch: inconsistent batch");
        const size_t B = z_t.size();
        nn::Tensor<S> zt({B, cfg.latent}), zc({B, cfg.cond}), temb({B, cfg.temb_dim});
        for (size_t r = 0; r < B; ++r) {
            require(z_t[r].size() == cfg.latent && z_c[r].size() == cfg.cond,
                    "predict_batch: latent size mismatch");
            for (size_t j = 0; j < cfg.latent; ++j) zt(r, j) = static_cast<S>(z_t[r][j]);
            for (size_t j = 0; j < cfg.cond; ++j) zc(r, j) = static_cast<S>(z_c[r][j]);
            const auto e = time_embedding(t[r], cfg.temb_dim);
            for (size_t j = 0; j < cfg.temb_dim; ++j) temb(r, j) = static_cast<S>(e[j]);
        }
        nn::Tape<S> tp;
        auto& self = const_cast<Denoiser&>(*this);
        nn::Binding<S> bind(tp, self.params);
        const int out = graph(tp, bind, tp.leaf(zt), tp.leaf(zc), tp.leaf(temb));
        std::vector<std::vector<double>> eps(B, std::vector<double>(cfg.latent));
        for (size_t r = 0; r < B; ++r)
            for (size_t j = 0; j < cfg.latent; ++j)
                eps[r][j] = static_cast<double>(tp.val(out)(r, j));
        return eps;
    }

    std::vector<double> predict(const std::vector<double>& z_t, const std::vector<double>& z_c,
                                size_t t) const {
        return predict_batch({z_t}, {z_c}, {t})[0];
    }

private:
    int in_w_ = -1, in_b_ = -1;
    std::vector<int> hidden_w_, hidden_b_, ln_gain_, ln_bias_;
    int bridge_w_ = -1;
    int out_w_ = -1, out_b_ = -1;
};

// ---- whitening ------------------------------------------------------------------

// Latents are standardized per dimension before diffusion and restored
// after sampling; the statistics ride along in the checkpoint.
struct Whitening {
    std::vector<double> mean, std;

    static Whitening fit(const std::vector<std::vector<double>>& latents) {
        require(!latents.empty(), "Whitening::fit: empty set");
        const size_t dim = latents[0].size();
        Whitening w;
        w.mean.assign(dim, 0.0);
        w.std.assign(dim, 0.0);
        for (const auto& z : latents)
            for (size_t j = 0; j < dim; ++j) w.mean[j] += z[j];
        for (double& m : w.mean) m /= static_cast<double>(latents.size());
        for (const auto& z : latents)
            for (size_t j = 0; j < dim; ++j) {
                const double d = z[j] - w.mean[j];
                w.std[j] += d * d;
            }
        for (double& s : w.std) s = std::max(1e-6, std::sqrt(s / static_cast<double>(latents.size())));
        return w;
    }

    static Whitening identity(size_t dim) {
        Whitening w;
        w.mean.assign(dim, 0.0);
        w.std.assign(dim, 1.0);
        return w;
    }

    std::vector<double> apply(const std::vector<double>& z) const {
        require(mean.size() == z.size() && std.size() == z.size(),
                "Whitening::apply: statistics not fitted for this dimension");
        std::vector<double> out(z.size());
        for (size_t j = 0; j < z.size(); ++j) out[j] = (z[j] - mean[j]) / std[j];
        return out;
    }

    std::vector<double> invert(const std::vector<double>& z) const {
        require(mean.size() == z.size() && std.size() == z.size(),
                "Whitening::invert: statistics not fitted for this dimension");
        std::vector<double> out(z.size());
        for (size_t j = 0; j < z.size(); ++j) out[j] = z[j] * std[j] + mean[j];
        return out;
    }
};

// ---- full model -----------------------------------------------------------------

struct ConditionPair {
    std::vector<double> z_c;  // condition latent (raw, unwhitened)
    std::vector<double> z_0;  // target latent
};

template <class S>
struct DiffusionModel {
    Denoiser<S> net;
    NoiseSchedule sched;
    Whitening whiten;

    Checkpoint to_checkpoint() const {
        nlohmann::json hyper = {{"kind", "diffusion"},
                                {"latent", net.cfg.latent},
                                {"cond", net.cfg.cond},
                                {"temb_dim", net.cfg.temb_dim},
                                {"width", net.cfg.width},
                                {"hidden_blocks", net.cfg.hidden_blocks},
                                {"leaky_slope", net.cfg.leaky_slope},
                                {"schedule",
                                 {{"kind", schedule_kind_name(sched.kind)},
                                  {"T_diff", sched.T_diff},
                                  {"beta_min", sched.beta_min},
                                  {"beta_max", sched.beta_max}}},
                                {"whitening", {{"mean", whiten.mean}, {"std", whiten.std}}}};
        return Checkpoint::from_params(net.params, std::move(hyper));
    }

    static DiffusionModel from_checkpoint(const Checkpoint& ck) {
        require(ck.hyper.value("kind", "") == "diffusion", "checkpoint kind is not diffusion");
        DenoiserConfig c;
        c.latent = ck.hyper.at("latent");
        c.cond = ck.hyper.at("cond");
        c.temb_dim = ck.hyper.at("temb_dim");
        c.width = ck.hyper.at("width");
        c.hidden_blocks = ck.hyper.at("hidden_blocks");
        c.leaky_slope = ck.hyper.at("leaky_slope");
        DiffusionModel m;
        Rng rng(0);
        m.net.init(c, rng);
        ck.load_into(m.net.params);
        const auto& js = ck.hyper.at("schedule");
        m.sched = make_schedule(schedule_kind_from_name(js.at("kind")), js.at("T_diff"),
                                js.at("beta_min"), js.at("beta_max"));
        m.whiten.mean = ck.hyper.at("whitening").at("mean").get<std::vector<double>>();
        m.whiten.std = ck.hyper.at("whitening").at("std").get<std::vector<double>>();
        return m;
    }
};

// Reverse diffusion from Gaussian noise, batched across samples that may
// carry different conditions. Returns raw (unwhitened) latents.
template <class S>
std::vector<std::vector<double>> generate_batch(const DiffusionModel<S>& model,
                                                const std::vector<std::vector<double>>& conditions,
                                                Rng& rng) {
    require(!conditions.empty(), "generate_batch: no conditions");
    const size_t B = conditions.size();
    const size_t dim = model.net.cfg.latent;
    std::vector<std::vector<double>> zc(B);
    for (size_t r = 0; r < B; ++r) zc[r] = model.whiten.apply(conditions[r]);
    std::vector<std::vector<double>> z(B, std::vector<double>(dim));
    for (auto& row : z)
        for (double& v : row) v = rng.normal();
    std::vector<size_t> ts(B);
    for (size_t t = model.sched.T_diff; t >= 1; --t) {
        std::fill(ts.begin(), ts.end(), t);
        const auto eps_hat = model.net.predict_batch(z, zc, ts);
        for (size_t r = 0; r < B; ++r) z[r] = reverse_step(z[r], eps_hat[r], t, model.sched, &rng);
    }
    for (auto& row : z) row = model.whiten.invert(row);
    return z;
}

template <class S>
std::vector<double> generate(const DiffusionModel<S>& model, const std::vector<double>& condition,
                             Rng& rng) {
    return generate_batch(model, {condition}, rng)[0];
}

// ---- training -------------------------------------------------------------------

inline TrainConfig diffusion_pretrain_config() {
    TrainConfig cfg;
    cfg.lr = 1e-3;
    cfg.patience = 5;
    return cfg;
}

inline TrainConfig diffusion_finetune_preset(const std::string& name) {
    TrainConfig cfg;
    if (name == "nof1" || name == "keppel") {
        cfg.lr = 0.005;
        cfg.patience = 50;
    } else {
        throw InvalidInput("unknown diffusion fine-tune preset: " + name);
    }
    return cfg;
}

namespace detail {

// Noise-regression MSE (per-sample sum over latent dims, averaged over
// the set) with fixed (t, eps) draws so epochs are comparable.
template <class S>
double diffusion_eval_mse(const DiffusionModel<S>& model, const std::vector<ConditionPair>& pairs,
                          uint64_t noise_seed, size_t batch_size) {
    Rng rng(noise_seed, 0xd1f);
    const size_t dim = model.net.cfg.latent;
    double total = 0.0;
    for (size_t off = 0; off < pairs.size(); off += batch_size) {
        const size_t n = std::min(batch_size, pairs.size() - off);
        std::vector<std::vector<double>> zt(n), zc(n), eps(n);
        std::vector<size_t> ts(n);
        for (size_t k = 0; k < n; ++k) {
            const ConditionPair& p = pairs[off + k];
            ts[k] = 1 + rng.uniform_index(model.sched.T_diff);
            eps[k].resize(dim);
            for (double& v : eps[k]) v = rng.normal();
            zt[k] = forward_sample(model.whiten.apply(p.z_0), ts[k], eps[k], model.sched);
            zc[k] = model.whiten.apply(p.z_c);
        }
        const auto pred = model.net.predict_batch(zt, zc, ts);
        for (size_t k = 0; k < n; ++k)
            for (size_t j = 0; j < dim; ++j) {
                const double d = pred[k][j] - eps[k][j];
                total += d * d;
            }
    }
    return total / static_cast<double>(pairs.size());
}

template <class S>
double diffusion_train_epoch(DiffusionModel<S>& model, const std::vector<ConditionPair>& pairs,
                             const std::vector<size_t>& order, nn::AdamState<S>& adam, double lr,
                             size_t batch_size, Rng& rng) {
    const size_t dim = model.net.cfg.latent;
    double loss_sum = 0.0;
    for (size_t off = 0; off < order.size(); off += batch_size) {
        const size_t n = std::min(batch_size, order.size() - off);
        nn::Tensor<S> zt({n, dim}), zc({n, dim}), temb({n, model.net.cfg.temb_dim}),
            eps({n, dim});
        for (size_t k = 0; k < n; ++k) {
            const ConditionPair& p = pairs[order[off + k]];
            const size_t t = 1 + rng.uniform_index(model.sched.T_diff);
            std::vector<double> e(dim);
            for (double& v : e) v = rng.normal();
            const auto z_t = forward_sample(model.whiten.apply(p.z_0), t, e, model.sched);
            const auto z_c = model.whiten.apply(p.z_c);
            const auto emb = time_embedding(t, model.net.cfg.temb_dim);
            for (size_t j = 0; j < dim; ++j) {
                zt(k, j) = static_cast<S>(z_t[j]);
                zc(k, j) = static_cast<S>(z_c[j]);
                eps(k, j) = static_cast<S>(e[j]);
            }
            for (size_t j = 0; j < model.net.cfg.temb_dim; ++j)
                temb(k, j) = static_cast<S>(emb[j]);
        }
        nn::Tape<S> tp;
        nn::Binding<S> bind(tp, model.net.params);
        const int out = model.net.graph(tp, bind, tp.leaf(zt), tp.leaf(zc), tp.leaf(temb));
        const int diff = tp.sub(out, tp.leaf(eps));
        const int loss = tp.scale(tp.sum(tp.mul(diff, diff)), S(1) / static_cast<S>(n));
        const double loss_val = static_cast<double>(tp.val(loss).data[0]);
        if (!std::isfinite(loss_val))
            throw DegenerateInput("train_diffusion: loss diverged (NaN/inf)");
        loss_sum += loss_val * static_cast<double>(n);
        model.net.params.zero_grad();
        tp.backward(loss);
        bind.pull_grads();
        nn::adam_step(model.net.params, adam, lr);
    }
    return loss_sum / static_cast<double>(order.size());
}

}  // namespace detail

// Noise-prediction pre-training on fixed condition/target pairs.
// Whitening statistics are fitted here (targets and conditions pooled).
// The optional callback can end training early by returning false.
template <class S>
TrainResult train_diffusion(DiffusionModel<S>& model, const std::vector<ConditionPair>& train,
                            const std::vector<ConditionPair>& val, const TrainConfig& cfg,
                            const std::type_identity_t<
                                std::function<bool(DiffusionModel<S>&, const EpochLog&)>>&
                                on_epoch = {}) {
    require(!train.empty() && !val.empty(), "train_diffusion: empty pair set");
    {
        std::vector<std::vector<double>> pool;
        pool.reserve(2 * train.size());
        for (const auto& p : train) {
            pool.push_back(p.z_0);
            pool.push_back(p.z_c);
        }
        model.whiten = Whitening::fit(pool);
    }
    nn::AdamState<S> adam(model.net.params);
    nn::TrainSchedule sched;
    sched.learning_rate = cfg.lr;
    sched.patience = cfg.patience;
    sched.min_lr = cfg.min_lr;
    sched.reduction_factor = cfg.reduction_factor;

    TrainResult result;
    std::vector<nn::Tensor<S>> best_params;
    Rng root(cfg.seed, 0xd1ff);
    std::vector<size_t> order(train.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        Rng epoch_rng = root.stream(epoch);
        epoch_rng.shuffle(order.begin(), order.end());
        const double train_loss = detail::diffusion_train_epoch(
            model, train, order, adam, sched.learning_rate, cfg.batch_size, epoch_rng);
        const double val_loss = detail::diffusion_eval_mse(model, val, cfg.seed, cfg.batch_size);

        EpochLog log;
        log.epoch = epoch;
        log.lr = sched.learning_rate;
        log.train_loss = train_loss;
        log.val_loss = val_loss;
        result.log.push_back(log);

        const auto action = sched.observe(val_loss);
        if (action == nn::TrainSchedule::Action::kImproved) {
            best_params.clear();
            for (const auto& e : model.net.params.entries) best_params.push_back(e.value);
            result.best_val = val_loss;
        }
        if (action == nn::TrainSchedule::Action::kStop) {
            result.stopped_early = true;
            break;
        }
        if (on_epoch && !on_epoch(model, log)) {
            best_params.clear();  // keep the current parameters
            break;
        }
    }
    if (!best_params.empty())
        for (size_t i = 0; i < best_params.size(); ++i)
            model.net.params.entries[i].value = best_params[i];
    detail::write_train_log(cfg.log_csv, result.log);
    return result;
}

// Full generative fine-tuning: every epoch pairs each target with a
// fresh random condition from the same set (self-pairing excluded); a
// fixed held-out pairing drives the plateau schedule.
template <class S>
TrainResult fine_tune_generative(DiffusionModel<S>& model,
                                 const std::vector<std::vector<double>>& latents,
                                 const TrainConfig& cfg) {
    require(latents.size() >= 2, "fine_tune_generative: need at least 2 latents");
    if (model.whiten.mean.empty()) model.whiten = Whitening::fit(latents);

    // Monitoring pairs stay constant across epochs.
    std::vector<ConditionPair> monitor;
    for (size_t i = 0; i < latents.size(); ++i)
        monitor.push_back(ConditionPair{latents[(i + 1) % latents.size()], latents[i]});

    nn::AdamState<S> adam(model.net.params);
    nn::TrainSchedule sched;
    sched.learning_rate = cfg.lr;
    sched.patience = cfg.patience;
    sched.min_lr = cfg.min_lr;
    sched.reduction_factor = cfg.reduction_factor;

    TrainResult result;
    std::vector<nn::Tensor<S>> best_params;
    Rng root(cfg.seed, 0xf17e);
    std::vector<size_t> order(latents.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        Rng epoch_rng = root.stream(epoch);
        // Fresh pairing: target i conditioned on a random j != i.
        std::vector<ConditionPair> pairs(latents.size());
        for (size_t i = 0; i < latents.size(); ++i) {
            size_t j = epoch_rng.uniform_index(latents.size() - 1);
            if (j >= i) ++j;
            pairs[i] = ConditionPair{latents[j], latents[i]};
        }
        epoch_rng.shuffle(order.begin(), order.end());
        const double train_loss = detail::diffusion_train_epoch(
            model, pairs, order, adam, sched.learning_rate, cfg.batch_size, epoch_rng);
        const double val_loss =
            detail::diffusion_eval_mse(model, monitor, cfg.seed, cfg.batch_size);

        EpochLog log;
        log.epoch = epoch;
        log.lr = sched.learning_rate;
        log.train_loss = train_loss;
        log.val_loss = val_loss;
        result.log.push_back(log);

        const auto action = sched.observe(val_loss);
        if (action == nn::TrainSchedule::Action::kImproved) {
            best_params.clear();
            for (const auto& e : model.net.params.entries) best_params.push_back(e.value);
            result.best_val = val_loss;
        }
        if (action == nn::TrainSchedule::Action::kStop) {
            result.stopped_early = true;
            break;
        }
    }
    if (!best_params.empty())
        for (size_t i = 0; i < best_params.size(); ++i)
            model.net.params.entries[i].value = best_params[i];
    detail::write_train_log(cfg.log_csv, result.log);
    return result;
}

}  // namespace uasim
