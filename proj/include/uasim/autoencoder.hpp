// Bi-LSTM sequence autoencoder: FeatureSeq (T x 3D) -> 128-dim latent
// and back, trained with the composite amplitude/phase loss.
#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "uasim/checkpoint.hpp"
#include "uasim/nn.hpp"
#include "uasim/tvir.hpp"

namespace uasim {

struct AEConfig {
    size_t T = 20;
    size_t D = 250;
    size_t hidden = 64;   // per direction
    size_t latent = 128;
    size_t layers = 3;
    double eta = 1.0;     // amplitude-phase weighting factor
};

struct AELossBreakdown {
    double amp_term = 0.0;
    double phase_term = 0.0;
    double eta = 1.0;
    double total() const { return amp_term + eta * phase_term; }
};

// Direct (non-graph) evaluation of the composite loss for one pair.
// Both the ground-truth and reconstructed trig terms are amplitude
// weighted: |A sin - Ahat sinhat|^2 + |A cos - Ahat coshat|^2.
inline AELossBreakdown ae_loss(const FeatureSeq& h, const FeatureSeq& h_hat, double eta = 1.0) {
    require(eta >= 0.0, "ae_loss: eta must be >= 0");
    require(h.T == h_hat.T && h.D == h_hat.D, "ae_loss: shape mismatch");
    AELossBreakdown out;
    out.eta = eta;
    const size_t d = h.D;
    for (size_t t = 0; t < h.T; ++t) {
        const double* a = h.row(t);
        const double* b = h_hat.row(t);
        for (size_t j = 0; j < d; ++j) {
            const double da = a[j] - b[j];
            out.amp_term += da * da;
            const double ds = a[j] * a[d + j] - b[j] * b[d + j];
            const double dc = a[j] * a[2 * d + j] - b[j] * b[2 * d + j];
            out.phase_term += ds * ds + dc * dc;
        }
    }
    return out;
}

template <class S>
class Autoencoder {
public:
    AEConfig cfg;
    nn::ParamStore<S> params;

    void init(const AEConfig& c, Rng& rng) {
        cfg = c;
        params = nn::ParamStore<S>();
        enc_.init(params, "enc", 3 * cfg.D, cfg.hidden, cfg.layers, rng);
        latent_w_ = params.add("enc.latent.w",
                               nn::xavier_uniform<S>(cfg.latent, 2 * cfg.hidden, rng));
        latent_b_ = params.add("enc.latent.b", nn::Tensor<S>({cfg.latent}));
        dec_in_w_ = params.add("dec.in.w",
                               nn::xavier_uniform<S>(2 * cfg.hidden, cfg.latent, rng));
        dec_in_b_ = params.add("dec.in.b", nn::Tensor<S>({2 * cfg.hidden}));
        dec_.init(params, "dec", 2 * cfg.hidden, cfg.hidden, cfg.layers, rng);
        out_w_ = params.add("dec.out.w", nn::xavier_uniform<S>(3 * cfg.D, 2 * cfg.hidden, rng));
        out_b_ = params.add("dec.out.b", nn::Tensor<S>({3 * cfg.D}));
    }

    // Latent = dense(concat(final forward h, final backward h)) of the
    // top encoder layer.
    int encode_graph(nn::Tape<S>& tp, nn::Binding<S>& bind, const std::vector<int>& steps) const {
        const auto out = enc_.run(tp, bind, steps);
        const int pooled = tp.concat_cols({out.top_fwd_last, out.top_bwd_first});
        return nn::dense(tp, pooled, bind(latent_w_), bind(latent_b_));
    }

    // The latent is projected once and fed as the input of every decoder
    // step; the amplitude channel passes through softplus.
    std::vector<int> decode_graph(nn::Tape<S>& tp, nn::Binding<S>& bind, int z) const {
        const int zin = nn::dense(tp, z, bind(dec_in_w_), bind(dec_in_b_));
        const std::vector<int> steps(cfg.T, zin);
        const auto out = dec_.run(tp, bind, steps);
        std::vector<int> ys;
        ys.reserve(cfg.T);
        for (int s : out.steps) {
            const int y = nn::dense(tp, s, bind(out_w_), bind(out_b_));
            const int amp = tp.softplus(tp.slice_cols(y, 0, cfg.D));
            const int trig = tp.slice_cols(y, cfg.D, 3 * cfg.D);
            ys.push_back(tp.concat_cols({amp, trig}));
        }
        return ys;
    }

    // Composite loss over per-step batches; mean of per-sample sums.
    int loss_graph(nn::Tape<S>& tp, const std::vector<int>& target_steps,
                   const std::vector<int>& recon_steps, double eta) const {
        require(target_steps.size() == recon_steps.size(), "loss_graph: step count mismatch");
        const size_t d = cfg.D;
        int amp_total = -1, phase_total = -1;
        for (size_t t = 0; t < target_steps.size(); ++t) {
            const int ht = target_steps[t];
            const int hr = recon_steps[t];
            const int a = tp.slice_cols(ht, 0, d);
            const int s = tp.slice_cols(ht, d, 2 * d);
            const int c = tp.slice_cols(ht, 2 * d, 3 * d);
            const int ar = tp.slice_cols(hr, 0, d);
            const int sr = tp.slice_cols(hr, d, 2 * d);
            const int cr = tp.slice_cols(hr, 2 * d, 3 * d);
            const int da = tp.sub(a, ar);
            const int amp = tp.sum(tp.mul(da, da));
            const int dsin = tp.sub(tp.mul(a, s), tp.mul(ar, sr));
            const int dcos = tp.sub(tp.mul(a, c), tp.mul(ar, cr));
            const int ph = tp.add(tp.sum(tp.mul(dsin, dsin)), tp.sum(tp.mul(dcos, dcos)));
            amp_total = amp_total < 0 ? amp : tp.add(amp_total, amp);
            phase_total = phase_total < 0 ? ph : tp.add(phase_total, ph);
        }
        const size_t batch = tp.val(target_steps[0]).rows();
        const S inv_b = S(1) / static_cast<S>(batch);
        return tp.add(tp.scale(amp_total, inv_b),
                      tp.scale(phase_total, static_cast<S>(eta) * inv_b));
    }

    std::vector<double> encode(const FeatureSeq& h) const {
        require(h.T == cfg.T && h.D == cfg.D, "encode: shape mismatch");
        nn::Tape<S> tp;
        auto& self = const_cast<Autoencoder&>(*this);
        nn::Binding<S> bind(tp, self.params);
        const int z = encode_graph(tp, bind, make_steps(tp, {&h}));
        return tp.val(z).to_vector();
    }

    FeatureSeq decode(const std::vector<double>& z) const {
        require(z.size() == cfg.latent, "decode: latent size mismatch");
        nn::Tape<S> tp;
        auto& self = const_cast<Autoencoder&>(*this);
        nn::Binding<S> bind(tp, self.params);
        const int zid = tp.leaf(nn::Tensor<S>::from_vector({1, cfg.latent}, z));
        const auto steps = decode_graph(tp, bind, zid);
        FeatureSeq out(cfg.T, cfg.D);
        for (size_t t = 0; t < cfg.T; ++t) {
            const auto& v = tp.val(steps[t]);
            for (size_t j = 0; j < out.width(); ++j) out.row(t)[j] = static_cast<double>(v.data[j]);
        }
        return out;
    }

    FeatureSeq reconstruct(const FeatureSeq& h) const { return decode(encode(h)); }

    // Per-step [B x 3D] leaves for a batch of sequences.
    std::vector<int> make_steps(nn::Tape<S>& tp, const std::vector<const FeatureSeq*>& batch) const {
        std::vector<int> ids(cfg.T);
        for (size_t t = 0; t < cfg.T; ++t) {
            nn::Tensor<S> x({batch.size(), 3 * cfg.D});
            for (size_t k = 0; k < batch.size(); ++k) {
                require(batch[k]->T == cfg.T && batch[k]->D == cfg.D, "batch shape mismatch");
                const double* src = batch[k]->row(t);
                for (size_t j = 0; j < 3 * cfg.D; ++j) x(k, j) = static_cast<S>(src[j]);
            }
            ids[t] = tp.leaf(std::move(x));
        }
        return ids;
    }

    Checkpoint to_checkpoint() const {
        nlohmann::json hyper = {{"kind", "autoencoder"}, {"T", cfg.T},     {"D", cfg.D},
                                {"hidden", cfg.hidden},  {"latent", cfg.latent},
                                {"layers", cfg.layers},  {"eta", cfg.eta}};
        return Checkpoint::from_params(params, std::move(hyper));
    }

    static Autoencoder from_checkpoint(const Checkpoint& ck) {
        require(ck.hyper.value("kind", "") == "autoencoder",
                "checkpoint kind is not autoencoder");
        AEConfig c;
        c.T = ck.hyper.at("T");
        c.D = ck.hyper.at("D");
        c.hidden = ck.hyper.at("hidden");
        c.latent = ck.hyper.at("latent");
        c.layers = ck.hyper.value("layers", size_t{3});
        c.eta = ck.hyper.at("eta");
        Autoencoder model;
        Rng rng(0);
        model.init(c, rng);
        ck.load_into(model.params);
        return model;
    }

private:
    nn::BilstmStack<S> enc_, dec_;
    int latent_w_ = -1, latent_b_ = -1;
    int dec_in_w_ = -1, dec_in_b_ = -1;
    int out_w_ = -1, out_b_ = -1;
};

struct TrainConfig {
    double lr = 1e-3;
    int patience = 3;
    double min_lr = 1e-6;
    double reduction_factor = 10.0;
    size_t batch_size = 64;
    size_t max_epochs = 500;
    uint64_t seed = 0;
    std::string log_csv;  // optional per-epoch log
};

struct EpochLog {
    size_t epoch = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double amp_term = 0.0;
    double phase_term = 0.0;
};

struct TrainResult {
    std::vector<EpochLog> log;
    double best_val = std::numeric_limits<double>::infinity();
    bool stopped_early = false;
};

// Named fine-tuning presets (learning rate, plateau patience).
inline TrainConfig ae_finetune_preset(const std::string& name) {
    TrainConfig cfg;
    if (name == "sim-noisy") {
        cfg.lr = 1e-4;
        cfg.patience = 5;
    } else if (name == "nov2024") {
        cfg.lr = 0.01;
        cfg.patience = 10;
    } else if (name == "nof1") {
        cfg.lr = 0.005;
        cfg.patience = 15;
    } else if (name == "keppel") {
        cfg.lr = 0.001;
        cfg.patience = 10;
    } else {
        throw InvalidInput("unknown fine-tune preset: " + name);
    }
    return cfg;
}

namespace detail {

template <class S>
double ae_eval_loss(const Autoencoder<S>& model, const std::vector<FeatureSeq>& items,
                    double eta, size_t batch_size, AELossBreakdown* breakdown = nullptr) {
    auto& mutable_model = const_cast<Autoencoder<S>&>(model);
    double total = 0.0;
    AELossBreakdown acc;
    acc.eta = eta;
    for (size_t off = 0; off < items.size(); off += batch_size) {
        const size_t n = std::min(batch_size, items.size() - off);
        std::vector<const FeatureSeq*> batch(n);
        for (size_t k = 0; k < n; ++k) batch[k] = &items[off + k];
        nn::Tape<S> tp;
        nn::Binding<S> bind(tp, mutable_model.params);
        const auto steps = model.make_steps(tp, batch);
        const int z = model.encode_graph(tp, bind, steps);
        const auto recon = model.decode_graph(tp, bind, z);
        const int loss = model.loss_graph(tp, steps, recon, eta);
        total += static_cast<double>(tp.val(loss).data[0]) * static_cast<double>(n);
        if (breakdown) {
            FeatureSeq h_hat(model.cfg.T, model.cfg.D);
            for (size_t k = 0; k < n; ++k) {
                for (size_t t = 0; t < model.cfg.T; ++t) {
                    const auto& v = tp.val(recon[t]);
                    for (size_t j = 0; j < h_hat.width(); ++j)
                        h_hat.row(t)[j] = static_cast<double>(v(k, j));
                }
                const AELossBreakdown b = ae_loss(items[off + k], h_hat, eta);
                acc.amp_term += b.amp_term;
                acc.phase_term += b.phase_term;
            }
        }
    }
    if (breakdown) {
        acc.amp_term /= static_cast<double>(items.size());
        acc.phase_term /= static_cast<double>(items.size());
        *breakdown = acc;
    }
    return total / static_cast<double>(items.size());
}

inline void write_train_log(const std::string& path, const std::vector<EpochLog>& log) {
    if (path.empty()) return;
    std::ofstream os(path);
    if (!os) throw IoError("cannot open training log " + path);
    os << "epoch,lr,train_loss,val_loss,amp_term,phase_term\n";
    char buf[256];
    for (const EpochLog& e : log) {
        std::snprintf(buf, sizeof buf, "%zu,%.10g,%.10g,%.10g,%.10g,%.10g\n", e.epoch, e.lr,
                      e.train_loss, e.val_loss, e.amp_term, e.phase_term);
        os << buf;
    }
}

}  // namespace detail

// Adam + reduce-on-plateau + early stop. Returns with the model holding
// the best-validation parameters. The optional per-epoch callback can
// end training early by returning false (e.g. a target was reached).
template <class S>
TrainResult train_autoencoder(Autoencoder<S>& model, const std::vector<FeatureSeq>& train,
                              const std::vector<FeatureSeq>& val, const TrainConfig& cfg,
                              const std::type_identity_t<
                                  std::function<bool(Autoencoder<S>&, const EpochLog&)>>&
                                  on_epoch = {}) {
    require(!train.empty() && !val.empty(), "train_autoencoder: empty dataset");
    nn::AdamState<S> adam(model.params);
    nn::TrainSchedule sched;
    sched.learning_rate = cfg.lr;
    sched.patience = cfg.patience;
    sched.min_lr = cfg.min_lr;
    sched.reduction_factor = cfg.reduction_factor;

    TrainResult result;
    std::vector<nn::Tensor<S>> best_params;
    const double eta = model.cfg.eta;
    Rng shuffle_root(cfg.seed, 0x5e9);

    std::vector<size_t> order(train.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        Rng epoch_rng = shuffle_root.stream(epoch);
        epoch_rng.shuffle(order.begin(), order.end());
        double train_loss_sum = 0.0;
        for (size_t off = 0; off < order.size(); off += cfg.batch_size) {
            const size_t n = std::min(cfg.batch_size, order.size() - off);
            std::vector<const FeatureSeq*> batch(n);
            for (size_t k = 0; k < n; ++k) batch[k] = &train[order[off + k]];
            nn::Tape<S> tp;
            nn::Binding<S> bind(tp, model.params);
            const auto steps = model.make_steps(tp, batch);
            const int z = model.encode_graph(tp, bind, steps);
            const auto recon = model.decode_graph(tp, bind, z);
            const int loss = model.loss_graph(tp, steps, recon, eta);
            const double loss_val = static_cast<double>(tp.val(loss).data[0]);
            if (!std::isfinite(loss_val))
                throw DegenerateInput("train_autoencoder: loss diverged (NaN/inf) at epoch " +
                                      std::to_string(epoch));
            train_loss_sum += loss_val * static_cast<double>(n);
            model.params.zero_grad();
            tp.backward(loss);
            bind.pull_grads();
            nn::adam_step(model.params, adam, sched.learning_rate);
        }
        AELossBreakdown val_breakdown;
        const double val_loss =
            detail::ae_eval_loss(model, val, eta, cfg.batch_size, &val_breakdown);
        if (!std::isfinite(val_loss))
            throw DegenerateInput("train_autoencoder: validation loss diverged");

        EpochLog log;
        log.epoch = epoch;
        log.lr = sched.learning_rate;
        log.train_loss = train_loss_sum / static_cast<double>(train.size());
        log.val_loss = val_loss;
        log.amp_term = val_breakdown.amp_term;
        log.phase_term = val_breakdown.phase_term;
        result.log.push_back(log);

        const auto action = sched.observe(val_loss);
        if (action == nn::TrainSchedule::Action::kImproved) {
            best_params.clear();
            for (const auto& e : model.params.entries) best_params.push_back(e.value);
            result.best_val = val_loss;
        }
        if (action == nn::TrainSchedule::Action::kStop) {
            result.stopped_early = true;
            break;
        }
        if (on_epoch && !on_epoch(model, log)) {
            // Caller-requested stop: keep the current parameters.
            best_params.clear();
            break;
        }
    }
    if (!best_params.empty())
        for (size_t i = 0; i < best_params.size(); ++i)
            model.params.entries[i].value = best_params[i];
    detail::write_train_log(cfg.log_csv, result.log);
    return result;
}

// Amplitude-reconstruction NMSE (dB) over a set: sum|A-Ahat|^2 / sum A^2.
template <class S>
double amplitude_nmse_db(const Autoencoder<S>& model, const std::vector<FeatureSeq>& items,
                         size_t batch_size = 64) {
    auto& mutable_model = const_cast<Autoencoder<S>&>(model);
    double num = 0.0, den = 0.0;
    for (size_t off = 0; off < items.size(); off += batch_size) {
        const size_t n = std::min(batch_size, items.size() - off);
        std::vector<const FeatureSeq*> batch(n);
        for (size_t k = 0; k < n; ++k) batch[k] = &items[off + k];
        nn::Tape<S> tp;
        nn::Binding<S> bind(tp, mutable_model.params);
        const auto steps = model.make_steps(tp, batch);
        const int z = model.encode_graph(tp, bind, steps);
        const auto recon = model.decode_graph(tp, bind, z);
        for (size_t t = 0; t < model.cfg.T; ++t) {
            const auto& rhat = tp.val(recon[t]);
            for (size_t k = 0; k < n; ++k) {
                const double* href = items[off + k].row(t);
                for (size_t j = 0; j < model.cfg.D; ++j) {
                    const double d = href[j] - static_cast<double>(rhat(k, j));
                    num += d * d;
                    den += href[j] * href[j];
                }
            }
        }
    }
    require(den > 0.0, "amplitude_nmse_db: zero-amplitude reference");
    return power_to_db(num / den);
}

}  // namespace uasim
