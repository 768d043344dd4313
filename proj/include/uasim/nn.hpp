// Parameter storage, layers, optimizer and training schedule.
//
// Parameters live in a ParamStore; a Binding lazily mirrors them onto a
// Tape as leaves for one forward/backward pass and pulls the gradients
// back afterwards. Layers are free functions that append to the tape.
#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "uasim/autodiff.hpp"
#include "uasim/rng.hpp"

namespace uasim::nn {

template <class S>
struct ParamStore {
    struct Entry {
        std::string name;
        Tensor<S> value;
        Tensor<S> grad;
    };
    std::vector<Entry> entries;
    std::map<std::string, int> index;

    int add(const std::string& name, Tensor<S> value) {
        require(index.find(name) == index.end(), "ParamStore: duplicate name " + name);
        const int id = static_cast<int>(entries.size());
        Tensor<S> grad(value.shape, S(0));
        entries.push_back(Entry{name, std::move(value), std::move(grad)});
        index[name] = id;
        return id;
    }

    Tensor<S>& value(int id) { return entries[static_cast<size_t>(id)].value; }
    const Tensor<S>& value(int id) const { return entries[static_cast<size_t>(id)].value; }
    Tensor<S>& grad(int id) { return entries[static_cast<size_t>(id)].grad; }

    void zero_grad() {
        for (Entry& e : entries) std::fill(e.grad.data.begin(), e.grad.data.end(), S(0));
    }

    size_t num_scalars() const {
        size_t n = 0;
        for (const Entry& e : entries) n += e.value.size();
        return n;
    }

    template <class S2>
    ParamStore<S2> cast() const {
        ParamStore<S2> out;
        for (const Entry& e : entries) {
            Tensor<S2> v(e.value.shape);
            for (size_t i = 0; i < v.size(); ++i) v.data[i] = static_cast<S2>(e.value.data[i]);
            out.add(e.name, std::move(v));
        }
        return out;
    }
};

// One-pass view of the store on a tape.
template <class S>
struct Binding {
    Tape<S>& tape;
    ParamStore<S>& store;
    std::vector<int> leaf;

    Binding(Tape<S>& t, ParamStore<S>& s) : tape(t), store(s), leaf(s.entries.size(), -1) {}

    int operator()(int param_id) {
        int& l = leaf[static_cast<size_t>(param_id)];
        if (l < 0) l = tape.leaf(store.value(param_id));
        return l;
    }

    // After tape.backward: accumulate leaf grads into the store (+=).
    void pull_grads() {
        for (size_t i = 0; i < leaf.size(); ++i) {
            if (leaf[i] < 0) continue;
            const Tensor<S>& g = tape.grad(leaf[i]);
            Tensor<S>& dst = store.grad(static_cast<int>(i));
            for (size_t k = 0; k < g.size(); ++k) dst.data[k] += g.data[k];
        }
    }
};

// ---- initialization -------------------------------------------------------

template <class S>
Tensor<S> xavier_uniform(size_t rows, size_t cols, Rng& rng) {
    const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
    Tensor<S> t({rows, cols});
    for (S& x : t.data) x = static_cast<S>(rng.uniform(-a, a));
    return t;
}

// Square orthogonal matrix via Gram-Schmidt on a random normal matrix.
template <class S>
Tensor<S> orthogonal(size_t n, Rng& rng) {
    std::vector<std::vector<double>> q(n, std::vector<double>(n));
    for (auto& row : q)
        for (double& x : row) x = rng.normal();
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = 0; j < i; ++j) {
            double dot = 0;
            for (size_t k = 0; k < n; ++k) dot += q[i][k] * q[j][k];
            for (size_t k = 0; k < n; ++k) q[i][k] -= dot * q[j][k];
        }
        double norm = 0;
        for (size_t k = 0; k < n; ++k) norm += q[i][k] * q[i][k];
        norm = std::sqrt(norm);
        if (norm < 1e-12) {
            // Degenerate draw; fall back to a unit vector.
            std::fill(q[i].begin(), q[i].end(), 0.0);
            q[i][i % n] = 1.0;
        } else {
            for (size_t k = 0; k < n; ++k) q[i][k] /= norm;
        }
    }
    Tensor<S> t({n, n});
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < n; ++j) t(i, j) = static_cast<S>(q[i][j]);
    return t;
}

// ---- layers ----------------------------------------------------------------

// y = x W^T + b for row-major batches ([B,in] -> [B,out]).
template <class S>
int dense(Tape<S>& tp, int x, int w, int b) {
    return tp.add_rowvec(tp.matmul_nt(x, w), b);
}

struct LstmLayerIds {
    int w_ih = -1;  // [4H, in]
    int w_hh = -1;  // [4H, H]
    int b = -1;     // [4H]
    size_t input = 0, hidden = 0;
};

// Gate order i, f, g, o. Forget-gate bias starts at 1.
template <class S>
LstmLayerIds lstm_layer_params(ParamStore<S>& ps, const std::string& prefix, size_t input,
                               size_t hidden, Rng& rng) {
    LstmLayerIds ids;
    ids.input = input;
    ids.hidden = hidden;
    ids.w_ih = ps.add(prefix + ".w_ih", xavier_uniform<S>(4 * hidden, input, rng));
    Tensor<S> whh({4 * hidden, hidden});
    for (int g = 0; g < 4; ++g) {
        Tensor<S> block = orthogonal<S>(hidden, rng);
        for (size_t r = 0; r < hidden; ++r)
            for (size_t c = 0; c < hidden; ++c) whh(g * hidden + r, c) = block(r, c);
    }
    ids.w_hh = ps.add(prefix + ".w_hh", std::move(whh));
    Tensor<S> bias({4 * hidden}, S(0));
    for (size_t k = hidden; k < 2 * hidden; ++k) bias.data[k] = S(1);
    ids.b = ps.add(prefix + ".b", std::move(bias));
    return ids;
}

// Standard LSTM cell; returns (h_t, c_t) tape ids.
template <class S>
std::pair<int, int> lstm_cell(Tape<S>& tp, Binding<S>& bind, const LstmLayerIds& p, int x,
                              int h_prev, int c_prev) {
    const size_t H = p.hidden;
    const int gates = tp.add_rowvec(
        tp.add(tp.matmul_nt(x, bind(p.w_ih)), tp.matmul_nt(h_prev, bind(p.w_hh))), bind(p.b));
    const int i = tp.sigmoid(tp.slice_cols(gates, 0, H));
    const int f = tp.sigmoid(tp.slice_cols(gates, H, 2 * H));
    const int g = tp.tanh_(tp.slice_cols(gates, 2 * H, 3 * H));
    const int o = tp.sigmoid(tp.slice_cols(gates, 3 * H, 4 * H));
    const int c = tp.add(tp.mul(f, c_prev), tp.mul(i, g));
    const int h = tp.mul(o, tp.tanh_(c));
    return {h, c};
}

// Stacked bidirectional LSTM. Layer k consumes layer k-1's per-step
// [h_fwd, h_bwd] concatenations; all states start at zero.
template <class S>
struct BilstmStack {
    size_t num_layers = 3;
    size_t input = 0, hidden = 0;
    std::vector<LstmLayerIds> fwd, bwd;

    void init(ParamStore<S>& ps, const std::string& prefix, size_t in, size_t h, size_t layers,
              Rng& rng) {
        num_layers = layers;
        input = in;
        hidden = h;
        fwd.clear();
        bwd.clear();
        for (size_t l = 0; l < layers; ++l) {
            const size_t lin = l == 0 ? in : 2 * h;
            fwd.push_back(lstm_layer_params(ps, prefix + ".l" + std::to_string(l) + ".fwd", lin, h, rng));
            bwd.push_back(lstm_layer_params(ps, prefix + ".l" + std::to_string(l) + ".bwd", lin, h, rng));
        }
    }

    struct Out {
        std::vector<int> steps;  // T ids, each [B, 2H]
        int top_fwd_last = -1;   // forward hidden at step T, top layer
        int top_bwd_first = -1;  // backward hidden at step 1, top layer
    };

    Out run(Tape<S>& tp, Binding<S>& bind, const std::vector<int>& x_steps) const {
        require(!x_steps.empty(), "bilstm: empty sequence");
        const size_t T = x_steps.size();
        const size_t B = tp.val(x_steps[0]).rows();
        std::vector<int> cur = x_steps;
        Out out;
        for (size_t l = 0; l < num_layers; ++l) {
            std::vector<int> hs_f(T), hs_b(T);
            int h = tp.leaf(Tensor<S>({B, hidden}, S(0)));
            int c = tp.leaf(Tensor<S>({B, hidden}, S(0)));
            for (size_t t = 0; t < T; ++t) {
                std::tie(h, c) = lstm_cell(tp, bind, fwd[l], cur[t], h, c);
                hs_f[t] = h;
            }
            const int fwd_last = h;
            h = tp.leaf(Tensor<S>({B, hidden}, S(0)));
            c = tp.leaf(Tensor<S>({B, hidden}, S(0)));
            for (size_t t = T; t-- > 0;) {
                std::tie(h, c) = lstm_cell(tp, bind, bwd[l], cur[t], h, c);
                hs_b[t] = h;
            }
            const int bwd_first = h;
            for (size_t t = 0; t < T; ++t) cur[t] = tp.concat_cols({hs_f[t], hs_b[t]});
            if (l + 1 == num_layers) {
                out.top_fwd_last = fwd_last;
                out.top_bwd_first = bwd_first;
            }
        }
        out.steps = std::move(cur);
        return out;
    }
};

// ---- optimizer --------------------------------------------------------------

template <class S>
struct AdamState {
    std::vector<Tensor<S>> m, v;
    uint64_t step = 0;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

    explicit AdamState(const ParamStore<S>& ps) {
        for (const auto& e : ps.entries) {
            m.emplace_back(e.value.shape, S(0));
            v.emplace_back(e.value.shape, S(0));
        }
    }
};

template <class S>
void adam_step(ParamStore<S>& ps, AdamState<S>& st, double lr) {
    require(lr > 0, "adam_step: lr must be positive");
    st.step++;
    const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
    const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
    for (size_t p = 0; p < ps.entries.size(); ++p) {
        auto& value = ps.entries[p].value.data;
        auto& grad = ps.entries[p].grad.data;
        auto& m = st.m[p].data;
        auto& v = st.v[p].data;
        for (size_t i = 0; i < value.size(); ++i) {
            const double g = static_cast<double>(grad[i]);
            const double mi = st.beta1 * static_cast<double>(m[i]) + (1.0 - st.beta1) * g;
            const double vi = st.beta2 * static_cast<double>(v[i]) + (1.0 - st.beta2) * g * g;
            m[i] = static_cast<S>(mi);
            v[i] = static_cast<S>(vi);
            const double mhat = mi / bc1;
            const double vhat = vi / bc2;
            value[i] -= static_cast<S>(lr * mhat / (std::sqrt(vhat) + st.eps));
        }
    }
}

// ---- plateau schedule --------------------------------------------------------

struct TrainSchedule {
    double learning_rate = 1e-3;
    int patience = 3;
    double reduction_factor = 10.0;
    double min_lr = 1e-6;
    double best_val = std::numeric_limits<double>::infinity();
    int epochs_since_best = 0;

    enum class Action { kImproved, kContinue, kReduced, kStop };

    Action observe(double val_loss) {
        require(std::isfinite(val_loss), "plateau_step: non-finite validation loss");
        if (val_loss < best_val) {
            best_val = val_loss;
            epochs_since_best = 0;
            return Action::kImproved;
        }
        epochs_since_best++;
        if (epochs_since_best >= patience) {
            learning_rate /= reduction_factor;
            epochs_since_best = 0;
            if (learning_rate < min_lr) return Action::kStop;
            return Action::kReduced;
        }
        return Action::kContinue;
    }
};

// ---- finite-difference harness -------------------------------------------------

// Central differences on a random subset of parameter entries. eval()
// must return the loss without touching gradients; the caller computes
// analytic gradients into the store beforehand. Returns the max relative
// error over the probed entries.
//
// A central difference carries roundoff noise of order eps_mach*|L|/eps
// in absolute terms, so components whose gradient magnitude sits below
// that noise over target_rel cannot be resolved at the requested
// precision; those draws are skipped and replaced by further probes.
template <class S, class Eval>
double gradient_check(ParamStore<S>& ps, Eval&& eval, double eps, size_t probes, Rng& rng,
                      double target_rel = 1e-4) {
    const double l0 = eval();
    const double noise =
        64.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(l0)) / (2.0 * eps);
    const double resolve_floor = noise / target_rel;
    double max_rel = 0.0;
    size_t checked = 0;
    for (size_t attempt = 0; attempt < 50 * probes && checked < probes; ++attempt) {
        const size_t p = rng.uniform_index(ps.entries.size());
        auto& value = ps.entries[p].value.data;
        const size_t i = rng.uniform_index(value.size());
        const S orig = value[i];
        value[i] = orig + static_cast<S>(eps);
        const double lp = eval();
        value[i] = orig - static_cast<S>(eps);
        const double lm = eval();
        value[i] = orig;
        const double numeric = (lp - lm) / (2.0 * eps);
        const double analytic = static_cast<double>(ps.entries[p].grad.data[i]);
        const double scale = std::abs(analytic) + std::abs(numeric);
        if (scale < resolve_floor) continue;
        max_rel = std::max(max_rel, std::abs(analytic - numeric) / scale);
        ++checked;
    }
    return max_rel;
}

}  // namespace uasim::nn
