// Reverse-mode autodiff tape over Tensor<S>.
//
// Nodes are created in topological order, so the backward pass is a
// single reverse sweep. Gradients accumulate with +=, which makes
// repeated use of a node (including ops whose two inputs are the same
// node) come out right. Matrix products go through Eigen maps; the rest
// is scalar loops.
#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "uasim/tensor.hpp"

namespace uasim::nn {

template <class S>
class Tape {
public:
    using Ten = Tensor<S>;
    using EMat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    using Map = Eigen::Map<EMat>;
    using CMap = Eigen::Map<const EMat>;

    int leaf(Ten v) { return push(std::move(v), nullptr); }

    const Ten& val(int id) const { return nodes_[static_cast<size_t>(id)].val; }
    const Ten& grad(int id) const { return nodes_[static_cast<size_t>(id)].grad; }
    size_t num_nodes() const { return nodes_.size(); }
    void clear() { nodes_.clear(); }

    // ---- ops ------------------------------------------------------------

    // [m,k] x [k,n] -> [m,n]
    int matmul(int a, int b) {
        const Ten& A = val(a);
        const Ten& B = val(b);
        require(A.cols() == B.rows(), "matmul: inner dimensions disagree");
        Ten out({A.rows(), B.cols()});
        mapc(out) = mapc_const(A) * mapc_const(B);
        return push(std::move(out), [a, b](Tape& tp, int id) {
            const Ten& g = tp.nodes_[id].grad;
            tp.mapc(tp.nodes_[a].grad) += mapc_const(g) * mapc_const(tp.val(b)).transpose();
            tp.mapc(tp.nodes_[b].grad) += mapc_const(tp.val(a)).transpose() * mapc_const(g);
        });
    }

    // [m,k] x [n,k]^T -> [m,n]
    int matmul_nt(int a, int b) {
        const Ten& A = val(a);
        const Ten& B = val(b);
        require(A.cols() == B.cols(), "matmul_nt: inner dimensions disagree");
        Ten out({A.rows(), B.rows()});
        mapc(out) = mapc_const(A) * mapc_const(B).transpose();
        return push(std::move(out), [a, b](Tape& tp, int id) {
            const Ten& g = tp.nodes_[id].grad;
            tp.mapc(tp.nodes_[a].grad) += mapc_const(g) * mapc_const(tp.val(b));
            tp.mapc(tp.nodes_[b].grad) += mapc_const(g).transpose() * mapc_const(tp.val(a));
        });
    }

    int add(int a, int b) {
        const Ten& A = val(a);
        const Ten& B = val(b);
        require(A.same_shape(B), "add: shape mismatch");
        Ten out = A;
        for (size_t i = 0; i < out.size(); ++i) out.data[i] += B.data[i];
        return push(std::move(out), [a, b](Tape& tp, int id) {
            const Ten& g = tp.nodes_[id].grad;
            for (size_t i = 0; i < g.size(); ++i) {
                tp.nodes_[a].grad.data[i] += g.data[i];
                tp.nodes_[b].grad.data[i] += g.data[i];
            }
        });
    }

    int sub(int a, int b) {
        const Ten& A = val(a);
        const Ten& B = val(b);
        require(A.same_shape(B), "sub: shape mismatch");
        Ten out = A;
        for (size_t i = 0; i < out.size(); ++i) out.data[i] -= B.data[i];
        return push(std::move(out), [a, b](Tape& tp, int id) {
            const Ten& g = tp.nodes_[id].grad;
            for (size_t i = 0; i < g.size(); ++i) {
                tp.nodes_[a].grad.data[i] += g.data[i];
                tp.nodes_[b].grad.data[i] -= g.data[i];
            }
        });
    }

    int mul(int a, int b) {
        const Ten& A = val(a);
        const Ten& B = val(b);
        require(A.same_shape(B), "mul: shape mismatch");
        Ten out = A;
        for (size_t i = 0; i < out.size(); ++i) out.data[i] *= B.data[i];
        return push(std::move(out), [a, b](Tape& tp, int id) {
            const Ten& g = tp.nodes_[id].grad;
            const Ten& A2 = tp.val(a);
            const Ten& B2 = tp.val(b);
            for (size_t i = 0; i < g.size(); ++i) {
                tp.nodes_[a].grad.data[i] += g.data[i] * B2.data[i];
                tp.nodes_[b].grad.data[i] += g.data[i] * A2.data[i];
            }
        });
    }

    int scale(int a, S c) {
        Ten out = val(a);
        for (S& x : out.data) x *= c;
        return push(std::move(out), [a, c](Tape& tp, int id) {
            const Ten& g = tp.nodes_[id].grad;
            for (size_t i = 0; i < g.size(); ++i) tp.nodes_[a].grad.data[i] += c * g.data[i];
        });
    }

    // Row-wise broadcast of a length-n vector over an [m,n] matrix.
    int add_rowvec(int a, int v) {
        const Ten& A = val(a);
        const Ten& V = val(v);
        require(V.size() == A.cols(), "add_rowvec: width mismatch");
        Ten out = A;
        for (size_t r = 0; r < A.rows(); ++r)
            for (size_t c = 0; c < A.cols(); ++c) out(r, c) += V.data[c];
        return push(std::move(out), [a, v](Tape& tp, int id) {
            const Ten& g = tp.nodes_[id].grad;
            Ten& ga = tp.nodes_[a].grad;
            Ten& gv = tp.nodes_[v].grad;
            for (size_t r = 0; r < g.rows(); ++r)
                for (size_t c = 0; c < g.cols(); ++c) {
                    ga(r, c) += g(r, c);
                    gv.data[c] += g(r, c);
                }
        });
    }

    int sigmoid(int a) {
        Ten out = val(a);
        for (S& x : out.data) x = S(1) / (S(1) + std::exp(-x));
        return push(std::move(out), [a](Tape& tp, int id) {
            const Ten& g = tp.nodes_[id].grad;
            const Ten& y = tp.val(id);
            for (size_t i = 0; i < g.size(); ++i)
                tp.nodes_[a].grad.data[i] += g.data[i] * y.data[i] * (S(1) - y.data[i]);
        });
    }

    int tanh_(int a) {
        Ten out = val(a);
        for (S& x : out.data) x = std::tanh(x);
        return push(std::move(out), [a](Tape& tp, int id) {
            const Ten& g = tp.nodes_[id].grad;
            const Ten& y = tp.val(id);
            for (size_t i = 0; i < g.size(); ++i)
                tp.nodes_[a].grad.data[i] += g.data[i] * (S(1) - y.data[i] * y.data[i]);
        });
    }

    int leaky_relu(int a, S slope) {
        Ten out = val(a);
        for (S& x : out.data) x = x >= S(0) ? x : slope * x;
        return push(std::move(out), [a, slope](Tape& tp, int id) {
            const Ten& g = tp.nodes_[id].grad;
            const Ten& x = tp.val(a);
            for (size_t i = 0; i < g.size(); ++i)
                tp.nodes_[a].grad.data[i] += g.data[i] * (x.data[i] >= S(0) ? S(1) : slope);
        });
    }

    int softplus(int a) {
        Ten out = val(a);
        for (S& x : out.data)
            x = x > S(0) ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
        return push(std::move(out), [a](Tape& tp, int id) {
            const Ten& g = tp.nodes_[id].grad;
            const Ten& x = tp.val(a);
            for (size_t i = 0; i < g.size(); ++i) {
                const S sig = S(1) / (S(1) + std::exp(-x.data[i]));
                tp.nodes_[a].grad.data[i] += g.data[i] * sig;
            }
        });
    }

    int concat_cols(const std::vector<int>& parts) {
        require(!parts.empty(), "concat_cols: no parts");
        const size_t m = val(parts[0]).rows();
        size_t total = 0;
        for (int p : parts) {
            require(val(p).rows() == m, "concat_cols: row mismatch");
            total += val(p).cols();
        }
        Ten out({m, total});
        size_t off = 0;
        for (int p : parts) {
            const Ten& P = val(p);
            for (size_t r = 0; r < m; ++r)
                for (size_t c = 0; c < P.cols(); ++c) out(r, off + c) = P(r, c);
            off += P.cols();
        }
        return push(std::move(out), [parts](Tape& tp, int id) {
            const Ten& g = tp.nodes_[id].grad;
            size_t off2 = 0;
            for (int p : parts) {
                Ten& gp = tp.nodes_[p].grad;
                for (size_t r = 0; r < gp.rows(); ++r)
                    for (size_t c = 0; c < gp.cols(); ++c) gp(r, c) += g(r, off2 + c);
                off2 += gp.cols();
            }
        });
    }

    int slice_cols(int a, size_t c0, size_t c1) {
        const Ten& A = val(a);
        require(c0 < c1 && c1 <= A.cols(), "slice_cols: bad range");
        Ten out({A.rows(), c1 - c0});
        for (size_t r = 0; r < A.rows(); ++r)
            for (size_t c = c0; c < c1; ++c) out(r, c - c0) = A(r, c);
        return push(std::move(out), [a, c0](Tape& tp, int id) {
            const Ten& g = tp.nodes_[id].grad;
            Ten& ga = tp.nodes_[a].grad;
            for (size_t r = 0; r < g.rows(); ++r)
                for (size_t c = 0; c < g.cols(); ++c) ga(r, c0 + c) += g(r, c);
        });
    }

    // Per-row standardization over the feature axis, then affine.
    int layer_norm(int a, int gain, int bias, S eps = S(1e-5)) {
        const Ten& A = val(a);
        const size_t n = A.cols();
        require(n >= 2, "layer_norm: feature length must be >= 2");
        require(val(gain).size() == n && val(bias).size() == n, "layer_norm: affine size");
        Ten out({A.rows(), n});
        Ten xhat({A.rows(), n});
        Ten inv_sigma({A.rows()});
        for (size_t r = 0; r < A.rows(); ++r) {
            S mean = 0;
            for (size_t c = 0; c < n; ++c) mean += A(r, c);
            mean /= static_cast<S>(n);
            S var = 0;
            for (size_t c = 0; c < n; ++c) {
                const S d = A(r, c) - mean;
                var += d * d;
            }
            var /= static_cast<S>(n);
            const S is = S(1) / std::sqrt(var + eps);
            inv_sigma.data[r] = is;
            for (size_t c = 0; c < n; ++c) {
                const S xh = (A(r, c) - mean) * is;
                xhat(r, c) = xh;
                out(r, c) = xh * val(gain).data[c] + val(bias).data[c];
            }
        }
        auto xhat_p = std::make_shared<Ten>(std::move(xhat));
        auto is_p = std::make_shared<Ten>(std::move(inv_sigma));
        return push(std::move(out), [a, gain, bias, xhat_p, is_p](Tape& tp, int id) {
            const Ten& g = tp.nodes_[id].grad;
            const size_t n2 = g.cols();
            Ten& ga = tp.nodes_[a].grad;
            Ten& gg = tp.nodes_[gain].grad;
            Ten& gb = tp.nodes_[bias].grad;
            const Ten& gainv = tp.val(gain);
            for (size_t r = 0; r < g.rows(); ++r) {
                S sum_dxh = 0, sum_dxh_xh = 0;
                for (size_t c = 0; c < n2; ++c) {
                    const S dxh = g(r, c) * gainv.data[c];
                    sum_dxh += dxh;
                    sum_dxh_xh += dxh * (*xhat_p)(r, c);
                    gg.data[c] += g(r, c) * (*xhat_p)(r, c);
                    gb.data[c] += g(r, c);
                }
                const S inv_n = S(1) / static_cast<S>(n2);
                for (size_t c = 0; c < n2; ++c) {
                    const S dxh = g(r, c) * gainv.data[c];
                    ga(r, c) += is_p->data[r] *
                                (dxh - inv_n * sum_dxh - (*xhat_p)(r, c) * inv_n * sum_dxh_xh);
                }
            }
        });
    }

    // Scalar (shape {1}) sum of all entries.
    int sum(int a) {
        S acc = 0;
        for (const S& x : val(a).data) acc += x;
        Ten out({1});
        out.data[0] = acc;
        return push(std::move(out), [a](Tape& tp, int id) {
            const S g = tp.nodes_[id].grad.data[0];
            for (S& x : tp.nodes_[a].grad.data) x += g;
        });
    }

    // ---- execution -------------------------------------------------------

    void backward(int loss) {
        require(val(loss).size() == 1, "backward: loss must be scalar");
        for (Node& n : nodes_) {
            n.grad = Ten(n.val.shape, S(0));
        }
        nodes_[static_cast<size_t>(loss)].grad.data[0] = S(1);
        for (int id = loss; id >= 0; --id) {
            Node& n = nodes_[static_cast<size_t>(id)];
            if (n.back) n.back(*this, id);
        }
    }

private:
    struct Node {
        Ten val;
        Ten grad;
        std::function<void(Tape&, int)> back;
    };

    std::vector<Node> nodes_;

    int push(Ten v, std::function<void(Tape&, int)> back) {
        nodes_.push_back(Node{std::move(v), Ten{}, std::move(back)});
        return static_cast<int>(nodes_.size()) - 1;
    }

    Map mapc(Ten& t) { return Map(t.data.data(), t.rows(), t.cols()); }
    static CMap mapc_const(const Ten& t) {
        return CMap(t.data.data(), t.rows(), t.cols());
    }
};

}  // namespace uasim::nn
