#include "dyad/tape.hpp"

#include <algorithm>
#include <cmath>

namespace dyad {

Value Tape::leaf(Tensor value, bool requires_grad) {
    nodes_.push_back(Node{std::move(value), {}, requires_grad, nullptr});
    grads_.emplace_back();
    return Value{this, static_cast<int>(nodes_.size()) - 1};
}

Value Tape::record(Tensor value, std::vector<int> parents,
                   std::function<void(Tape&, int)> backward) {
#ifndef NDEBUG
    if (!value.all_finite())
        throw std::runtime_error("Tape: non-finite value produced by forward op");
#endif
    bool rg = false;
    for (int p : parents) rg = rg || nodes_[p].requires_grad;
    nodes_.push_back(Node{std::move(value), std::move(parents), rg,
                          rg ? std::move(backward) : nullptr});
    grads_.emplace_back();
    return Value{this, static_cast<int>(nodes_.size()) - 1};
}

void Tape::accumulate(int id, const Tensor& g) {
    if (!nodes_[id].requires_grad) return;
    Tensor& dst = grads_[id];
    if (dst.data.empty()) dst = Tensor::zeros(nodes_[id].value.shape);
    for (size_t i = 0; i < g.data.size(); ++i) dst.data[i] += g.data[i];
}

void Tape::accumulate_scaled(int id, const Tensor& g, double s) {
    if (!nodes_[id].requires_grad) return;
    Tensor& dst = grads_[id];
    if (dst.data.empty()) dst = Tensor::zeros(nodes_[id].value.shape);
    for (size_t i = 0; i < g.data.size(); ++i) dst.data[i] += s * g.data[i];
}

const Tensor& Tape::grad(Value v) {
    Tensor& g = grads_[v.id];
    if (g.data.empty()) g = Tensor::zeros(nodes_[v.id].value.shape);
    return g;
}

void Tape::backward(Value loss) {
    if (loss.tape != this) throw std::invalid_argument("backward: foreign value");
    if (nodes_[loss.id].value.numel() != 1)
        throw std::invalid_argument("backward: loss must be scalar");
    for (auto& g : grads_) g = Tensor();
    grads_[loss.id] = Tensor::full(nodes_[loss.id].value.shape, 1.0);
    for (int i = loss.id; i >= 0; --i) {
        if (grads_[i].data.empty()) continue;
        Node& n = nodes_[i];
        if (n.backward) n.backward(*this, i);
    }
}

namespace {

void require_same_tape(Value a, Value b, const char* op) {
    if (a.tape != b.tape)
        throw std::invalid_argument(std::string(op) + ": operands on different tapes");
}

// Plain triple product, ikj order. c must be zeroed.
void matmul_into(const Tensor& a, const Tensor& b, Tensor& c,
                 bool trans_a, bool trans_b) {
    int m = trans_a ? a.cols() : a.rows();
    int k = trans_a ? a.rows() : a.cols();
    int n = trans_b ? b.rows() : b.cols();
    for (int i = 0; i < m; ++i) {
        for (int p = 0; p < k; ++p) {
            double av = trans_a ? a.at(p, i) : a.at(i, p);
            if (av == 0.0) continue;
            double* crow = &c.data[static_cast<size_t>(i) * n];
            if (!trans_b) {
                const double* brow = &b.data[static_cast<size_t>(p) * n];
                for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
            } else {
                for (int j = 0; j < n; ++j) crow[j] += av * b.at(j, p);
            }
        }
    }
}

enum class Elemwise { Add, Sub, Mul };

bool trailing_broadcast(const Tensor& a, const Tensor& b) {
    // b is a bias-style vector broadcast over a's rows
    return a.rank() == 2 && b.numel() == a.cols() &&
           (b.rank() == 1 || (b.rank() == 2 && b.rows() == 1));
}

Value elemwise(Value av, Value bv, Elemwise kind, const char* name) {
    require_same_tape(av, bv, name);
    Tape& t = *av.tape;
    const Tensor& a = t.value(av);
    const Tensor& b = t.value(bv);
    bool bcast = !a.same_shape(b);
    if (bcast && !trailing_broadcast(a, b))
        throw std::invalid_argument(std::string(name) + ": shapes not broadcastable " +
                                    a.shape_str() + " vs " + b.shape_str());
    Tensor out = Tensor::zeros(a.shape);
    int n = a.cols();
    for (int i = 0; i < a.rows(); ++i) {
        for (int j = 0; j < n; ++j) {
            double x = a.at(i, j);
            double y = bcast ? b.data[j] : b.at(i, j);
            double& o = out.data[static_cast<size_t>(i) * n + j];
            switch (kind) {
                case Elemwise::Add: o = x + y; break;
                case Elemwise::Sub: o = x - y; break;
                case Elemwise::Mul: o = x * y; break;
            }
        }
    }
    int aid = av.id, bid = bv.id;
    return t.record(std::move(out), {aid, bid}, [aid, bid, kind, bcast](Tape& tp, int self) {
        const Tensor& g = tp.node_grad(self);
        const Tensor& a = tp.node_value(aid);
        const Tensor& b = tp.node_value(bid);
        int rows = a.rows(), cols = a.cols();
        switch (kind) {
            case Elemwise::Add:
            case Elemwise::Sub: {
                tp.accumulate(aid, g);
                double sign = (kind == Elemwise::Sub) ? -1.0 : 1.0;
                if (!bcast) {
                    tp.accumulate_scaled(bid, g, sign);
                } else {
                    Tensor gb = Tensor::zeros(b.shape);
                    for (int i = 0; i < rows; ++i)
                        for (int j = 0; j < cols; ++j)
                            gb.data[j] += sign * g.at(i, j);
                    tp.accumulate(bid, gb);
                }
                break;
            }
            case Elemwise::Mul: {
                Tensor ga = Tensor::zeros(a.shape);
                Tensor gb = Tensor::zeros(b.shape);
                for (int i = 0; i < rows; ++i) {
                    for (int j = 0; j < cols; ++j) {
                        double y = bcast ? b.data[j] : b.at(i, j);
                        ga.at(i, j) = g.at(i, j) * y;
                        double* gbp = bcast ? &gb.data[j] : &gb.at(i, j);
                        *gbp += g.at(i, j) * a.at(i, j);
                    }
                }
                tp.accumulate(aid, ga);
                tp.accumulate(bid, gb);
                break;
            }
        }
    });
}

Value unary(Value xv, double (*f)(double), double (*df_from_y)(double, double),
            const char* name) {
    Tape& t = *xv.tape;
    const Tensor& x = t.value(xv);
    Tensor out = x;
    for (auto& v : out.data) v = f(v);
    int xid = xv.id;
    return t.record(std::move(out), {xid}, [xid, df_from_y](Tape& tp, int self) {
        const Tensor& g = tp.node_grad(self);
        const Tensor& x = tp.node_value(xid);
        const Tensor& y = tp.node_value(self);
        Tensor gx = Tensor::zeros(x.shape);
        for (size_t i = 0; i < gx.data.size(); ++i)
            gx.data[i] = g.data[i] * df_from_y(x.data[i], y.data[i]);
        tp.accumulate(xid, gx);
    });
}

}  // namespace

Value matmul(Value av, Value bv) {
    require_same_tape(av, bv, "matmul");
    Tape& t = *av.tape;
    const Tensor& a = t.value(av);
    const Tensor& b = t.value(bv);
    if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows())
        throw std::invalid_argument("matmul: incompatible shapes " + a.shape_str() +
                                    " x " + b.shape_str());
    Tensor c = Tensor::zeros({a.rows(), b.cols()});
    matmul_into(a, b, c, false, false);
    int aid = av.id, bid = bv.id;
    return t.record(std::move(c), {aid, bid}, [aid, bid](Tape& tp, int self) {
        const Tensor& g = tp.node_grad(self);
        const Tensor& a = tp.node_value(aid);
        const Tensor& b = tp.node_value(bid);
        Tensor ga = Tensor::zeros(a.shape);   // g * b^T
        Tensor gb = Tensor::zeros(b.shape);   // a^T * g
        matmul_into(g, b, ga, false, true);
        matmul_into(a, g, gb, true, false);
        tp.accumulate(aid, ga);
        tp.accumulate(bid, gb);
    });
}

Value transpose(Value xv) {
    Tape& t = *xv.tape;
    const Tensor& x = t.value(xv);
    if (x.rank() != 2) throw std::invalid_argument("transpose: rank-2 only");
    Tensor out = Tensor::zeros({x.cols(), x.rows()});
    for (int i = 0; i < x.rows(); ++i)
        for (int j = 0; j < x.cols(); ++j) out.at(j, i) = x.at(i, j);
    int xid = xv.id;
    return t.record(std::move(out), {xid}, [xid](Tape& tp, int self) {
        const Tensor& g = tp.node_grad(self);
        Tensor gx = Tensor::zeros(tp.node_value(xid).shape);
        for (int i = 0; i < g.rows(); ++i)
            for (int j = 0; j < g.cols(); ++j) gx.at(j, i) = g.at(i, j);
        tp.accumulate(xid, gx);
    });
}

Value add(Value a, Value b) { return elemwise(a, b, Elemwise::Add, "add"); }
Value sub(Value a, Value b) { return elemwise(a, b, Elemwise::Sub, "sub"); }
Value mul(Value a, Value b) { return elemwise(a, b, Elemwise::Mul, "mul"); }

Value tanh_op(Value x) {
    return unary(x, [](double v) { return std::tanh(v); },
                 [](double, double y) { return 1.0 - y * y; }, "tanh");
}
Value sigmoid(Value x) {
    return unary(x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
                 [](double, double y) { return y * (1.0 - y); }, "sigmoid");
}
Value relu(Value x) {
    return unary(x, [](double v) { return v > 0.0 ? v : 0.0; },
                 [](double v, double) { return v > 0.0 ? 1.0 : 0.0; }, "relu");
}
Value exp_op(Value x) {
    return unary(x, [](double v) { return std::exp(v); },
                 [](double, double y) { return y; }, "exp");
}
Value log_op(Value xv) {
    for (double v : xv.tape->value(xv).data)
        if (!(v > 0.0))
            throw std::domain_error("log: non-positive entry");
    return unary(xv, [](double v) { return std::log(v); },
                 [](double v, double) { return 1.0 / v; }, "log");
}

Value softmax(Value xv, int axis) {
    Tape& t = *xv.tape;
    const Tensor& x = t.value(xv);
    if (axis < 0 || axis >= x.rank())
        throw std::invalid_argument("softmax: axis out of range");
    // Normalize to a rows/cols view where the softmax runs along each row.
    bool along_rows = (x.rank() == 1) || (axis == 1);
    int nseq = along_rows ? x.rows() : x.cols();
    int len = along_rows ? x.cols() : x.rows();
    auto idx = [along_rows, nseq, len](int s, int k) {
        return along_rows ? static_cast<size_t>(s) * len + k
                          : static_cast<size_t>(k) * nseq + s;
    };
    Tensor out = Tensor::zeros(x.shape);
    for (int s = 0; s < nseq; ++s) {
        double mx = x.data[idx(s, 0)];
        for (int k = 1; k < len; ++k) mx = std::max(mx, x.data[idx(s, k)]);
        double z = 0.0;
        for (int k = 0; k < len; ++k) {
            double e = std::exp(x.data[idx(s, k)] - mx);
            out.data[idx(s, k)] = e;
            z += e;
        }
        for (int k = 0; k < len; ++k) out.data[idx(s, k)] /= z;
    }
    int xid = xv.id;
    return t.record(std::move(out), {xid}, [xid, nseq, len, idx](Tape& tp, int self) {
        const Tensor& g = tp.node_grad(self);
        const Tensor& y = tp.node_value(self);
        Tensor gx = Tensor::zeros(tp.node_value(xid).shape);
        for (int s = 0; s < nseq; ++s) {
            double dot = 0.0;
            for (int k = 0; k < len; ++k) dot += g.data[idx(s, k)] * y.data[idx(s, k)];
            for (int k = 0; k < len; ++k)
                gx.data[idx(s, k)] = y.data[idx(s, k)] * (g.data[idx(s, k)] - dot);
        }
        tp.accumulate(xid, gx);
    });
}

Value concat(const std::vector<Value>& parts, int axis) {
    if (parts.empty()) throw std::invalid_argument("concat: no parts");
    if (parts.size() == 1) {
        // still record a node so backward slices uniformly
    }
    Tape& t = *parts[0].tape;
    for (auto p : parts) require_same_tape(parts[0], p, "concat");
    const Tensor& first = t.value(parts[0]);
    int rank = first.rank();
    if (axis < 0 || axis >= std::max(rank, 1))
        throw std::invalid_argument("concat: axis out of range");
    if (rank == 1) {
        int total = 0;
        for (auto p : parts) {
            const Tensor& x = t.value(p);
            if (x.rank() != 1) throw std::invalid_argument("concat: rank mismatch");
            total += x.shape[0];
        }
        Tensor out = Tensor::zeros({total});
        std::vector<int> ids, offs;
        int off = 0;
        for (auto p : parts) {
            const Tensor& x = t.value(p);
            std::copy(x.data.begin(), x.data.end(), out.data.begin() + off);
            ids.push_back(p.id);
            offs.push_back(off);
            off += x.shape[0];
        }
        return t.record(std::move(out), ids, [ids, offs](Tape& tp, int self) {
            const Tensor& g = tp.node_grad(self);
            for (size_t i = 0; i < ids.size(); ++i) {
                const Tensor& x = tp.node_value(ids[i]);
                Tensor gx(x.shape,
                          std::vector<double>(g.data.begin() + offs[i],
                                              g.data.begin() + offs[i] + x.shape[0]));
                tp.accumulate(ids[i], gx);
            }
        });
    }
    // rank 2
    int rows = 0, cols = 0;
    for (auto p : parts) {
        const Tensor& x = t.value(p);
        if (x.rank() != 2) throw std::invalid_argument("concat: rank mismatch");
        if (axis == 0) {
            if (rows == 0 || cols == x.cols()) { rows += x.rows(); cols = x.cols(); }
            else throw std::invalid_argument("concat: column mismatch");
        } else {
            if (cols == 0 || rows == x.rows()) { cols += x.cols(); rows = x.rows(); }
            else throw std::invalid_argument("concat: row mismatch");
        }
    }
    Tensor out = Tensor::zeros({rows, cols});
    std::vector<int> ids, offs;
    int off = 0;
    for (auto p : parts) {
        const Tensor& x = t.value(p);
        if (axis == 0) {
            std::copy(x.data.begin(), x.data.end(),
                      out.data.begin() + static_cast<size_t>(off) * cols);
        } else {
            for (int i = 0; i < rows; ++i)
                for (int j = 0; j < x.cols(); ++j) out.at(i, off + j) = x.at(i, j);
        }
        ids.push_back(p.id);
        offs.push_back(off);
        off += (axis == 0) ? x.rows() : x.cols();
    }
    return t.record(std::move(out), ids, [ids, offs, axis](Tape& tp, int self) {
        const Tensor& g = tp.node_grad(self);
        for (size_t i = 0; i < ids.size(); ++i) {
            const Tensor& x = tp.node_value(ids[i]);
            Tensor gx = Tensor::zeros(x.shape);
            for (int r = 0; r < x.rows(); ++r)
                for (int c = 0; c < x.cols(); ++c)
                    gx.at(r, c) = (axis == 0) ? g.at(offs[i] + r, c)
                                              : g.at(r, offs[i] + c);
            tp.accumulate(ids[i], gx);
        }
    });
}

Value slice_rows(Value xv, int start, int count) {
    Tape& t = *xv.tape;
    const Tensor& x = t.value(xv);
    if (x.rank() != 2) throw std::invalid_argument("slice_rows: rank-2 only");
    if (start < 0 || count < 1 || start + count > x.rows())
        throw std::invalid_argument("slice_rows: range out of bounds");
    int cols = x.cols();
    Tensor out({count, cols},
               std::vector<double>(x.data.begin() + static_cast<size_t>(start) * cols,
                                   x.data.begin() + static_cast<size_t>(start + count) * cols));
    int xid = xv.id;
    return t.record(std::move(out), {xid}, [xid, start, count, cols](Tape& tp, int self) {
        const Tensor& g = tp.node_grad(self);
        Tensor gx = Tensor::zeros(tp.node_value(xid).shape);
        std::copy(g.data.begin(), g.data.end(),
                  gx.data.begin() + static_cast<size_t>(start) * cols);
        tp.accumulate(xid, gx);
    });
}

Value mean_pool(Value xv, int axis) {
    Tape& t = *xv.tape;
    const Tensor& x = t.value(xv);
    if (x.rank() != 2) throw std::invalid_argument("mean_pool: rank-2 only");
    if (axis != 0 && axis != 1) throw std::invalid_argument("mean_pool: bad axis");
    int rows = x.rows(), cols = x.cols();
    int len = (axis == 0) ? rows : cols;
    Tensor out = (axis == 0) ? Tensor::zeros({1, cols}) : Tensor::zeros({rows, 1});
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) {
            double& o = (axis == 0) ? out.data[j] : out.data[i];
            o += x.at(i, j) / len;
        }
    int xid = xv.id;
    return t.record(std::move(out), {xid}, [xid, axis, len](Tape& tp, int self) {
        const Tensor& g = tp.node_grad(self);
        const Tensor& x = tp.node_value(xid);
        Tensor gx = Tensor::zeros(x.shape);
        for (int i = 0; i < x.rows(); ++i)
            for (int j = 0; j < x.cols(); ++j)
                gx.at(i, j) = ((axis == 0) ? g.data[j] : g.data[i]) / len;
        tp.accumulate(xid, gx);
    });
}

Value sum(Value xv) {
    Tape& t = *xv.tape;
    const Tensor& x = t.value(xv);
    double s = 0.0;
    for (double v : x.data) s += v;
    int xid = xv.id;
    return t.record(Tensor::scalar(s), {xid}, [xid](Tape& tp, int self) {
        double g = tp.node_grad(self).data[0];
        tp.accumulate(xid, Tensor::full(tp.node_value(xid).shape, g));
    });
}

Value scale(Value xv, double c) {
    Tape& t = *xv.tape;
    Tensor out = t.value(xv);
    for (auto& v : out.data) v *= c;
    int xid = xv.id;
    return t.record(std::move(out), {xid}, [xid, c](Tape& tp, int self) {
        tp.accumulate_scaled(xid, tp.node_grad(self), c);
    });
}

}  // namespace dyad
