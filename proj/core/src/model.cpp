#include "dyad/model.hpp"

#include <cmath>

#include "dyad/errors.hpp"

namespace dyad {

void ModelConfig::validate() const {
    if (d_model < 1 || d_lstm < 1 || n_heads < 1 || d_attn < 1 || fc_hidden < 1)
        throw ConfigError("ModelConfig: dimensions must be positive");
    if (d_attn % n_heads != 0)
        throw ConfigError("ModelConfig: d_attn must be divisible by n_heads");
    if (dropout_rate < 0.0 || dropout_rate >= 1.0)
        throw ConfigError("ModelConfig: dropout_rate must be in [0,1)");
    if (!use_inter && !use_intra)
        throw ConfigError("ModelConfig: at least one of inter/intra must be enabled");
}

int ParamSet::add(const std::string& name, Tensor t) {
    if (index_.count(name)) throw std::invalid_argument("ParamSet: duplicate " + name);
    int id = static_cast<int>(tensors_.size());
    index_[name] = id;
    names_.push_back(name);
    tensors_.push_back(std::move(t));
    return id;
}

Tensor& ParamSet::at(const std::string& name) { return tensors_[index(name)]; }
const Tensor& ParamSet::at(const std::string& name) const { return tensors_[index(name)]; }

int ParamSet::index(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::invalid_argument("ParamSet: unknown " + name);
    return it->second;
}

namespace {

Tensor glorot(Rng& rng, int fan_in, int fan_out, std::vector<int> shape) {
    double a = std::sqrt(6.0 / (fan_in + fan_out));
    Tensor t = Tensor::zeros(std::move(shape));
    for (auto& v : t.data) v = rng.uniform(-a, a);
    return t;
}

const char* kGates[] = {"i", "f", "o", "g"};
const char* kBlocks[] = {"intra_e", "intra_r", "inter_er", "inter_re"};

}  // namespace

ParamSet init_params(const ModelConfig& cfg) {
    cfg.validate();
    Rng rng = Rng::for_stream(cfg.seed, 1);
    ParamSet p;
    const int dm = cfg.d_model, h = cfg.d_lstm, din = 2 * cfg.d_lstm;
    const int hd = cfg.head_dim();

    p.add("enc.e.w", glorot(rng, kEmitterDim, dm, {kEmitterDim, dm}));
    p.add("enc.e.b", Tensor::zeros({dm}));
    p.add("enc.r.w", glorot(rng, kReceiverDim, dm, {kReceiverDim, dm}));
    p.add("enc.r.b", Tensor::zeros({dm}));

    for (const char* dom : {"e", "r"}) {
        for (const char* dir : {"fwd", "bwd"}) {
            std::string base = std::string("blstm.") + dom + "." + dir + ".";
            for (const char* g : kGates) {
                p.add(base + "w" + g, glorot(rng, dm, h, {dm, h}));
                p.add(base + "u" + g, glorot(rng, h, h, {h, h}));
                // forget-gate bias starts at 1
                p.add(base + "b" + g,
                      std::string(g) == "f" ? Tensor::full({h}, 1.0) : Tensor::zeros({h}));
            }
        }
    }

    for (const char* blk : kBlocks) {
        std::string base = std::string("attn.") + blk + ".";
        for (int i = 0; i < cfg.n_heads; ++i) {
            std::string hb = base + "h" + std::to_string(i) + ".";
            p.add(hb + "wq", glorot(rng, din, hd, {din, hd}));
            p.add(hb + "wk", glorot(rng, din, hd, {din, hd}));
            p.add(hb + "wv", glorot(rng, din, hd, {din, hd}));
        }
        p.add(base + "wo", glorot(rng, cfg.d_attn, cfg.d_attn, {cfg.d_attn, cfg.d_attn}));
    }

    const int fused = cfg.fused_width();
    p.add("fc.trunk.w", glorot(rng, fused, cfg.fc_hidden, {fused, cfg.fc_hidden}));
    p.add("fc.trunk.b", Tensor::zeros({cfg.fc_hidden}));
    p.add("fc.comp.w", glorot(rng, cfg.fc_hidden, 1, {cfg.fc_hidden, 1}));
    p.add("fc.comp.b", Tensor::zeros({1}));
    p.add("fc.warm.w", glorot(rng, cfg.fc_hidden, 1, {cfg.fc_hidden, 1}));
    p.add("fc.warm.b", Tensor::zeros({1}));
    return p;
}

TapedParams::TapedParams(Tape& tape, const ParamSet& params, bool requires_grad)
    : params_(&params) {
    leaves_.reserve(params.size());
    for (const auto& t : params.tensors()) leaves_.push_back(tape.leaf(t, requires_grad));
}

Value TapedParams::at(const std::string& name) const {
    return leaves_[params_->index(name)];
}

Value encode_inputs(Tape& tape, Value window, Value w, Value b) {
    if (tape.value(window).cols() != tape.value(w).rows())
        throw std::invalid_argument("encode_inputs: feature dim " +
                                    tape.value(window).shape_str() + " vs weights " +
                                    tape.value(w).shape_str());
    return tanh_op(add(matmul(window, w), b));
}

Value blstm_forward(Tape& tape, Value z, const TapedParams& p,
                    const std::string& prefix, int d_lstm) {
    const int w = tape.value(z).rows();
    Value zero_state = tape.constant(Tensor::zeros({1, d_lstm}));

    auto run_direction = [&](const std::string& dir, bool reversed) {
        std::string base = prefix + "." + dir + ".";
        // Input projections for all timesteps at once.
        Value xi = add(matmul(z, p.at(base + "wi")), p.at(base + "bi"));
        Value xf = add(matmul(z, p.at(base + "wf")), p.at(base + "bf"));
        Value xo = add(matmul(z, p.at(base + "wo")), p.at(base + "bo"));
        Value xg = add(matmul(z, p.at(base + "wg")), p.at(base + "bg"));
        Value ui = p.at(base + "ui"), uf = p.at(base + "uf");
        Value uo = p.at(base + "uo"), ug = p.at(base + "ug");

        std::vector<Value> hidden(w);
        Value h = zero_state, c = zero_state;
        for (int step = 0; step < w; ++step) {
            int t = reversed ? w - 1 - step : step;
            Value gi = sigmoid(add(slice_rows(xi, t, 1), matmul(h, ui)));
            Value gf = sigmoid(add(slice_rows(xf, t, 1), matmul(h, uf)));
            Value go = sigmoid(add(slice_rows(xo, t, 1), matmul(h, uo)));
            Value gg = tanh_op(add(slice_rows(xg, t, 1), matmul(h, ug)));
            c = add(mul(gf, c), mul(gi, gg));
            h = mul(go, tanh_op(c));
            hidden[t] = h;
        }
        return hidden;
    };

    auto fwd = run_direction("fwd", false);
    auto bwd = run_direction("bwd", true);
    std::vector<Value> rows;
    rows.reserve(w);
    for (int t = 0; t < w; ++t) rows.push_back(concat({fwd[t], bwd[t]}, 1));
    return concat(rows, 0);
}

Value multi_head_attention(Tape& tape, Value q_in, Value kv_in,
                           const TapedParams& p, const std::string& prefix,
                           int n_heads, std::vector<Value>* attn_rows) {
    const Tensor& q = tape.value(q_in);
    const Tensor& kv = tape.value(kv_in);
    if (q.cols() != kv.cols())
        throw std::invalid_argument("multi_head_attention: feature width mismatch");
    int head_dim = tape.value(p.at(prefix + ".h0.wq")).cols();
    double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(head_dim));

    std::vector<Value> heads;
    heads.reserve(n_heads);
    for (int i = 0; i < n_heads; ++i) {
        std::string hb = prefix + ".h" + std::to_string(i) + ".";
        Value qh = matmul(q_in, p.at(hb + "wq"));
        Value kh = matmul(kv_in, p.at(hb + "wk"));
        Value vh = matmul(kv_in, p.at(hb + "wv"));
        Value scores = scale(matmul(qh, transpose(kh)), inv_sqrt_d);
        Value attn = softmax(scores, 1);
        if (attn_rows) attn_rows->push_back(attn);
        heads.push_back(matmul(attn, vh));
    }
    return matmul(concat(heads, 1), p.at(prefix + ".wo"));
}

Value fc_head(Tape& tape, Value fused, const TapedParams& p, Value& pred_c,
              Value& pred_w, const ModelConfig& cfg, Mode mode, Rng* dropout_rng) {
    Value trunk = relu(add(matmul(fused, p.at("fc.trunk.w")), p.at("fc.trunk.b")));
    if (mode == Mode::Train && cfg.dropout_rate > 0.0) {
        if (!dropout_rng)
            throw std::invalid_argument("fc_head: training dropout needs an rng");
        // Inverted dropout: surviving units scaled by 1/(1-p).
        Tensor mask = Tensor::zeros({1, cfg.fc_hidden});
        double keep = 1.0 - cfg.dropout_rate;
        for (auto& v : mask.data)
            v = (dropout_rng->uniform() < keep) ? 1.0 / keep : 0.0;
        trunk = mul(trunk, tape.constant(mask));
    }
    pred_c = add(matmul(trunk, p.at("fc.comp.w")), p.at("fc.comp.b"));
    pred_w = add(matmul(trunk, p.at("fc.warm.w")), p.at("fc.warm.b"));
    return trunk;
}

ForwardCache forward(Tape& tape, const TapedParams& p, const Tensor& e_window,
                     const Tensor& r_window, const ModelConfig& cfg, Mode mode,
                     Rng* dropout_rng) {
    cfg.validate();
    if (e_window.rows() != r_window.rows())
        throw std::invalid_argument("forward: window widths differ");
    if (e_window.cols() != kEmitterDim || r_window.cols() != kReceiverDim)
        throw std::invalid_argument("forward: expected " + std::to_string(kEmitterDim) +
                                    "/" + std::to_string(kReceiverDim) + " features, got " +
                                    e_window.shape_str() + "/" + r_window.shape_str());

    ForwardCache cache;
    Value xe = tape.constant(e_window);
    Value xr = tape.constant(r_window);
    Value ze = encode_inputs(tape, xe, p.at("enc.e.w"), p.at("enc.e.b"));
    Value zr = encode_inputs(tape, xr, p.at("enc.r.w"), p.at("enc.r.b"));

    cache.h_blstm_e = blstm_forward(tape, ze, p, "blstm.e", cfg.d_lstm);
    cache.h_blstm_r = blstm_forward(tape, zr, p, "blstm.r", cfg.d_lstm);

    cache.seq_e = multi_head_attention(tape, cache.h_blstm_e, cache.h_blstm_e, p,
                                       "attn.intra_e", cfg.n_heads);
    cache.seq_r = multi_head_attention(tape, cache.h_blstm_r, cache.h_blstm_r, p,
                                       "attn.intra_r", cfg.n_heads);
    // H^{e->r}: receiver queries attend emitter keys/values; symmetrically
    // for H^{r->e}.
    cache.seq_er = multi_head_attention(tape, cache.h_blstm_r, cache.h_blstm_e, p,
                                        "attn.inter_er", cfg.n_heads);
    cache.seq_re = multi_head_attention(tape, cache.h_blstm_e, cache.h_blstm_r, p,
                                        "attn.inter_re", cfg.n_heads);

    cache.pool_e = mean_pool(cache.seq_e, 0);
    cache.pool_r = mean_pool(cache.seq_r, 0);
    cache.pool_er = mean_pool(cache.seq_er, 0);
    cache.pool_re = mean_pool(cache.seq_re, 0);

    std::vector<Value> parts;
    if (cfg.use_intra) {
        parts.push_back(cache.pool_e);
        parts.push_back(cache.pool_r);
    }
    if (cfg.use_inter) {
        parts.push_back(cache.pool_er);
        parts.push_back(cache.pool_re);
    }
    cache.fused = concat(parts, 1);
    fc_head(tape, cache.fused, p, cache.pred_c, cache.pred_w, cfg, mode, dropout_rng);
    return cache;
}

}  // namespace dyad
