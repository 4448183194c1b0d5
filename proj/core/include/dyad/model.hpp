#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dyad/rng.hpp"
#include "dyad/session.hpp"
#include "dyad/tape.hpp"

namespace dyad {

struct ModelConfig {
    int d_model = 64;
    int d_lstm = 32;   // per direction; BLSTM output width is 2*d_lstm
    int n_heads = 16;
    int d_attn = 64;
    int fc_hidden = 16;
    double dropout_rate = 0.3;
    bool use_inter = true;
    bool use_intra = true;
    std::uint64_t seed = 1;

    int head_dim() const { return d_attn / n_heads; }
    int enabled_reps() const { return (use_intra ? 2 : 0) + (use_inter ? 2 : 0); }
    int fused_width() const { return enabled_reps() * d_attn; }
    void validate() const;
};

// Ordered, named parameter registry. Order is fixed at build time and is
// the canonical order for checkpoints, Adam state and gradient checks.
class ParamSet {
public:
    int add(const std::string& name, Tensor t);
    Tensor& at(const std::string& name);
    const Tensor& at(const std::string& name) const;
    int index(const std::string& name) const;
    size_t size() const { return tensors_.size(); }
    const std::vector<std::string>& names() const { return names_; }
    std::vector<Tensor>& tensors() { return tensors_; }
    const std::vector<Tensor>& tensors() const { return tensors_; }

private:
    std::vector<std::string> names_;
    std::vector<Tensor> tensors_;
    std::map<std::string, int> index_;
};

// Glorot-uniform weights, zero biases, forget-gate bias +1.
ParamSet init_params(const ModelConfig& cfg);

// Parameter leaves registered on one tape, addressable by name.
class TapedParams {
public:
    TapedParams(Tape& tape, const ParamSet& params, bool requires_grad);
    Value at(const std::string& name) const;
    const std::vector<Value>& leaves() const { return leaves_; }

private:
    const ParamSet* params_;
    std::vector<Value> leaves_;
};

enum class Mode { Train, Eval };

struct ForwardCache {
    Value h_blstm_e, h_blstm_r;            // W x 2*d_lstm
    Value seq_e, seq_r, seq_er, seq_re;    // pre-pool W x d_attn
    Value pool_e, pool_r, pool_er, pool_re;  // 1 x d_attn
    Value fused;
    Value pred_c, pred_w;                  // 1 x 1
};

Value encode_inputs(Tape& tape, Value window, Value w, Value b);

// One bidirectional pass; cell parameter names take a prefix like
// "blstm.e". Initial hidden and cell states are zero.
Value blstm_forward(Tape& tape, Value z, const TapedParams& p,
                    const std::string& prefix, int d_lstm);

// Scaled dot-product multi-head attention. Per-head
// attention matrices are appended to *attn_rows when requested.
Value multi_head_attention(Tape& tape, Value q_in, Value kv_in,
                           const TapedParams& p, const std::string& prefix,
                           int n_heads, std::vector<Value>* attn_rows = nullptr);

Value fc_head(Tape& tape, Value fused, const TapedParams& p, Value& pred_c,
              Value& pred_w, const ModelConfig& cfg, Mode mode, Rng* dropout_rng);

// Full forward pass. All four representations are always computed; the
// ablation flags only control what reaches the fused vector.
ForwardCache forward(Tape& tape, const TapedParams& p, const Tensor& e_window,
                     const Tensor& r_window, const ModelConfig& cfg, Mode mode,
                     Rng* dropout_rng = nullptr);

}  // namespace dyad
