#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "resgin/autodiff.hpp"
#include "resgin/chem.hpp"
#include "resgin/rng.hpp"

namespace resgin::model {

class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Variant { ResGin, GinNoRes, GcnRes };

Variant variant_from_string(const std::string& name);
std::string to_string(Variant v);

struct ModelConfig {
  int d_atom = chem::kAtomFeatureDim;
  int d_hidden = 128;
  int d_middle = 64;
  int gin_layers = 2;
  int d_attn = 64;   // = d_middle; the shared attention-space width
  int d_lstm = 128;  // = d_hidden so both pooling paths share W_v shapes
  int n_heads = 4;       // recorded; the attention here is single-head
  int out_classes = 2;   // recorded; the head emits one sigmoid probability
  double dropout = 0.2;
  int d_gene = 0;  // bound when a dataset is loaded
  Variant variant = Variant::ResGin;

  void validate() const;
};

/// y = x W + b with W of shape in x out.
struct AffineParams {
  diff::Parameter weight;
  diff::Parameter bias;

  AffineParams(const std::string& name, int in, int out)
      : weight(name + ".weight", diff::Tensor(in, out)), bias(name + ".bias", diff::Tensor(1, out)) {}

  diff::Var apply(diff::Tape& tape, diff::Var x) {
    return diff::add_rowvec(diff::matmul(x, tape.param(weight)), tape.param(bias));
  }
};

struct GinLayerParams {
  diff::Parameter eps;    // learnable scalar in (1 + eps) * self
  AffineParams lin1;      // in -> d_hidden
  AffineParams lin2;      // d_hidden -> out
  std::optional<AffineParams> skip;  // projection when in != out

  GinLayerParams(const std::string& name, int in, int hidden, int out, bool with_skip);
};

struct GcnLayerParams {
  diff::Parameter weight;  // in x out
  std::optional<AffineParams> skip;

  GcnLayerParams(const std::string& name, int in, int out, bool with_skip);
};

struct LstmGateParams {
  diff::Parameter w_x;  // d_in x d_out
  diff::Parameter w_h;  // d_out x d_out
  diff::Parameter bias; // 1 x d_out

  LstmGateParams(const std::string& name, int in, int out)
      : w_x(name + ".wx", diff::Tensor(in, out)),
        w_h(name + ".wh", diff::Tensor(out, out)),
        bias(name + ".bias", diff::Tensor(1, out)) {}
};

struct LstmParams {
  LstmGateParams input_gate, forget_gate, cell_gate, output_gate;

  LstmParams(const std::string& name, int in, int out)
      : input_gate(name + ".i", in, out),
        forget_gate(name + ".f", in, out),
        cell_gate(name + ".g", in, out),
        output_gate(name + ".o", in, out) {}
};

/// W_q/W_k project both drugs into the shared attention space; W_v is the
/// shared value projection.
struct AttentionParams {
  diff::Parameter w_q;  // d_in x d_attn
  diff::Parameter w_k;  // d_in x d_attn
  diff::Parameter w_v;  // d_in x d_in

  AttentionParams(const std::string& name, int d_in, int d_attn)
      : w_q(name + ".wq", diff::Tensor(d_in, d_attn)),
        w_k(name + ".wk", diff::Tensor(d_in, d_attn)),
        w_v(name + ".wv", diff::Tensor(d_in, d_in)) {}
};

struct ModelParams {
  ModelConfig config;
  AffineParams cell_mlp;                // d_gene -> d_atom, shared by Eq. 3 and the head
  std::vector<GinLayerParams> gin;      // resgin / gin-nores stacks
  std::vector<GcnLayerParams> gcn;      // gcn-res stack
  LstmParams lstm;
  AttentionParams attn_gin;
  AttentionParams attn_lstm;
  AffineParams head1, head2, head3;

  explicit ModelParams(const ModelConfig& cfg);

  /// Every learnable tensor in a fixed deterministic order.
  std::vector<diff::Parameter*> all();

  /// Kaiming-uniform fan-in init; eps = 0, biases 0, LSTM forget bias 1.
  void init(Rng& rng);
};

enum class Mode { Train, Infer };

struct AttentionVars {
  diff::Var a_x, a_y;  // 1xNx / 1xNy importance rows, each summing to 1
  diff::Var g_x, g_y;  // 1xd pooled representations
};

diff::Var embed_cell_line(diff::Tape& tape, ModelParams& params, const std::vector<double>& profile);
diff::Var init_node_states(diff::Tape& tape, diff::Var node_features, diff::Var cell_vec);
diff::Var gin_layer(diff::Tape& tape, diff::Var h, const std::vector<std::vector<int>>& neighbors,
                    GinLayerParams& layer, double dropout_rate, Mode mode, Rng* dropout_rng);
diff::Var residual_step(diff::Tape& tape, diff::Var h_prev, diff::Var h_tilde,
                        std::optional<AffineParams>& skip);
diff::Var gcn_layer(diff::Tape& tape, diff::Var h, const std::vector<std::vector<int>>& neighbors,
                    GcnLayerParams& layer);
diff::Var lstm_fuse(diff::Tape& tape, std::span<const diff::Var> layer_seq, LstmParams& params,
                    int d_lstm);
AttentionVars cross_attention(diff::Tape& tape, diff::Var hx, diff::Var hy, AttentionParams& params);
diff::Var fuse(diff::Tape& tape, diff::Var g_x_gin, diff::Var g_y_gin, diff::Var g_x_lstm,
               diff::Var g_y_lstm);
diff::Var predict_head(diff::Tape& tape, diff::Var g_f, diff::Var cell_vec, ModelParams& params,
                       Mode mode, Rng* dropout_rng);

struct ForwardVars {
  diff::Var p;  // 1x1 probability clamped into [1e-7, 1 - 1e-7]
  AttentionVars gin_pool;
  AttentionVars lstm_pool;
};

/// The full pass: cell embedding, K graph layers with per-layer collection,
/// LSTM fusion, both cross-attention poolings, fusion, prediction head.
/// `layer_outputs_*`, when given, receive H^(1)..H^(K) for each drug.
ForwardVars forward_on_tape(diff::Tape& tape, ModelParams& params,
                            const chem::MolecularGraph& drug_a, const chem::MolecularGraph& drug_b,
                            const std::vector<double>& profile, Mode mode, Rng* dropout_rng,
                            std::vector<diff::Var>* layer_outputs_a = nullptr,
                            std::vector<diff::Var>* layer_outputs_b = nullptr);

struct ForwardOutput {
  double p = 0.0;
  std::vector<double> attn_gin_a, attn_gin_b;
  std::vector<double> attn_lstm_a, attn_lstm_b;
};

ForwardOutput forward(ModelParams& params, const chem::MolecularGraph& drug_a,
                      const chem::MolecularGraph& drug_b, const std::vector<double>& profile,
                      Mode mode = Mode::Infer, Rng* dropout_rng = nullptr);

/// JSON checkpoint: model config plus every named parameter with its shape.
void save_checkpoint(const std::string& path, ModelParams& params);
/// Loads and validates shape-by-shape; mismatches and missing/unknown names
/// raise ModelError naming the parameter.
ModelParams load_checkpoint(const std::string& path);

}  // namespace resgin::model
