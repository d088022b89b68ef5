#include "resgin/model.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

namespace resgin::model {

using diff::Tape;
using diff::Tensor;
using diff::Var;

Variant variant_from_string(const std::string& name) {
  if (name == "resgin") return Variant::ResGin;
  if (name == "gin-nores") return Variant::GinNoRes;
  if (name == "gcn-res") return Variant::GcnRes;
  throw ModelError("unknown variant '" + name + "' (expected resgin, gin-nores, gcn-res)");
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::ResGin: return "resgin";
    case Variant::GinNoRes: return "gin-nores";
    case Variant::GcnRes: return "gcn-res";
  }
  return "resgin";
}

void ModelConfig::validate() const {
  if (gin_layers < 1) throw ModelError("layer_count must be >= 1");
  if (d_atom <= 0 || d_hidden <= 0 || d_middle <= 0 || d_attn <= 0 || d_lstm <= 0)
    throw ModelError("model dimensions must be positive");
  if (dropout < 0.0 || dropout >= 1.0) throw ModelError("dropout must be in [0, 1)");
}

GinLayerParams::GinLayerParams(const std::string& name, int in, int hidden, int out, bool with_skip)
    : eps(name + ".eps", Tensor(1, 1)),
      lin1(name + ".lin1", in, hidden),
      lin2(name + ".lin2", hidden, out) {
  if (with_skip && in != out) skip.emplace(name + ".skip", in, out);
}

GcnLayerParams::GcnLayerParams(const std::string& name, int in, int out, bool with_skip)
    : weight(name + ".weight", Tensor(in, out)) {
  if (with_skip && in != out) skip.emplace(name + ".skip", in, out);
}

ModelParams::ModelParams(const ModelConfig& cfg)
    : config(cfg),
      cell_mlp("cell_mlp", cfg.d_gene, cfg.d_atom),
      lstm("lstm", cfg.d_hidden, cfg.d_lstm),
      attn_gin("attn_gin", cfg.d_hidden, cfg.d_attn),
      attn_lstm("attn_lstm", cfg.d_lstm, cfg.d_attn),
      head1("head.lin1", 2 * cfg.d_hidden + 2 * cfg.d_lstm + cfg.d_atom, cfg.d_hidden),
      head2("head.lin2", cfg.d_hidden, cfg.d_middle),
      head3("head.lin3", cfg.d_middle, 1) {
  cfg.validate();
  const bool residual = cfg.variant != Variant::GinNoRes;
  for (int k = 0; k < cfg.gin_layers; ++k) {
    const int in = k == 0 ? cfg.d_atom : cfg.d_hidden;
    const std::string name_base = std::to_string(k + 1);
    if (cfg.variant == Variant::GcnRes)
      gcn.emplace_back("gcn" + name_base, in, cfg.d_hidden, residual);
    else
      gin.emplace_back("gin" + name_base, in, cfg.d_hidden, cfg.d_hidden, residual);
  }
}

std::vector<diff::Parameter*> ModelParams::all() {
  std::vector<diff::Parameter*> out;
  auto affine = [&out](AffineParams& a) {
    out.push_back(&a.weight);
    out.push_back(&a.bias);
  };
  affine(cell_mlp);
  for (GinLayerParams& l : gin) {
    out.push_back(&l.eps);
    affine(l.lin1);
    affine(l.lin2);
    if (l.skip) affine(*l.skip);
  }
  for (GcnLayerParams& l : gcn) {
    out.push_back(&l.weight);
    if (l.skip) affine(*l.skip);
  }
  for (LstmGateParams* g : {&lstm.input_gate, &lstm.forget_gate, &lstm.cell_gate, &lstm.output_gate}) {
    out.push_back(&g->w_x);
    out.push_back(&g->w_h);
    out.push_back(&g->bias);
  }
  for (AttentionParams* a : {&attn_gin, &attn_lstm}) {
    out.push_back(&a->w_q);
    out.push_back(&a->w_k);
    out.push_back(&a->w_v);
  }
  affine(head1);
  affine(head2);
  affine(head3);
  return out;
}

void ModelParams::init(Rng& rng) {
  for (diff::Parameter* p : all()) {
    p->zero_grad();
    const std::string& n = p->name;
    const bool is_bias = n.ends_with(".bias") || n.ends_with(".b");
    if (n.ends_with(".eps")) {
      p->value.data[0] = 0.0;
    } else if (is_bias) {
      std::fill(p->value.data.begin(), p->value.data.end(),
                n.starts_with("lstm.f") ? 1.0 : 0.0);
    } else {
      // fan-in uniform with unit gain; the GIN sum aggregation already grows
      // activations by ~(2 + deg) per layer, so a hotter gain saturates the
      // sigmoid head even at modest depth
      const double bound = std::sqrt(3.0 / p->value.rows);
      for (double& v : p->value.data) v = rng.uniform(-bound, bound);
    }
  }
}

namespace {

void neighbor_pairs(const std::vector<std::vector<int>>& neighbors, std::vector<int>& segment_of,
                    std::vector<int>& gather_from) {
  for (size_t v = 0; v < neighbors.size(); ++v) {
    for (int u : neighbors[v]) {
      segment_of.push_back(static_cast<int>(v));
      gather_from.push_back(u);
    }
  }
}

}  // namespace

Var embed_cell_line(Tape& tape, ModelParams& params, const std::vector<double>& profile) {
  if (static_cast<int>(profile.size()) != params.config.d_gene)
    throw diff::ShapeError("cell-line profile has " + std::to_string(profile.size()) +
                           " genes, model expects " + std::to_string(params.config.d_gene));
  Var x = tape.input(Tensor::row(profile));
  return diff::relu(params.cell_mlp.apply(tape, x));
}

Var init_node_states(Tape& tape, Var node_features, Var cell_vec) {
  return diff::add_rowvec(node_features, cell_vec);
}

Var gin_layer(Tape& tape, Var h, const std::vector<std::vector<int>>& neighbors,
              GinLayerParams& layer, double dropout_rate, Mode mode, Rng* dropout_rng) {
  const int n = tape.value(h).rows;
  std::vector<int> segment_of, gather_from;
  neighbor_pairs(neighbors, segment_of, gather_from);
  Var neighbor_sum = diff::segment_sum(h, segment_of, gather_from, n);
  Var self = diff::scalar_mul(diff::add_const(tape.param(layer.eps), 1.0), h);
  Var agg = diff::add(self, neighbor_sum);
  Var hidden = diff::relu(layer.lin1.apply(tape, agg));
  if (mode == Mode::Train && dropout_rate > 0.0) {
    if (!dropout_rng) throw ModelError("training-mode dropout needs an RNG");
    hidden = diff::dropout(hidden, dropout_rate, *dropout_rng, true);
  }
  return layer.lin2.apply(tape, hidden);
}

Var residual_step(Tape& tape, Var h_prev, Var h_tilde, std::optional<AffineParams>& skip) {
  const Tensor& prev = tape.value(h_prev);
  const Tensor& tilde = tape.value(h_tilde);
  if (prev.cols == tilde.cols) return diff::add(h_prev, h_tilde);
  if (!skip)
    throw ModelError("MissingSkipProjection: residual needs a projection from " +
                     std::to_string(prev.cols) + " to " + std::to_string(tilde.cols));
  return diff::add(skip->apply(tape, h_prev), h_tilde);
}

Var gcn_layer(Tape& tape, Var h, const std::vector<std::vector<int>>& neighbors,
              GcnLayerParams& layer) {
  const int n = tape.value(h).rows;
  std::vector<int> segment_of, gather_from;
  std::vector<double> weights;
  for (int v = 0; v < n; ++v) {
    const double dv = static_cast<double>(neighbors[v].size()) + 1.0;
    segment_of.push_back(v);
    gather_from.push_back(v);
    weights.push_back(1.0 / dv);
    for (int u : neighbors[v]) {
      const double du = static_cast<double>(neighbors[u].size()) + 1.0;
      segment_of.push_back(v);
      gather_from.push_back(u);
      weights.push_back(1.0 / std::sqrt(dv * du));
    }
  }
  Var agg = diff::segment_sum(h, segment_of, gather_from, n, weights);
  return diff::relu(diff::matmul(agg, tape.param(layer.weight)));
}

Var lstm_fuse(Tape& tape, std::span<const Var> layer_seq, LstmParams& params, int d_lstm) {
  if (layer_seq.empty()) throw ModelError("lstm_fuse needs at least one layer output");
  const int n = tape.value(layer_seq[0]).rows;
  Var h = tape.input(Tensor(n, d_lstm));
  Var c = tape.input(Tensor(n, d_lstm));
  auto gate = [&tape](LstmGateParams& g, Var x, Var h_prev) {
    return diff::add_rowvec(
        diff::add(diff::matmul(x, tape.param(g.w_x)), diff::matmul(h_prev, tape.param(g.w_h))),
        tape.param(g.bias));
  };
  for (Var x : layer_seq) {
    Var i = diff::sigmoid(gate(params.input_gate, x, h));
    Var f = diff::sigmoid(gate(params.forget_gate, x, h));
    Var g = diff::tanh(gate(params.cell_gate, x, h));
    Var o = diff::sigmoid(gate(params.output_gate, x, h));
    c = diff::add(diff::mul(f, c), diff::mul(i, g));
    h = diff::mul(o, diff::tanh(c));
  }
  return h;
}

AttentionVars cross_attention(Tape& tape, Var hx, Var hy, AttentionParams& params) {
  Var wq = tape.param(params.w_q);
  Var wk = tape.param(params.w_k);
  Var wv = tape.param(params.w_v);
  Var score_x = diff::tanh(diff::matmul(diff::matmul(hx, wq), diff::transpose(diff::matmul(hy, wk))));
  Var score_y = diff::tanh(diff::matmul(diff::matmul(hy, wq), diff::transpose(diff::matmul(hx, wk))));
  AttentionVars out;
  out.a_x = diff::rowwise_softmax(diff::transpose(diff::row_sums(score_x)));
  out.a_y = diff::rowwise_softmax(diff::transpose(diff::row_sums(score_y)));
  out.g_x = diff::matmul(out.a_x, diff::matmul(hx, wv));
  out.g_y = diff::matmul(out.a_y, diff::matmul(hy, wv));
  return out;
}

Var fuse(Tape& tape, Var g_x_gin, Var g_y_gin, Var g_x_lstm, Var g_y_lstm) {
  (void)tape;
  return diff::concat_cols(diff::concat_cols(g_x_gin, g_y_gin),
                           diff::concat_cols(g_x_lstm, g_y_lstm));
}

Var predict_head(Tape& tape, Var g_f, Var cell_vec, ModelParams& params, Mode mode,
                 Rng* dropout_rng) {
  Var z = diff::concat_cols(g_f, cell_vec);
  const int expected = 2 * params.config.d_hidden + 2 * params.config.d_lstm + params.config.d_atom;
  if (tape.value(z).cols != expected)
    throw diff::ShapeError("prediction input has width " +
                           std::to_string(tape.value(z).cols) + ", expected " +
                           std::to_string(expected));
  Var h = diff::relu(params.head1.apply(tape, z));
  if (mode == Mode::Train && params.config.dropout > 0.0) {
    if (!dropout_rng) throw ModelError("training-mode dropout needs an RNG");
    h = diff::dropout(h, params.config.dropout, *dropout_rng, true);
  }
  h = diff::relu(params.head2.apply(tape, h));
  Var logit = params.head3.apply(tape, h);
  return diff::clamp(diff::sigmoid(logit), 1e-7, 1.0 - 1e-7);
}

namespace {

Var encode_drug(Tape& tape, ModelParams& params, const chem::MolecularGraph& graph, Var cell_vec,
                Mode mode, Rng* dropout_rng, std::vector<Var>& layer_outputs) {
  Var h = init_node_states(tape, tape.input(graph.node_features), cell_vec);
  const Variant variant = params.config.variant;
  for (int k = 0; k < params.config.gin_layers; ++k) {
    Var tilde;
    std::optional<AffineParams>* skip = nullptr;
    if (variant == Variant::GcnRes) {
      tilde = gcn_layer(tape, h, graph.neighbors, params.gcn[k]);
      skip = &params.gcn[k].skip;
    } else {
      tilde = gin_layer(tape, h, graph.neighbors, params.gin[k], params.config.dropout, mode,
                        dropout_rng);
      skip = &params.gin[k].skip;
    }
    h = variant == Variant::GinNoRes ? tilde : residual_step(tape, h, tilde, *skip);
    layer_outputs.push_back(h);
  }
  return h;
}

}  // namespace

ForwardVars forward_on_tape(Tape& tape, ModelParams& params, const chem::MolecularGraph& drug_a,
                            const chem::MolecularGraph& drug_b, const std::vector<double>& profile,
                            Mode mode, Rng* dropout_rng, std::vector<Var>* layer_outputs_a,
                            std::vector<Var>* layer_outputs_b) {
  Var c = embed_cell_line(tape, params, profile);
  std::vector<Var> outs_a, outs_b;
  Var ha = encode_drug(tape, params, drug_a, c, mode, dropout_rng, outs_a);
  Var hb = encode_drug(tape, params, drug_b, c, mode, dropout_rng, outs_b);
  Var sa = lstm_fuse(tape, outs_a, params.lstm, params.config.d_lstm);
  Var sb = lstm_fuse(tape, outs_b, params.lstm, params.config.d_lstm);

  ForwardVars out;
  out.gin_pool = cross_attention(tape, ha, hb, params.attn_gin);
  out.lstm_pool = cross_attention(tape, sa, sb, params.attn_lstm);
  Var g_f = fuse(tape, out.gin_pool.g_x, out.gin_pool.g_y, out.lstm_pool.g_x, out.lstm_pool.g_y);
  out.p = predict_head(tape, g_f, c, params, mode, dropout_rng);
  if (layer_outputs_a) *layer_outputs_a = std::move(outs_a);
  if (layer_outputs_b) *layer_outputs_b = std::move(outs_b);
  return out;
}

ForwardOutput forward(ModelParams& params, const chem::MolecularGraph& drug_a,
                      const chem::MolecularGraph& drug_b, const std::vector<double>& profile,
                      Mode mode, Rng* dropout_rng) {
  Tape tape;
  ForwardVars vars = forward_on_tape(tape, params, drug_a, drug_b, profile, mode, dropout_rng);
  ForwardOutput out;
  out.p = tape.value(vars.p).data[0];
  out.attn_gin_a = tape.value(vars.gin_pool.a_x).data;
  out.attn_gin_b = tape.value(vars.gin_pool.a_y).data;
  out.attn_lstm_a = tape.value(vars.lstm_pool.a_x).data;
  out.attn_lstm_b = tape.value(vars.lstm_pool.a_y).data;
  return out;
}

namespace {

using nlohmann::json;

json config_to_json(const ModelConfig& c) {
  return json{{"molecule_channels", c.d_atom},
              {"hidden_channels", c.d_hidden},
              {"middle_channels", c.d_middle},
              {"layer_count", c.gin_layers},
              {"attn_channels", c.d_attn},
              {"lstm_channels", c.d_lstm},
              {"num_heads", c.n_heads},
              {"out_channels", c.out_classes},
              {"dropout", c.dropout},
              {"gene_channels", c.d_gene},
              {"variant", to_string(c.variant)}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.d_atom = j.at("molecule_channels").get<int>();
  c.d_hidden = j.at("hidden_channels").get<int>();
  c.d_middle = j.at("middle_channels").get<int>();
  c.gin_layers = j.at("layer_count").get<int>();
  c.d_attn = j.at("attn_channels").get<int>();
  c.d_lstm = j.at("lstm_channels").get<int>();
  c.n_heads = j.at("num_heads").get<int>();
  c.out_classes = j.at("out_channels").get<int>();
  c.dropout = j.at("dropout").get<double>();
  c.d_gene = j.at("gene_channels").get<int>();
  c.variant = variant_from_string(j.at("variant").get<std::string>());
  return c;
}

}  // namespace

void save_checkpoint(const std::string& path, ModelParams& params) {
  json j;
  j["config"] = config_to_json(params.config);
  json p = json::object();
  for (diff::Parameter* param : params.all()) {
    p[param->name] = json{{"rows", param->value.rows},
                          {"cols", param->value.cols},
                          {"data", param->value.data}};
  }
  j["params"] = std::move(p);
  std::ofstream out(path);
  if (!out) throw ModelError("cannot write checkpoint file " + path);
  out << j.dump();
}

ModelParams load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ModelError("cannot open checkpoint file " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ModelError("malformed checkpoint " + path + ": " + e.what());
  }
  ModelParams params(config_from_json(j.at("config")));
  const json& stored = j.at("params");
  size_t used = 0;
  for (diff::Parameter* param : params.all()) {
    auto it = stored.find(param->name);
    if (it == stored.end()) throw ModelError("checkpoint missing parameter " + param->name);
    const int rows = it->at("rows").get<int>();
    const int cols = it->at("cols").get<int>();
    if (rows != param->value.rows || cols != param->value.cols)
      throw ModelError("checkpoint parameter " + param->name + " has shape " +
                       std::to_string(rows) + "x" + std::to_string(cols) + ", expected " +
                       param->value.shape_str());
    std::vector<double> data = it->at("data").get<std::vector<double>>();
    if (data.size() != param->value.data.size())
      throw ModelError("checkpoint parameter " + param->name + " has wrong element count");
    param->value.data = std::move(data);
    ++used;
  }
  if (used != stored.size())
    throw ModelError("checkpoint contains " + std::to_string(stored.size() - used) +
                     " unknown parameter(s)");
  return params;
}

}  // namespace resgin::model
