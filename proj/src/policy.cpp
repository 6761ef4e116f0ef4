#include <maipp/policy.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace maipp {

void PolicyConfig::validate() const {
  if (d_model < 1 || layers < 0 || k_eig < 1 || ffn_hidden < 1)
    throw std::invalid_argument("policy config: dimensions must be positive");
}

namespace {

std::string layer_name(int l, const char* suffix) { return "enc" + std::to_string(l) + "." + suffix; }

nn::Mat xavier(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> u(-bound, bound);
  nn::Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = u(rng);
  return m;
}

}  // namespace

PolicyParams init_policy(const PolicyConfig& cfg, Rng& rng) {
  cfg.validate();
  const int d = cfg.d_model;
  PolicyParams p{cfg, {}};
  auto& t = p.tensors;
  t.add("embed.w", xavier(5, d, rng));
  t.add("embed.b", nn::Mat::Zero(1, d));
  t.add("pos.w", xavier(cfg.k_eig, d, rng));
  for (int l = 0; l < cfg.layers; ++l) {
    t.add(layer_name(l, "wq"), xavier(d, d, rng));
    t.add(layer_name(l, "wk"), xavier(d, d, rng));
    t.add(layer_name(l, "wv"), xavier(d, d, rng));
    t.add(layer_name(l, "ln1.g"), nn::Mat::Ones(1, d));
    t.add(layer_name(l, "ln1.b"), nn::Mat::Zero(1, d));
    t.add(layer_name(l, "ff1.w"), xavier(d, cfg.ffn_hidden, rng));
    t.add(layer_name(l, "ff1.b"), nn::Mat::Zero(1, cfg.ffn_hidden));
    t.add(layer_name(l, "ff2.w"), xavier(cfg.ffn_hidden, d, rng));
    t.add(layer_name(l, "ff2.b"), nn::Mat::Zero(1, d));
    t.add(layer_name(l, "ln2.g"), nn::Mat::Ones(1, d));
    t.add(layer_name(l, "ln2.b"), nn::Mat::Zero(1, d));
  }
  t.add("dec.ctx.w", xavier(d + 2, d, rng));
  t.add("dec.ctx.b", nn::Mat::Zero(1, d));
  t.add("lstm.wi", xavier(d, 4 * d, rng));
  t.add("lstm.wh", xavier(d, 4 * d, rng));
  t.add("lstm.b", nn::Mat::Zero(1, 4 * d));
  t.add("ptr.wq", xavier(d, d, rng));
  t.add("ptr.wk", xavier(d, d, rng));
  t.add("value.w1", xavier(d, d, rng));
  t.add("value.b1", nn::Mat::Zero(1, d));
  t.add("value.w2", xavier(d, 1, rng));
  t.add("value.b2", nn::Mat::Zero(1, 1));
  return p;
}

nn::Var attention(nn::Var h_q, nn::Var h_kv, nn::Var wq, nn::Var wk, nn::Var wv) {
  if (h_q.cols() != wq.rows() || h_kv.cols() != wk.rows() || h_kv.cols() != wv.rows())
    throw std::invalid_argument("attention: feature dimension mismatch");
  const nn::Var q = nn::matmul(h_q, wq);
  const nn::Var k = nn::matmul(h_kv, wk);
  const nn::Var v = nn::matmul(h_kv, wv);
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  const nn::Var a = nn::softmax_rows(nn::scale(nn::matmul_nt(q, k), inv_sqrt_d));
  return nn::matmul(a, v);
}

Eigen::MatrixXd attention_layer(const Eigen::MatrixXd& h_q, const Eigen::MatrixXd& h_kv, const AttentionWeights& w) {
  nn::Tape tape;
  return attention(tape.constant(h_q), tape.constant(h_kv), tape.constant(w.wq), tape.constant(w.wk),
                   tape.constant(w.wv))
      .value();
}

namespace {

Eigen::MatrixXd normalized_laplacian(const WaypointGraph& g) {
  const int n = g.size();
  Eigen::VectorXd inv_sqrt_deg(n);
  for (int i = 0; i < n; ++i) {
    const auto deg = static_cast<double>(g.neighbors(i).size());
    inv_sqrt_deg(i) = deg > 0 ? 1.0 / std::sqrt(deg) : 0.0;
  }
  Eigen::MatrixXd lap = Eigen::MatrixXd::Identity(n, n);
  for (int i = 0; i < n; ++i) {
    for (const auto& e : g.neighbors(i)) lap(i, e.to) -= inv_sqrt_deg(i) * inv_sqrt_deg(e.to);
  }
  return lap;
}

}  // namespace

Eigen::VectorXd laplacian_spectrum(const WaypointGraph& g) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(normalized_laplacian(g), Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw std::runtime_error("Laplacian eigendecomposition failed");
  return es.eigenvalues();
}

Eigen::MatrixXd positional_embedding(const WaypointGraph& g, int k_eig) {
  const int n = g.size();
  if (n < 1 || k_eig < 1) throw std::invalid_argument("positional_embedding: empty graph or k_eig < 1");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(normalized_laplacian(g));
  if (es.info() != Eigen::Success) throw std::runtime_error("Laplacian eigendecomposition failed");
  Eigen::MatrixXd pe = Eigen::MatrixXd::Zero(n, k_eig);
  const int avail = std::min(k_eig, n - 1);
  for (int c = 0; c < avail; ++c) {
    Eigen::VectorXd v = es.eigenvectors().col(c + 1);
    for (int i = 0; i < n; ++i) {
      if (std::abs(v(i)) > 1e-10) {
        if (v(i) < 0) v = -v;
        break;
      }
    }
    pe.col(c) = v;
  }
  return pe;
}

Eigen::MatrixXd flip_signs(const Eigen::MatrixXd& pe, Rng& rng) {
  std::bernoulli_distribution coin(0.5);
  Eigen::MatrixXd out = pe;
  for (Eigen::Index c = 0; c < out.cols(); ++c) {
    if (coin(rng)) out.col(c) = -out.col(c);
  }
  return out;
}

nn::Var encode(nn::Tape& tape, const Eigen::MatrixXd& nodes, const Eigen::MatrixXd& positional,
               const PolicyParams& params) {
  const auto& cfg = params.cfg;
  const auto& t = params.tensors;
  if (nodes.cols() != 5) throw std::invalid_argument("encode: expected 5 node features");
  if (positional.rows() != nodes.rows() || positional.cols() != cfg.k_eig)
    throw std::invalid_argument("encode: positional embedding shape mismatch");
  nn::Var h = nn::add_row(nn::matmul(tape.constant(nodes), tape.param(t, "embed.w")), tape.param(t, "embed.b"));
  h = nn::add(h, nn::matmul(tape.constant(positional), tape.param(t, "pos.w")));
  for (int l = 0; l < cfg.layers; ++l) {
    const nn::Var a = attention(h, h, tape.param(t, layer_name(l, "wq")), tape.param(t, layer_name(l, "wk")),
                                tape.param(t, layer_name(l, "wv")));
    h = nn::layer_norm(nn::add(h, a), tape.param(t, layer_name(l, "ln1.g")), tape.param(t, layer_name(l, "ln1.b")));
    nn::Var f = nn::tanh(nn::add_row(nn::matmul(h, tape.param(t, layer_name(l, "ff1.w"))),
                                     tape.param(t, layer_name(l, "ff1.b"))));
    f = nn::add_row(nn::matmul(f, tape.param(t, layer_name(l, "ff2.w"))), tape.param(t, layer_name(l, "ff2.b")));
    h = nn::layer_norm(nn::add(h, f), tape.param(t, layer_name(l, "ln2.g")), tape.param(t, layer_name(l, "ln2.b")));
  }
  return h;
}

Eigen::MatrixXd encode(const Eigen::MatrixXd& nodes, const Eigen::MatrixXd& positional, const PolicyParams& params) {
  nn::Tape tape;
  return encode(tape, nodes, positional, params).value();
}

DecodeVars decode(nn::Tape& tape, nn::Var embeddings, const Observation& obs, const PolicyParams& params) {
  const auto& t = params.tensors;
  const Eigen::Index d = params.cfg.d_model;
  if (obs.neighbors.empty() || obs.neighbors.size() != obs.allowed.size())
    throw std::invalid_argument("decode: neighbor list empty or mask size mismatch");
  if (std::none_of(obs.allowed.begin(), obs.allowed.end(), [](bool b) { return b; }))
    throw std::invalid_argument("decode: every neighbor masked (budget exhausted)");
  if (obs.rec.hidden.size() != d || obs.rec.cell.size() != d)
    throw std::invalid_argument("decode: recurrent state dimension mismatch");

  const nn::Var current = nn::gather_rows(embeddings, {obs.current});
  nn::Mat extra(1, 2);
  extra << obs.interest_threshold, obs.remaining_budget;
  const nn::Var ctx = nn::add_row(nn::matmul(nn::concat_cols(current, tape.constant(extra)), tape.param(t, "dec.ctx.w")),
                                  tape.param(t, "dec.ctx.b"));

  const nn::Var h_prev = tape.constant(obs.rec.hidden.transpose());
  const nn::Var c_prev = tape.constant(obs.rec.cell.transpose());
  const nn::Var gates = nn::add_row(
      nn::add(nn::matmul(ctx, tape.param(t, "lstm.wi")), nn::matmul(h_prev, tape.param(t, "lstm.wh"))),
      tape.param(t, "lstm.b"));
  const nn::Var in_gate = nn::sigmoid(nn::slice_cols(gates, 0, d));
  const nn::Var forget_gate = nn::sigmoid(nn::slice_cols(gates, d, d));
  const nn::Var cand = nn::tanh(nn::slice_cols(gates, 2 * d, d));
  const nn::Var out_gate = nn::sigmoid(nn::slice_cols(gates, 3 * d, d));
  const nn::Var cell = nn::add(nn::hadamard(forget_gate, c_prev), nn::hadamard(in_gate, cand));
  const nn::Var hidden = nn::hadamard(out_gate, nn::tanh(cell));

  const nn::Var q = nn::matmul(hidden, tape.param(t, "ptr.wq"));
  const nn::Var k = nn::matmul(nn::gather_rows(embeddings, obs.neighbors), tape.param(t, "ptr.wk"));
  const nn::Var logits = nn::scale(nn::matmul_nt(q, k), 1.0 / std::sqrt(static_cast<double>(d)));
  const nn::Var probs = nn::masked_softmax(logits, obs.allowed);

  const nn::Var v1 =
      nn::tanh(nn::add_row(nn::matmul(hidden, tape.param(t, "value.w1")), tape.param(t, "value.b1")));
  const nn::Var value = nn::add(nn::matmul(v1, tape.param(t, "value.w2")), tape.param(t, "value.b2"));
  return {probs, value, hidden, cell};
}

DecodeVars forward(nn::Tape& tape, const Observation& obs, const PolicyParams& params) {
  const nn::Var emb = encode(tape, obs.nodes, obs.positional, params);
  return decode(tape, emb, obs, params);
}

PolicyOutput evaluate(const Observation& obs, const PolicyParams& params) {
  nn::Tape tape;
  const DecodeVars out = forward(tape, obs, params);
  PolicyOutput po;
  po.probs = out.probs.value().row(0).transpose();
  po.value = out.value.scalar();
  po.next.hidden = out.hidden.value().row(0).transpose();
  po.next.cell = out.cell.value().row(0).transpose();
  return po;
}

Eigen::VectorXd random_policy(const Observation& obs) {
  Eigen::VectorXd p = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(obs.neighbors.size()));
  const auto count = std::count(obs.allowed.begin(), obs.allowed.end(), true);
  if (count == 0) throw std::invalid_argument("random_policy: every neighbor masked");
  for (std::size_t i = 0; i < obs.allowed.size(); ++i) {
    if (obs.allowed[i]) p(static_cast<Eigen::Index>(i)) = 1.0 / static_cast<double>(count);
  }
  return p;
}

int sample_action(const Eigen::VectorXd& probs, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double r = u(rng);
  double acc = 0.0;
  int last = -1;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    if (probs(i) <= 0.0) continue;
    acc += probs(i);
    last = static_cast<int>(i);
    if (r < acc) return last;
  }
  if (last < 0) throw std::invalid_argument("sample_action: no positive probability");
  return last;
}

int greedy_action(const Eigen::VectorXd& probs) {
  Eigen::Index best = 0;
  probs.maxCoeff(&best);
  return static_cast<int>(best);
}

double gradient_check(const PolicyParams& params, const Observation& obs, int action, Rng& rng,
                      std::size_t max_coords, double step) {
  PolicyParams work = params;
  auto objectives = [&](const PolicyParams& p) {
    nn::Tape tape;
    const DecodeVars out = forward(tape, obs, p);
    return std::pair{std::log(out.probs.value()(0, action)), out.value.scalar()};
  };

  nn::ParamSet grad_logp = params.tensors.zeros_like();
  nn::ParamSet grad_value = params.tensors.zeros_like();
  {
    nn::Tape tape;
    const DecodeVars out = forward(tape, obs, work);
    tape.backward(nn::log(nn::element(out.probs, 0, action)));
    tape.accumulate(grad_logp);
  }
  {
    nn::Tape tape;
    const DecodeVars out = forward(tape, obs, work);
    tape.backward(out.value);
    tape.accumulate(grad_value);
  }

  std::vector<std::pair<std::size_t, Eigen::Index>> coords;
  for (std::size_t i = 0; i < work.tensors.size(); ++i) {
    for (Eigen::Index j = 0; j < work.tensors[i].size(); ++j) coords.emplace_back(i, j);
  }
  if (max_coords > 0 && max_coords < coords.size()) {
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(max_coords);
  }

  constexpr double kFloor = 1e-6;
  double worst = 0.0;
  for (const auto& [ti, j] : coords) {
    double& x = work.tensors[ti](j);
    const double saved = x;
    x = saved + step;
    const auto plus = objectives(work);
    x = saved - step;
    const auto minus = objectives(work);
    x = saved;
    const double fd_logp = (plus.first - minus.first) / (2.0 * step);
    const double fd_value = (plus.second - minus.second) / (2.0 * step);
    const double an_logp = grad_logp[ti](j);
    const double an_value = grad_value[ti](j);
    worst = std::max(worst, std::abs(an_logp - fd_logp) / std::max({std::abs(an_logp), std::abs(fd_logp), kFloor}));
    worst = std::max(worst,
                     std::abs(an_value - fd_value) / std::max({std::abs(an_value), std::abs(fd_value), kFloor}));
  }
  return worst;
}

namespace {

constexpr char kMagic[8] = {'M', 'A', 'I', 'P', 'P', 'C', 'K', 'P'};
constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("checkpoint: truncated file");
  return v;
}

}  // namespace

void save_checkpoint(std::ostream& os, const PolicyParams& params) {
  os.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(os, kCheckpointVersion);
  put<std::int32_t>(os, params.cfg.d_model);
  put<std::int32_t>(os, params.cfg.layers);
  put<std::int32_t>(os, params.cfg.k_eig);
  put<std::int32_t>(os, params.cfg.ffn_hidden);
  put<std::uint64_t>(os, params.tensors.size());
  for (std::size_t i = 0; i < params.tensors.size(); ++i) {
    const std::string& name = params.tensors.name(i);
    const nn::Mat& m = params.tensors[i];
    put<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::int64_t>(os, m.rows());
    put<std::int64_t>(os, m.cols());
    os.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(sizeof(double) * m.size()));
  }
  if (!os) throw std::runtime_error("checkpoint: write failed");
}

PolicyParams load_checkpoint(std::istream& is) {
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || !std::equal(magic, magic + 8, kMagic)) throw std::runtime_error("checkpoint: bad magic");
  if (get<std::uint32_t>(is) != kCheckpointVersion) throw std::runtime_error("checkpoint: unsupported version");
  PolicyParams p;
  p.cfg.d_model = get<std::int32_t>(is);
  p.cfg.layers = get<std::int32_t>(is);
  p.cfg.k_eig = get<std::int32_t>(is);
  p.cfg.ffn_hidden = get<std::int32_t>(is);
  p.cfg.validate();
  const auto count = get<std::uint64_t>(is);
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto len = get<std::uint32_t>(is);
    std::string name(len, '\0');
    is.read(name.data(), len);
    const auto rows = get<std::int64_t>(is);
    const auto cols = get<std::int64_t>(is);
    if (rows < 0 || cols < 0) throw std::runtime_error("checkpoint: bad tensor shape");
    nn::Mat m(rows, cols);
    is.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(sizeof(double) * m.size()));
    if (!is) throw std::runtime_error("checkpoint: truncated tensor " + name);
    p.tensors.add(std::move(name), std::move(m));
  }
  Rng probe(0);
  const PolicyParams layout = init_policy(p.cfg, probe);
  if (layout.tensors.size() != p.tensors.size()) throw std::runtime_error("checkpoint: tensor count mismatch");
  for (std::size_t i = 0; i < layout.tensors.size(); ++i) {
    if (layout.tensors.name(i) != p.tensors.name(i) || layout.tensors[i].rows() != p.tensors[i].rows() ||
        layout.tensors[i].cols() != p.tensors[i].cols())
      throw std::runtime_error("checkpoint: layout mismatch at " + p.tensors.name(i));
  }
  return p;
}

void save_checkpoint(const std::string& path, const PolicyParams& params) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  save_checkpoint(os, params);
}

PolicyParams load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("missing checkpoint: " + path);
  return load_checkpoint(is);
}

}  // namespace maipp
