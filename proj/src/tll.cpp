#include "tllarch/tll.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "tllarch/error.hpp"
#include "tllarch/hexfloat.hpp"

namespace tllarch {
namespace {

Vec piece_key(const AffinePiece& p) {
  Vec key;
  for (double v : p.w) key.push_back(std::round(v * 1e12) / 1e12 + 0.0);
  key.push_back(std::round(p.b * 1e12) / 1e12 + 0.0);
  return key;
}

using Bits = std::vector<std::uint64_t>;

Bits to_bits(const std::vector<std::uint32_t>& set, std::size_t n) {
  Bits b((n + 63) / 64, 0);
  for (auto i : set) b[i / 64] |= std::uint64_t{1} << (i % 64);
  return b;
}

bool is_subset(const Bits& a, const Bits& b) {
  for (std::size_t k = 0; k < a.size(); ++k) {
    if ((a[k] & ~b[k]) != 0) return false;
  }
  return true;
}

std::vector<std::vector<std::uint32_t>> prune_selectors(std::vector<std::vector<std::uint32_t>> sets,
                                                        std::size_t bank_size) {
  for (auto& s : sets) std::sort(s.begin(), s.end());
  std::sort(sets.begin(), sets.end(), [](const auto& a, const auto& b) {
    return a.size() != b.size() ? a.size() < b.size() : a < b;
  });
  sets.erase(std::unique(sets.begin(), sets.end()), sets.end());
  std::vector<std::vector<std::uint32_t>> kept;
  std::vector<Bits> kept_bits;
  for (auto& s : sets) {
    Bits b = to_bits(s, bank_size);
    bool dominated = false;
    for (const auto& k : kept_bits) {
      if (is_subset(k, b)) {
        dominated = true;
        break;
      }
    }
    if (!dominated) {
      kept_bits.push_back(std::move(b));
      kept.push_back(std::move(s));
    }
  }
  return kept;
}

double scan_set(const std::vector<std::uint32_t>& set, const Vec& values, double best) {
  double m = std::numeric_limits<double>::infinity();
  for (auto i : set) {
    m = std::min(m, values[i]);
    if (m <= best) break;
  }
  return m;
}

}  // namespace

double ScalarTll::eval(std::span<const double> x) const {
  Vec values(bank.size());
  for (std::size_t i = 0; i < bank.size(); ++i) values[i] = bank[i].eval(x);
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& s : selectors) best = std::max(best, scan_set(s, values, best));
  return best;
}

double TllNetwork::max_gradient_norm() const {
  double g = 0.0;
  for (const auto& o : outputs) {
    for (const auto& p : o.bank) g = std::max(g, p.dual_norm());
  }
  return g;
}

ScalarTll compile_lattice(const std::vector<AffinePiece>& pieces, const std::vector<std::vector<Vec>>& vertices,
                          const LatticeOptions& options) {
  if (pieces.empty() || pieces.size() != vertices.size()) {
    throw Error(ErrorCode::DimensionMismatch, "need one vertex list per piece");
  }
  ScalarTll out;
  std::map<Vec, std::uint32_t> index;
  std::vector<std::uint32_t> active(pieces.size());
  for (std::size_t k = 0; k < pieces.size(); ++k) {
    auto [it, inserted] = index.emplace(piece_key(pieces[k]), static_cast<std::uint32_t>(out.bank.size()));
    if (inserted) out.bank.push_back(pieces[k]);
    active[k] = it->second;
  }
  const std::size_t nb = out.bank.size();
  Vec act_vals;
  for (std::size_t k = 0; k < pieces.size(); ++k) {
    const auto& verts = vertices[k];
    act_vals.resize(verts.size());
    for (std::size_t v = 0; v < verts.size(); ++v) act_vals[v] = out.bank[active[k]].eval(verts[v]);
    std::vector<std::uint32_t> set;
    for (std::size_t i = 0; i < nb; ++i) {
      bool dominates = true;
      for (std::size_t v = 0; v < verts.size() && dominates; ++v) {
        const double slack = options.dominance_tol * (1.0 + std::abs(act_vals[v]));
        dominates = out.bank[i].eval(verts[v]) >= act_vals[v] - slack;
      }
      if (dominates) set.push_back(static_cast<std::uint32_t>(i));
    }
    if (set.empty()) throw Error(ErrorCode::EmptySelector, "region " + std::to_string(k) + " has an empty selector");
    out.selectors.push_back(std::move(set));
  }
  if (options.prune) out.selectors = prune_selectors(std::move(out.selectors), nb);
  return out;
}

ScalarTll compile_scalar_tll(const CpwaInterpolant& interp, std::size_t output, const LatticeOptions& options) {
  const Tiling& tiling = interp.tiling();
  const std::size_t perms = tiling.permutations().size();
  std::vector<AffinePiece> pieces;
  std::vector<std::vector<Vec>> verts;
  pieces.reserve(interp.simplex_count());
  verts.reserve(interp.simplex_count());
  for (std::size_t c = 0; c < tiling.cubes().size(); ++c) {
    for (std::size_t r = 0; r < perms; ++r) {
      pieces.push_back(interp.piece(c, r, output));
      verts.push_back(tiling.simplex_points(c, tiling.permutations()[r]));
    }
  }
  return compile_lattice(pieces, verts, options);
}

TllNetwork compile_tll(const CpwaInterpolant& interp, std::uint64_t bound_n, const LatticeOptions& options) {
  TllNetwork net;
  net.n = interp.dim();
  for (std::size_t j = 0; j < interp.outputs(); ++j) net.outputs.push_back(compile_scalar_tll(interp, j, options));
  net.provenance = {interp.tiling().eta(), interp.k_cont(), bound_n};
  return net;
}

TllNetwork parallel_compose(const std::vector<TllNetwork>& nets) {
  if (nets.empty()) throw Error(ErrorCode::DimensionMismatch, "nothing to compose");
  TllNetwork out;
  out.n = nets.front().n;
  out.provenance = nets.front().provenance;
  for (const auto& net : nets) {
    if (net.n != out.n) {
      throw Error(ErrorCode::DimensionMismatch, "input dimensions " + std::to_string(net.n) + " and " +
                                                    std::to_string(out.n) + " differ");
    }
    out.outputs.insert(out.outputs.end(), net.outputs.begin(), net.outputs.end());
    out.provenance.eta = std::min(out.provenance.eta, net.provenance.eta);
    out.provenance.k_cont = std::max(out.provenance.k_cont, net.provenance.k_cont);
    out.provenance.bound_n = std::max(out.provenance.bound_n, net.provenance.bound_n);
  }
  return out;
}

Vec eval_tll(const TllNetwork& net, std::span<const double> x) {
  Vec out(net.m());
  for (std::size_t j = 0; j < net.m(); ++j) out[j] = net.outputs[j].eval(x);
  return out;
}

TllEvaluator::TllEvaluator(const TllNetwork& net) : net_(&net) {
  last_winner_.assign(net.m(), 0);
  witness_.resize(net.m());
  for (std::size_t j = 0; j < net.m(); ++j) witness_[j].assign(net.outputs[j].selectors.size(), 0);
}

Vec TllEvaluator::operator()(std::span<const double> x) {
  Vec out(net_->m());
  for (std::size_t j = 0; j < net_->m(); ++j) {
    const ScalarTll& o = net_->outputs[j];
    values_.resize(o.bank.size());
    for (std::size_t i = 0; i < o.bank.size(); ++i) values_[i] = o.bank[i].eval(x);
    auto& wit = witness_[j];
    const std::size_t first = last_winner_[j];
    double best = -std::numeric_limits<double>::infinity();
    std::size_t winner = first;
    for (std::size_t step = 0; step < o.selectors.size(); ++step) {
      const std::size_t k = step == 0 ? first : (step <= first ? step - 1 : step);
      const auto& set = o.selectors[k];
      if (values_[set[wit[k]]] <= best) continue;
      double m = std::numeric_limits<double>::infinity();
      for (std::size_t p = 0; p < set.size(); ++p) {
        m = std::min(m, values_[set[p]]);
        if (m <= best) {
          wit[k] = static_cast<std::uint32_t>(p);
          break;
        }
      }
      if (m > best) {
        best = m;
        winner = k;
      }
    }
    last_winner_[j] = winner;
    out[j] = best;
  }
  return out;
}

std::vector<std::size_t> relu_widths(const ScalarTll& out) {
  std::vector<std::size_t> widths;
  std::vector<std::size_t> groups;
  for (const auto& s : out.selectors) groups.push_back(s.size());
  auto any_open = [&] { return std::any_of(groups.begin(), groups.end(), [](std::size_t g) { return g > 1; }); };
  while (any_open()) {
    std::size_t w = 0;
    for (auto& g : groups) {
      w += g > 1 ? 3 * (g / 2) + 2 * (g % 2) : 2;
      g = (g + 1) / 2;
    }
    widths.push_back(w);
  }
  std::size_t mcount = out.selectors.size();
  while (mcount > 1) {
    widths.push_back(3 * (mcount / 2) + 2 * (mcount % 2));
    mcount = (mcount + 1) / 2;
  }
  return widths;
}

nlohmann::json ArchDescriptor::to_json() const {
  return {{"n", n},         {"m", m}, {"N", bank_sizes}, {"M", selector_counts}, {"layers", layers},
          {"neurons", neurons}, {"note", "shapes of this implementation's min/max ReLU expansion"}};
}

ArchDescriptor arch_descriptor(const TllNetwork& net, std::uint64_t bound_n) {
  ArchDescriptor d;
  d.n = net.n;
  d.m = net.m();
  std::vector<std::vector<std::size_t>> per_output;
  std::size_t depth = 0;
  for (std::size_t j = 0; j < net.m(); ++j) {
    const auto& o = net.outputs[j];
    if (o.bank.size() > bound_n) {
      throw Error(ErrorCode::BoundViolated, "output " + std::to_string(j) + " has N=" + std::to_string(o.bank.size()) +
                                                " above bound " + std::to_string(bound_n));
    }
    d.bank_sizes.push_back(o.bank.size());
    d.selector_counts.push_back(o.selectors.size());
    per_output.push_back(relu_widths(o));
    depth = std::max(depth, per_output.back().size());
  }
  d.layers.push_back(net.n);
  for (std::size_t level = 0; level < depth; ++level) {
    std::size_t w = 0;
    for (const auto& widths : per_output) w += level < widths.size() ? widths[level] : 2;
    d.layers.push_back(w);
    d.neurons += w;
  }
  d.layers.push_back(net.m());
  return d;
}

namespace {

// Affine combination of the previous layer's outputs.
struct Lin {
  Vec coef;
  double c = 0.0;
};

struct Stage {
  bool max_phase = false;
  std::vector<std::vector<Lin>> groups;
};

class LayerBuilder {
 public:
  explicit LayerBuilder(std::size_t in) : in_(in) {}

  // Adds relu(l) and returns the neuron index.
  std::size_t relu(const Lin& l) {
    layer_.weights.push_back(l.coef);
    layer_.bias.push_back(l.c);
    return layer_.bias.size() - 1;
  }

  Lin sub(const Lin& a, const Lin& b) const {
    Lin r{Vec(in_), a.c - b.c};
    for (std::size_t k = 0; k < in_; ++k) r.coef[k] = a.coef[k] - b.coef[k];
    return r;
  }

  Lin neg(const Lin& a) const {
    Lin r{Vec(in_), -a.c};
    for (std::size_t k = 0; k < in_; ++k) r.coef[k] = -a.coef[k];
    return r;
  }

  DenseLayer take() { return std::move(layer_); }
  std::size_t width() const { return layer_.bias.size(); }

 private:
  std::size_t in_;
  DenseLayer layer_;
};

// A value expressed over the next layer: sum of signed neuron indices.
struct Pending {
  std::vector<std::pair<std::size_t, double>> terms;
};

}  // namespace

std::vector<DenseLayer> expand_relu(const TllNetwork& net, std::size_t max_neurons) {
  const ArchDescriptor d = arch_descriptor(net, std::numeric_limits<std::uint64_t>::max());
  if (d.neurons > max_neurons) {
    throw Error(ErrorCode::BudgetExceeded, "expansion needs " + std::to_string(d.neurons) + " neurons");
  }
  std::vector<Stage> stages(net.m());
  for (std::size_t j = 0; j < net.m(); ++j) {
    const auto& o = net.outputs[j];
    for (const auto& s : o.selectors) {
      std::vector<Lin> g;
      for (auto i : s) g.push_back({o.bank[i].w, o.bank[i].b});
      stages[j].groups.push_back(std::move(g));
    }
  }
  auto advance_phase = [](Stage& st) {
    if (!st.max_phase) {
      bool open = std::any_of(st.groups.begin(), st.groups.end(), [](const auto& g) { return g.size() > 1; });
      if (!open) {
        std::vector<Lin> merged;
        for (auto& g : st.groups) merged.push_back(std::move(g.front()));
        st.groups = {std::move(merged)};
        st.max_phase = true;
      }
    }
  };
  std::vector<DenseLayer> layers;
  std::size_t in = net.n;
  for (auto& st : stages) advance_phase(st);
  auto finished = [&] {
    return std::all_of(stages.begin(), stages.end(),
                       [](const Stage& st) { return st.max_phase && st.groups.front().size() == 1; });
  };
  while (!finished()) {
    LayerBuilder lb(in);
    std::vector<std::vector<std::vector<Pending>>> next(stages.size());
    for (std::size_t j = 0; j < stages.size(); ++j) {
      for (const auto& g : stages[j].groups) {
        std::vector<Pending> out;
        for (std::size_t k = 0; k + 1 < g.size(); k += 2) {
          const Lin& a = g[k];
          const Lin& b = g[k + 1];
          const std::size_t p = lb.relu(a);
          const std::size_t q = lb.relu(lb.neg(a));
          if (stages[j].max_phase) {
            const std::size_t r = lb.relu(lb.sub(b, a));  // max(a,b) = a + relu(b-a)
            out.push_back({{{p, 1.0}, {q, -1.0}, {r, 1.0}}});
          } else {
            const std::size_t r = lb.relu(lb.sub(a, b));  // min(a,b) = a - relu(a-b)
            out.push_back({{{p, 1.0}, {q, -1.0}, {r, -1.0}}});
          }
        }
        if (g.size() % 2 == 1) {
          const Lin& a = g.back();
          const std::size_t p = lb.relu(a);
          const std::size_t q = lb.relu(lb.neg(a));
          out.push_back({{{p, 1.0}, {q, -1.0}}});
        }
        next[j].push_back(std::move(out));
      }
    }
    const std::size_t width = lb.width();
    layers.push_back(lb.take());
    for (std::size_t j = 0; j < stages.size(); ++j) {
      for (std::size_t gi = 0; gi < stages[j].groups.size(); ++gi) {
        std::vector<Lin> g;
        for (const auto& pend : next[j][gi]) {
          Lin l{Vec(width, 0.0), 0.0};
          for (auto [idx, sgn] : pend.terms) l.coef[idx] += sgn;
          g.push_back(std::move(l));
        }
        stages[j].groups[gi] = std::move(g);
      }
      advance_phase(stages[j]);
    }
    in = width;
  }
  DenseLayer last;
  last.relu = false;
  for (const auto& st : stages) {
    last.weights.push_back(st.groups.front().front().coef);
    last.bias.push_back(st.groups.front().front().c);
  }
  layers.push_back(std::move(last));
  return layers;
}

Vec eval_dense(const std::vector<DenseLayer>& layers, std::span<const double> x) {
  Vec cur(x.begin(), x.end());
  for (const auto& layer : layers) {
    Vec nxt(layer.bias.size());
    for (std::size_t r = 0; r < nxt.size(); ++r) {
      double s = layer.bias[r];
      for (std::size_t k = 0; k < cur.size(); ++k) s += layer.weights[r][k] * cur[k];
      nxt[r] = layer.relu ? std::max(0.0, s) : s;
    }
    cur = std::move(nxt);
  }
  return cur;
}

nlohmann::json export_network(const TllNetwork& net) {
  nlohmann::json outs = nlohmann::json::array();
  for (const auto& o : net.outputs) {
    nlohmann::json bank = nlohmann::json::array();
    for (const auto& p : o.bank) bank.push_back({{"w", hex_array(p.w)}, {"b", to_hexfloat(p.b)}});
    outs.push_back({{"bank", bank}, {"selectors", o.selectors}});
  }
  return {{"n", net.n},
          {"m", net.m()},
          {"outputs", outs},
          {"provenance",
           {{"eta", to_hexfloat(net.provenance.eta)},
            {"K_cont", to_hexfloat(net.provenance.k_cont)},
            {"bound_N", net.provenance.bound_n}}}};
}

TllNetwork import_network(const nlohmann::json& doc) {
  TllNetwork net;
  try {
    net.n = doc.at("n").get<std::size_t>();
    const std::size_t m = doc.at("m").get<std::size_t>();
    const auto& outs = doc.at("outputs");
    if (!outs.is_array()) throw Error(ErrorCode::SchemaError, "outputs must be an array");
    for (const auto& o : outs) {
      ScalarTll s;
      for (const auto& p : o.at("bank")) s.bank.push_back({vec_from_json(p.at("w")), json_to_double(p.at("b"))});
      s.selectors = o.at("selectors").get<std::vector<std::vector<std::uint32_t>>>();
      net.outputs.push_back(std::move(s));
    }
    const auto& prov = doc.at("provenance");
    net.provenance.eta = json_to_double(prov.at("eta"));
    net.provenance.k_cont = json_to_double(prov.at("K_cont"));
    net.provenance.bound_n = prov.at("bound_N").get<std::uint64_t>();
    if (net.m() != m) throw Error(ErrorCode::InvariantViolation, "m does not match the number of outputs");
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaError, e.what());
  }
  if (net.n == 0 || net.m() == 0) throw Error(ErrorCode::InvariantViolation, "network needs n >= 1 and m >= 1");
  for (std::size_t j = 0; j < net.m(); ++j) {
    const auto& o = net.outputs[j];
    if (o.bank.empty() || o.selectors.empty()) {
      throw Error(ErrorCode::InvariantViolation, "output " + std::to_string(j) + " has an empty bank or no selectors");
    }
    for (const auto& p : o.bank) {
      if (p.w.size() != net.n || !all_finite(p.w) || !std::isfinite(p.b)) {
        throw Error(ErrorCode::InvariantViolation, "bank entry has wrong dimension or non-finite weights");
      }
    }
    for (const auto& s : o.selectors) {
      if (s.empty()) throw Error(ErrorCode::InvariantViolation, "empty selector set");
      for (auto i : s) {
        if (i >= o.bank.size()) {
          throw Error(ErrorCode::InvariantViolation, "selector index " + std::to_string(i) + " out of range");
        }
      }
    }
  }
  return net;
}

}  // namespace tllarch
