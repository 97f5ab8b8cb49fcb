#include "omqa/model.hpp"

#include <algorithm>
#include <cmath>

#include "omqa/error.hpp"
#include "omqa/rng.hpp"

namespace omqa {

std::vector<ArrayRef> Parameters::arrays() {
    const std::size_t n = nodes, r = relations;
    return {{"entity", &entity, n, d},          {"relation.center", &rel_center, r, d},
            {"relation.offset", &rel_offset, r, d}, {"attn.w1", &attn_w1, d, d},
            {"attn.b1", &attn_b1, 1, d},        {"attn.w2", &attn_w2, d, d},
            {"attn.b2", &attn_b2, 1, d},        {"deepsets.u1", &ds_u1, d, d},
            {"deepsets.c1", &ds_c1, 1, d},      {"deepsets.u2", &ds_u2, d, d},
            {"deepsets.c2", &ds_c2, 1, d},      {"deepsets.v", &ds_v, d, d},
            {"deepsets.e", &ds_e, 1, d}};
}

std::vector<ConstArrayRef> Parameters::arrays() const {
    std::vector<ConstArrayRef> out;
    for (auto& a : const_cast<Parameters*>(this)->arrays()) out.push_back({a.name, a.data, a.rows, a.cols});
    return out;
}

std::string Parameters::first_non_finite() const {
    for (const auto& a : arrays()) {
        for (float x : *a.data) {
            if (!std::isfinite(x)) return a.name;
        }
    }
    return {};
}

Parameters init_parameters(std::size_t nodes, std::size_t relations, std::size_t d, double gamma,
                           std::uint64_t seed) {
    if (d == 0) throw ConfigError("embedding dimension must be positive");
    if (!(gamma > 0)) throw ConfigError("margin gamma must be positive");
    Parameters p;
    p.d = d;
    p.gamma = gamma;
    p.nodes = nodes;
    p.relations = relations;
    Rng rng = Rng::stream(seed, "init");
    const double s = 0.5 / std::sqrt(static_cast<double>(d));
    const double glorot = std::sqrt(6.0 / (2.0 * static_cast<double>(d)));
    auto fill = [&](std::vector<float>& v, std::size_t n, double lo, double hi) {
        v.resize(n);
        for (auto& x : v) x = static_cast<float>(rng.uniform(lo, hi));
    };
    fill(p.entity, nodes * d, -s, s);
    fill(p.rel_center, relations * d, -s, s);
    fill(p.rel_offset, relations * d, 0.0, s);
    fill(p.attn_w1, d * d, -glorot, glorot);
    fill(p.attn_w2, d * d, -glorot, glorot);
    fill(p.ds_u1, d * d, -glorot, glorot);
    fill(p.ds_u2, d * d, -glorot, glorot);
    fill(p.ds_v, d * d, -glorot, glorot);
    for (auto* b : {&p.attn_b1, &p.attn_b2, &p.ds_c1, &p.ds_c2, &p.ds_e}) b->assign(d, 0.0f);
    return p;
}

namespace {

using Vec = std::vector<double>;

// y = W x + b (W row-major d×d)
Vec affine(const std::vector<float>& w, const std::vector<float>& b, const Vec& x) {
    const std::size_t d = x.size();
    Vec y(d);
    for (std::size_t r = 0; r < d; ++r) {
        double acc = b[r];
        const float* row = &w[r * d];
        for (std::size_t c = 0; c < d; ++c) acc += row[c] * x[c];
        y[r] = acc;
    }
    return y;
}

Vec relu(Vec v) {
    for (auto& x : v) x = x > 0 ? x : 0;
    return v;
}

double sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

double sign(double x) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); }

Vec row(const std::vector<float>& table, std::size_t r, std::size_t d) {
    return Vec(table.begin() + static_cast<std::ptrdiff_t>(r * d), table.begin() + static_cast<std::ptrdiff_t>((r + 1) * d));
}

// per-input attention state kept for the backward pass
struct AttnState {
    std::vector<Vec> z;  // W1 c + b1
    std::vector<Vec> h;  // relu(z)
    std::vector<Vec> w;  // softmax weights
};

// attention weights over input centers, per dimension
AttnState attention(const Parameters& p, const std::vector<const Vec*>& cs) {
    const std::size_t d = p.d, n = cs.size();
    AttnState s;
    std::vector<Vec> logits;
    for (const Vec* c : cs) {
        s.z.push_back(affine(p.attn_w1, p.attn_b1, *c));
        s.h.push_back(relu(s.z.back()));
        logits.push_back(affine(p.attn_w2, p.attn_b2, s.h.back()));
    }
    s.w.assign(n, Vec(d));
    for (std::size_t k = 0; k < d; ++k) {
        double mx = logits[0][k];
        for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, logits[i][k]);
        double z = 0;
        for (std::size_t i = 0; i < n; ++i) z += (s.w[i][k] = std::exp(logits[i][k] - mx));
        for (std::size_t i = 0; i < n; ++i) s.w[i][k] /= z;
    }
    return s;
}

Vec intersect_offset(const Parameters& p, const std::vector<const Vec*>& offs) {
    const std::size_t d = p.d;
    Vec mean(d, 0.0), mn = *offs[0];
    for (const Vec* o : offs) {
        Vec h = relu(affine(p.ds_u2, p.ds_c2, relu(affine(p.ds_u1, p.ds_c1, *o))));
        for (std::size_t k = 0; k < d; ++k) {
            mean[k] += h[k] / static_cast<double>(offs.size());
            mn[k] = std::min(mn[k], (*o)[k]);
        }
    }
    Vec psi = affine(p.ds_v, p.ds_e, mean);
    for (std::size_t k = 0; k < d; ++k) mn[k] *= sigmoid(psi[k]);
    return mn;
}

}  // namespace

Box embed_entity(const Parameters& p, NodeId c) {
    if (c >= p.nodes) throw LookupError("no embedding row for node id " + std::to_string(c));
    return Box{row(p.entity, c, p.d), Vec(p.d, 0.0)};
}

Box project(const Box& b, RelId r, const Parameters& p) {
    if (r >= p.relations) throw LookupError("no embedding row for relation id " + std::to_string(r));
    Box out = b;
    for (std::size_t k = 0; k < p.d; ++k) {
        out.center[k] += p.rel_center[r * p.d + k];
        out.offset[k] += std::max(0.0f, p.rel_offset[r * p.d + k]);
    }
    return out;
}

Box intersect(const std::vector<Box>& boxes, const Parameters& p) {
    if (boxes.size() < 2) throw ContractError("intersection needs at least two boxes");
    std::vector<const Vec*> cs, os;
    for (const auto& b : boxes) {
        if (b.center.size() != p.d || b.offset.size() != p.d) throw ContractError("box dimension mismatch");
        cs.push_back(&b.center);
        os.push_back(&b.offset);
    }
    auto att = attention(p, cs);
    Box out{Vec(p.d, 0.0), intersect_offset(p, os)};
    for (std::size_t i = 0; i < boxes.size(); ++i) {
        for (std::size_t k = 0; k < p.d; ++k) out.center[k] += att.w[i][k] * boxes[i].center[k];
    }
    return out;
}

QueryEmbedding embed_plan(const Parameters& p, const QueryPlan& plan) {
    std::vector<Box> val(plan.nodes.size());
    for (std::size_t i = 0; i < plan.nodes.size(); ++i) {
        const auto& n = plan.nodes[i];
        switch (n.kind) {
            case PlanNode::Kind::Anchor: val[i] = embed_entity(p, n.anchor); break;
            case PlanNode::Kind::Project: val[i] = project(val[n.inputs[0]], n.rel, p); break;
            case PlanNode::Kind::Intersect: {
                std::vector<Box> in;
                for (auto j : n.inputs) in.push_back(val[j]);
                val[i] = intersect(in, p);
                break;
            }
        }
    }
    QueryEmbedding e;
    for (auto o : plan.outputs) e.branches.push_back(val[o]);
    return e;
}

QueryEmbedding embed_query(const Parameters& p, const ConjunctiveQuery& q) { return embed_plan(p, plan_query(q)); }

double distance(const QueryEmbedding& e, std::span<const double> v) {
    double best = INFINITY;
    for (const auto& b : e.branches) {
        if (b.center.size() != v.size()) throw ContractError("dimension mismatch in distance");
        double s = 0;
        for (std::size_t k = 0; k < v.size(); ++k) s += std::abs(b.center[k] - v[k]);
        best = std::min(best, s);
    }
    return best;
}

double distance(const QueryEmbedding& e, const Parameters& p, NodeId v) {
    auto pt = embed_entity(p, v).center;
    return distance(e, pt);
}

double prob(double dist, double gamma) { return sigmoid(gamma - dist); }

double log_sigmoid(double x) {
    // log σ(x) = -log(1 + e^{-x})
    if (x < -30) return x - std::log1p(std::exp(x));
    return -std::log1p(std::exp(-x));
}

// ---------------------------------------------------------------------------
// centers-only forward with tape, and its reverse pass

namespace {

struct Tape {
    std::vector<Vec> cen;
    std::vector<AttnState> att;  // indexed like nodes; empty unless Intersect
};

void forward(const Parameters& p, const QueryPlan& plan, Tape& t) {
    const std::size_t d = p.d;
    t.cen.assign(plan.nodes.size(), {});
    t.att.assign(plan.nodes.size(), {});
    for (std::size_t i = 0; i < plan.nodes.size(); ++i) {
        const auto& n = plan.nodes[i];
        switch (n.kind) {
            case PlanNode::Kind::Anchor:
                if (n.anchor >= p.nodes) throw LookupError("no embedding row for node id " + std::to_string(n.anchor));
                t.cen[i] = row(p.entity, n.anchor, d);
                break;
            case PlanNode::Kind::Project: {
                if (n.rel >= p.relations) throw LookupError("no embedding row for relation id " + std::to_string(n.rel));
                t.cen[i] = t.cen[n.inputs[0]];
                for (std::size_t k = 0; k < d; ++k) t.cen[i][k] += p.rel_center[n.rel * d + k];
                break;
            }
            case PlanNode::Kind::Intersect: {
                std::vector<const Vec*> cs;
                for (auto j : n.inputs) cs.push_back(&t.cen[j]);
                t.att[i] = attention(p, cs);
                Vec c(d, 0.0);
                for (std::size_t a = 0; a < cs.size(); ++a) {
                    for (std::size_t k = 0; k < d; ++k) c[k] += t.att[i].w[a][k] * (*cs[a])[k];
                }
                t.cen[i] = std::move(c);
                break;
            }
        }
    }
}

// dout: gradient w.r.t. each node's center (outputs pre-filled); scale already applied
void reverse(const Parameters& p, const QueryPlan& plan, const Tape& t, std::vector<Vec>& dcen, Gradients& g) {
    const std::size_t d = p.d;
    for (std::size_t ii = plan.nodes.size(); ii-- > 0;) {
        const auto& n = plan.nodes[ii];
        const Vec& dc = dcen[ii];
        if (dc.empty()) continue;
        switch (n.kind) {
            case PlanNode::Kind::Anchor:
                g.touch_entity(n.anchor);
                for (std::size_t k = 0; k < d; ++k) g.entity[n.anchor * d + k] += dc[k];
                break;
            case PlanNode::Kind::Project: {
                g.touch_relation(n.rel);
                for (std::size_t k = 0; k < d; ++k) g.rel_center[n.rel * d + k] += dc[k];
                auto& din = dcen[n.inputs[0]];
                if (din.empty()) din.assign(d, 0.0);
                for (std::size_t k = 0; k < d; ++k) din[k] += dc[k];
                break;
            }
            case PlanNode::Kind::Intersect: {
                const auto& s = t.att[ii];
                const std::size_t m = n.inputs.size();
                // dL/dw_i = dc ⊙ c_i ; softmax backward per dimension
                std::vector<Vec> dlogit(m, Vec(d));
                for (std::size_t k = 0; k < d; ++k) {
                    double dot = 0;
                    for (std::size_t a = 0; a < m; ++a) dot += s.w[a][k] * dc[k] * t.cen[n.inputs[a]][k];
                    for (std::size_t a = 0; a < m; ++a) {
                        dlogit[a][k] = s.w[a][k] * (dc[k] * t.cen[n.inputs[a]][k] - dot);
                    }
                }
                for (std::size_t a = 0; a < m; ++a) {
                    auto& din = dcen[n.inputs[a]];
                    if (din.empty()) din.assign(d, 0.0);
                    for (std::size_t k = 0; k < d; ++k) din[k] += s.w[a][k] * dc[k];
                    const Vec& dl = dlogit[a];
                    // logits = W2 h + b2
                    Vec dh(d, 0.0);
                    for (std::size_t r = 0; r < d; ++r) {
                        g.attn_b2[r] += dl[r];
                        if (dl[r] == 0) continue;
                        double* gw = &g.attn_w2[r * d];
                        const float* w = &p.attn_w2[r * d];
                        for (std::size_t c = 0; c < d; ++c) {
                            gw[c] += dl[r] * s.h[a][c];
                            dh[c] += w[c] * dl[r];
                        }
                    }
                    // h = relu(z), z = W1 c + b1
                    const Vec& cin = t.cen[n.inputs[a]];
                    for (std::size_t r = 0; r < d; ++r) {
                        double dz = s.z[a][r] > 0 ? dh[r] : 0.0;
                        if (dz == 0) continue;
                        g.attn_b1[r] += dz;
                        double* gw = &g.attn_w1[r * d];
                        const float* w = &p.attn_w1[r * d];
                        for (std::size_t c = 0; c < d; ++c) {
                            gw[c] += dz * cin[c];
                            din[c] += w[c] * dz;
                        }
                    }
                }
                break;
            }
        }
    }
}

double l1(const Vec& c, const float* v, std::size_t d) {
    double s = 0;
    for (std::size_t k = 0; k < d; ++k) s += std::abs(c[k] - v[k]);
    return s;
}

// min over branch outputs; returns (distance, branch index)
std::pair<double, std::size_t> min_branch(const QueryPlan& plan, const Tape& t, const float* v, std::size_t d) {
    double best = INFINITY;
    std::size_t arg = 0;
    for (std::size_t b = 0; b < plan.outputs.size(); ++b) {
        double x = l1(t.cen[plan.outputs[b]], v, d);
        if (x < best) {
            best = x;
            arg = b;
        }
    }
    return {best, arg};
}

void check_example(const Parameters& p, const Example& ex) {
    if (ex.plans.empty()) throw ContractError("example without a query plan");
    if (ex.negatives.empty()) throw ConfigError("at least one negative per positive is required");
    if (ex.positive >= p.nodes) throw LookupError("positive entity out of range");
    for (auto n : ex.negatives) {
        if (n >= p.nodes) throw LookupError("negative entity out of range");
    }
}

[[noreturn]] void numeric_failure(const Parameters& p, const std::string& what) {
    auto name = p.first_non_finite();
    throw NumericError(name.empty() ? "loss" : name, "non-finite " + what);
}

}  // namespace

double loss(const Parameters& p, const Example& ex) {
    check_example(p, ex);
    const std::size_t d = p.d;
    const double n = static_cast<double>(ex.plans.size());
    const double k = static_cast<double>(ex.negatives.size());
    const float* v = &p.entity[ex.positive * d];
    double L = 0;
    Tape t0;
    for (std::size_t i = 0; i < ex.plans.size(); ++i) {
        Tape t;
        forward(p, *ex.plans[i], t);
        L -= log_sigmoid(p.gamma - min_branch(*ex.plans[i], t, v, d).first) / n;
        if (i == 0) t0 = std::move(t);
    }
    for (NodeId nv : ex.negatives) {
        L -= log_sigmoid(min_branch(*ex.plans[0], t0, &p.entity[nv * d], d).first - p.gamma) / k;
    }
    if (!std::isfinite(L)) numeric_failure(p, "loss");
    return L;
}

double loss(const Parameters& p, const TrainSample& s, NodeId v, const std::vector<NodeId>& negs) {
    std::vector<QueryPlan> plans{plan_query(s.query)};
    for (const auto& gq : s.gens) plans.push_back(plan_query(gq));
    Example ex;
    for (const auto& pl : plans) ex.plans.push_back(&pl);
    ex.positive = v;
    ex.negatives = negs;
    return loss(p, ex);
}

Gradients::Gradients(const Parameters& p) : d(p.d) {
    entity.assign(p.entity.size(), 0.0);
    rel_center.assign(p.rel_center.size(), 0.0);
    rel_offset.assign(p.rel_offset.size(), 0.0);
    for (auto [dst, n] : {std::pair{&attn_w1, p.d * p.d}, {&attn_w2, p.d * p.d}, {&ds_u1, p.d * p.d},
                          {&ds_u2, p.d * p.d}, {&ds_v, p.d * p.d}, {&attn_b1, p.d}, {&attn_b2, p.d},
                          {&ds_c1, p.d}, {&ds_c2, p.d}, {&ds_e, p.d}}) {
        dst->assign(n, 0.0);
    }
    entity_mark_.assign(p.nodes, 0);
    rel_mark_.assign(p.relations, 0);
}

void Gradients::touch_entity(NodeId r) {
    if (!entity_mark_[r]) {
        entity_mark_[r] = 1;
        entity_rows.push_back(r);
    }
}

void Gradients::touch_relation(RelId r) {
    if (!rel_mark_[r]) {
        rel_mark_[r] = 1;
        rel_rows.push_back(r);
    }
}

void Gradients::clear() {
    for (auto r : entity_rows) {
        std::fill_n(entity.begin() + static_cast<std::ptrdiff_t>(r * d), d, 0.0);
        entity_mark_[r] = 0;
    }
    for (auto r : rel_rows) {
        std::fill_n(rel_center.begin() + static_cast<std::ptrdiff_t>(r * d), d, 0.0);
        std::fill_n(rel_offset.begin() + static_cast<std::ptrdiff_t>(r * d), d, 0.0);
        rel_mark_[r] = 0;
    }
    entity_rows.clear();
    rel_rows.clear();
    for (auto* v : {&attn_w1, &attn_b1, &attn_w2, &attn_b2, &ds_u1, &ds_c1, &ds_u2, &ds_c2, &ds_v, &ds_e}) {
        std::fill(v->begin(), v->end(), 0.0);
    }
}

double backward(const Parameters& p, const std::vector<Example>& batch, Gradients& g, const LossWeights& w) {
    if (batch.empty()) throw ContractError("empty batch");
    g.clear();
    const std::size_t d = p.d;
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    double total = 0;
    for (const auto& ex : batch) {
        check_example(p, ex);
        const double n = static_cast<double>(ex.plans.size());
        const double k = static_cast<double>(ex.negatives.size());
        const float* v = &p.entity[ex.positive * d];
        Tape t0;
        std::vector<Vec> d0;
        for (std::size_t i = 0; i < ex.plans.size(); ++i) {
            const auto& plan = *ex.plans[i];
            Tape t;
            forward(p, plan, t);
            std::vector<Vec> dcen(plan.nodes.size());
            auto [dist, br] = min_branch(plan, t, v, d);
            const double beta = w.positive / n;
            total -= beta * log_sigmoid(p.gamma - dist) * inv_b;
            // d/d dist of -β log σ(γ - dist) = β σ(dist - γ)
            const double gd = beta * sigmoid(dist - p.gamma) * inv_b;
            const Vec& c = t.cen[plan.outputs[br]];
            dcen[plan.outputs[br]].assign(d, 0.0);
            g.touch_entity(ex.positive);
            for (std::size_t kk = 0; kk < d; ++kk) {
                double s = sign(c[kk] - v[kk]) * gd;
                dcen[plan.outputs[br]][kk] += s;
                g.entity[ex.positive * d + kk] -= s;
            }
            if (i == 0) {
                t0 = std::move(t);
                d0 = std::move(dcen);
            } else {
                reverse(p, plan, t, dcen, g);
            }
        }
        const auto& plan0 = *ex.plans[0];
        for (NodeId nv : ex.negatives) {
            const float* u = &p.entity[nv * d];
            auto [dist, br] = min_branch(plan0, t0, u, d);
            total -= log_sigmoid(dist - p.gamma) / k * inv_b;
            // d/d dist of -(1/k) log σ(dist - γ) = -(1/k) σ(γ - dist)
            const double gd = -sigmoid(p.gamma - dist) / k * inv_b;
            const Vec& c = t0.cen[plan0.outputs[br]];
            auto& dc = d0[plan0.outputs[br]];
            if (dc.empty()) dc.assign(d, 0.0);
            g.touch_entity(nv);
            for (std::size_t kk = 0; kk < d; ++kk) {
                double s = sign(c[kk] - u[kk]) * gd;
                dc[kk] += s;
                g.entity[nv * d + kk] -= s;
            }
        }
        reverse(p, plan0, t0, d0, g);
    }
    if (!std::isfinite(total)) numeric_failure(p, "loss");
    return total;
}

}  // namespace omqa
