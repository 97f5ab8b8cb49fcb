#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>

#include "fixtures.hpp"
#include "gradcheck.hpp"
#include "omqa/checkpoint.hpp"
#include "omqa/error.hpp"
#include "omqa/model.hpp"

using namespace omqa;
using omqa::testing::cq;
using omqa::testing::fig1;

namespace {

// all-zero parameters; tests set the rows they need
Parameters zeros(std::size_t nodes, std::size_t rels, std::size_t d, double gamma) {
    Parameters p = init_parameters(nodes, rels, d, gamma, 0);
    for (auto& a : p.arrays()) std::fill(a.data->begin(), a.data->end(), 0.0f);
    return p;
}

void set_row(std::vector<float>& t, std::size_t r, std::size_t d, std::initializer_list<float> xs) {
    ASSERT_EQ(xs.size(), d);
    std::copy(xs.begin(), xs.end(), t.begin() + static_cast<std::ptrdiff_t>(r * d));
}

Box box(std::vector<double> c, std::vector<double> o) { return Box{std::move(c), std::move(o)}; }

}  // namespace

TEST(Embed, EntityIsPointBox) {
    Parameters p = zeros(3, 2, 2, 1.0);
    set_row(p.entity, 1, 2, {1.5f, -0.5f});
    auto b = embed_entity(p, 1);
    EXPECT_EQ(b.center, (std::vector<double>{1.5, -0.5}));
    EXPECT_EQ(b.offset, (std::vector<double>{0.0, 0.0}));
    // rows are independent
    p.entity[0] = 9.0f;
    EXPECT_EQ(embed_entity(p, 1).center, (std::vector<double>{1.5, -0.5}));
    EXPECT_THROW(embed_entity(p, 3), LookupError);
}

TEST(Project, TranslatesAndCommutes) {
    Parameters p = zeros(1, 3, 2, 1.0);
    set_row(p.rel_center, 1, 2, {1.0f, 2.0f});
    set_row(p.rel_offset, 1, 2, {0.5f, 0.5f});
    set_row(p.rel_center, 2, 2, {-0.25f, 3.0f});
    set_row(p.rel_offset, 2, 2, {0.125f, 1.0f});
    auto b = project(box({0, 0}, {0, 0}), 1, p);
    EXPECT_EQ(b.center, (std::vector<double>{1, 2}));
    EXPECT_EQ(b.offset, (std::vector<double>{0.5, 0.5}));
    auto start = box({0.3, -0.7}, {0.1, 0.2});
    auto id = project(start, 0, p);  // row 0 is all zero
    EXPECT_EQ(id.center, start.center);
    EXPECT_EQ(id.offset, start.offset);
    auto ab = project(project(start, 1, p), 2, p), ba = project(project(start, 2, p), 1, p);
    EXPECT_EQ(ab.center, ba.center);
    EXPECT_EQ(ab.offset, ba.offset);
    EXPECT_THROW(project(start, 3, p), LookupError);
}

TEST(Intersect, IdenticalBoxesKeepCenter) {
    Parameters p = init_parameters(1, 1, 4, 2.0, 3);
    auto b = box({0.25, -1.5, 3.0, 0.0}, {0.5, 0.0, 2.0, 1.0});
    for (std::size_t n : {2u, 3u, 5u}) {
        auto out = intersect(std::vector<Box>(n, b), p);
        for (std::size_t k = 0; k < 4; ++k) {
            EXPECT_DOUBLE_EQ(out.center[k], b.center[k]);
            EXPECT_LE(out.offset[k], b.offset[k]);
            if (b.offset[k] > 0) {
                EXPECT_LT(out.offset[k], b.offset[k]);
            }
        }
    }
    EXPECT_THROW(intersect({b}, p), ContractError);
    EXPECT_THROW(intersect({}, p), ContractError);
}

TEST(Intersect, InvariantsOnRandomCalls) {
    auto r = oracle::geometry_check(17, 2000);
    EXPECT_EQ(r.calls, 2000u);
    EXPECT_EQ(r.offset_above_min, 0u);
    EXPECT_EQ(r.offset_not_strict, 0u);
    EXPECT_EQ(r.center_outside, 0u);
    EXPECT_EQ(r.negative_offset, 0u);
}

TEST(EmbedQuery, CompositionOfOperators) {
    auto w = fig1();
    Parameters p = init_parameters(w.st->node_count(), w.st->relation_count(), 3, 2.0, 5);
    const auto mit = w.st->node("mit"), bob = w.st->node("bob");
    const auto ha = w.st->relation("hasAlumnus"), wf = w.st->relation("worksFor");

    auto one = embed_query(p, cq(*w.st, "X", {{"mit", "hasAlumnus", "X"}}));
    ASSERT_EQ(one.branches.size(), 1u);
    EXPECT_EQ(one.branches[0].center, project(embed_entity(p, mit), ha, p).center);

    auto chain = embed_query(p, cq(*w.st, "Y", {{"mit", "hasAlumnus", "X"}, {"X", "worksFor", "Y"}}));
    auto want = project(project(embed_entity(p, mit), ha, p), wf, p);
    EXPECT_EQ(chain.branches[0].center, want.center);
    EXPECT_EQ(chain.branches[0].offset, want.offset);

    auto u = cq(*w.st, "X", {{"mit", "hasAlumnus", "X"}, {"bob", "worksFor", "X"}});
    u.branches = {{0}, {1}};
    auto ue = embed_query(p, u);
    ASSERT_EQ(ue.branches.size(), 2u);
    EXPECT_EQ(ue.branches[0].center, one.branches[0].center);
    EXPECT_EQ(ue.branches[1].center, project(embed_entity(p, bob), wf, p).center);

    auto two = embed_query(p, cq(*w.st, "X", {{"mit", "hasAlumnus", "X"}, {"bob", "worksFor", "X"}}));
    auto in = intersect({project(embed_entity(p, mit), ha, p), project(embed_entity(p, bob), wf, p)}, p);
    EXPECT_EQ(two.branches[0].center, in.center);
}

TEST(Distance, L1ToCenterAndBranchMin) {
    QueryEmbedding e{{box({1, 2}, {5, 5})}};
    std::vector<double> v{1, 2};
    EXPECT_EQ(distance(e, v), 0.0);
    QueryEmbedding o{{box({0, 0}, {1, 1})}};
    std::vector<double> u{3, -4};
    EXPECT_EQ(distance(o, u), 7.0);
    // distances 5 and 2
    QueryEmbedding two{{box({0, 0}, {0, 0}), box({3, -2}, {0, 0})}};
    EXPECT_EQ(distance(two, u), 2.0);
    std::vector<double> bad{1, 2, 3};
    EXPECT_THROW(distance(o, bad), ContractError);
}

TEST(Prob, SigmoidOfMargin) {
    EXPECT_DOUBLE_EQ(prob(3.0, 3.0), 0.5);
    EXPECT_LT(prob(1e6, 3.0), 1e-300);
    for (double d : {0.0, 0.7, 2.5, 9.0}) {
        const double q = prob(d, 2.0);
        EXPECT_GT(q, 0.0);
        EXPECT_LT(q, 1.0);
        EXPECT_NEAR(1.0 - q, 1.0 / (1.0 + std::exp(-(d - 2.0))), 1e-15);
    }
}

TEST(LogSigmoid, StableAtExtremes) {
    EXPECT_DOUBLE_EQ(log_sigmoid(0.0), -std::log(2.0));
    EXPECT_NEAR(log_sigmoid(-1000.0), -1000.0, 1e-9);
    EXPECT_EQ(log_sigmoid(1000.0), 0.0);
    EXPECT_TRUE(std::isfinite(log_sigmoid(-1e300)));
}

namespace {

struct Tiny {
    std::shared_ptr<SymbolTable> st = std::make_shared<SymbolTable>();
    NodeId a, v, w;
    RelId r;
    ConjunctiveQuery q;
    Tiny() {
        a = st->intern_entity("a");
        v = st->intern_entity("v");
        w = st->intern_entity("w");
        r = st->intern_relation("r");
        q = cq(*st, "X", {{"a", "r", "X"}});
    }
};

}  // namespace

TEST(Loss, BothTermsAtMargin) {
    Tiny t;
    Parameters p = zeros(t.st->node_count(), t.st->relation_count(), 2, 4.0);
    set_row(p.entity, t.v, 2, {4.0f, 0.0f});
    set_row(p.entity, t.w, 2, {0.0f, -4.0f});
    TrainSample s{t.q, {t.v}, {}, Strategy::Plain};
    EXPECT_NEAR(loss(p, s, t.v, {t.w}), 2.0 * std::log(2.0), 1e-12);
    // the query listed again as its own generalization changes nothing
    TrainSample s2 = s;
    s2.gens = {t.q};
    EXPECT_DOUBLE_EQ(loss(p, s2, t.v, {t.w}), loss(p, s, t.v, {t.w}));
    EXPECT_THROW(loss(p, s, t.v, {}), ConfigError);
}

TEST(Loss, NonNegativeOnRandomParameters) {
    auto w = fig1();
    auto q = cq(*w.st, "Y", {{"mit", "hasAlumnus", "X"}, {"X", "worksFor", "Y"}});
    auto g = cq(*w.st, "Y", {{"mit", "hasAlumnus", "X"}, {"X", "teachesAt", "Y"}});
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        Parameters p = init_parameters(w.st->node_count(), w.st->relation_count(), 4, 0.5 + seed % 7, seed);
        TrainSample s{q, {}, {g}, Strategy::Onto};
        EXPECT_GE(loss(p, s, w.st->node("bosch"), {w.st->node("mat"), w.st->node("ucl")}), 0.0);
    }
}

TEST(Loss, DecreasesWithAnySingleGeneralizationDistance) {
    // P = {q, q1, q2, q3}: separate anchors and relations so that moving one
    // anchor moves exactly one d(v, q_i)
    auto w = fig1();
    const char* anchors[] = {"mit", "mat", "ucl", "bosch"};
    const char* rels[] = {"worksFor", "teachesAt", "degreeFrom", "hasAlumnus"};
    std::vector<QueryPlan> plans;
    for (int i = 0; i < 4; ++i) plans.push_back(plan_query(cq(*w.st, "X", {{anchors[i], rels[i], "X"}})));
    Parameters p = init_parameters(w.st->node_count(), w.st->relation_count(), 4, 2.0, 9);
    Example ex;
    for (const auto& pl : plans) ex.plans.push_back(&pl);
    ex.positive = w.st->node("bob");
    ex.negatives = {w.st->node("mat")};
    const std::size_t d = p.d;
    for (int i = 1; i < 4; ++i) {
        Parameters q = p;
        const NodeId a = w.st->node(anchors[i]);
        double prev_loss = loss(q, ex), prev_dist = distance(embed_plan(q, plans[i]), q, ex.positive);
        for (int step = 0; step < 10; ++step) {
            // pull the anchor's box center toward v
            auto c = embed_plan(q, plans[i]).branches[0].center;
            for (std::size_t k = 0; k < d; ++k) {
                const double gap = q.entity[ex.positive * d + k] - c[k];
                q.entity[a * d + k] += static_cast<float>(0.2 * gap);
            }
            const double di = distance(embed_plan(q, plans[i]), q, ex.positive);
            ASSERT_LT(di, prev_dist);
            for (int j = 0; j < 4; ++j) {
                if (j == i) continue;
                ASSERT_EQ(distance(embed_plan(q, plans[j]), q, ex.positive), distance(embed_plan(p, plans[j]), p, ex.positive));
            }
            const double l = loss(q, ex);
            EXPECT_LT(l, prev_loss) << "plan " << i << " step " << step;
            prev_loss = l;
            prev_dist = di;
        }
    }
}

TEST(Backward, MeanLossAndZeroOffPath) {
    auto w = fig1();
    Parameters p = init_parameters(w.st->node_count(), w.st->relation_count(), 4, 2.0, 1);
    auto plan = plan_query(cq(*w.st, "X", {{"bob", "worksFor", "X"}}));
    Example ex{{&plan}, w.st->node("bosch"), {w.st->node("ucl")}};
    Gradients g(p);
    const double L = backward(p, {ex, ex}, g);
    EXPECT_NEAR(L, loss(p, ex), 1e-12);

    const std::set<NodeId> on_path{w.st->node("bob"), w.st->node("bosch"), w.st->node("ucl")};
    for (NodeId n = 0; n < p.nodes; ++n) {
        for (std::size_t k = 0; k < p.d; ++k) {
            if (!on_path.count(n)) {
                EXPECT_EQ(g.entity[n * p.d + k], 0.0) << w.st->node_name(n);
            }
        }
    }
    for (RelId r = 0; r < p.relations; ++r) {
        for (std::size_t k = 0; k < p.d; ++k) {
            if (r != w.st->relation("worksFor")) {
                EXPECT_EQ(g.rel_center[r * p.d + k], 0.0);
            }
            EXPECT_EQ(g.rel_offset[r * p.d + k], 0.0);  // distance reads centers only
        }
    }
    // no intersection on a 1p path
    for (const auto* v : {&g.attn_w1, &g.attn_b1, &g.attn_w2, &g.attn_b2, &g.ds_u1, &g.ds_v, &g.ds_e}) {
        for (double x : *v) EXPECT_EQ(x, 0.0);
    }
    EXPECT_THROW(backward(p, {}, g), ContractError);
}

TEST(Backward, PositiveWeightIsLinear) {
    auto w = fig1();
    Parameters p = init_parameters(w.st->node_count(), w.st->relation_count(), 5, 2.0, 2);
    auto p0 = plan_query(cq(*w.st, "X", {{"bob", "worksFor", "X"}, {"mat", "teachesAt", "X"}}));
    auto p1 = plan_query(cq(*w.st, "X", {{"bob", "worksFor", "X"}}));
    Example ex{{&p0, &p1}, w.st->node("ucl"), {w.st->node("mit"), w.st->node("bosch")}};
    Gradients g0(p), g1(p), g2(p);
    backward(p, {ex}, g0, {0.0});
    backward(p, {ex}, g1, {1.0});
    backward(p, {ex}, g2, {2.0});
    auto check = [](const std::vector<double>& a, const std::vector<double>& b, const std::vector<double>& c) {
        for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(c[i] - a[i], 2.0 * (b[i] - a[i]), 1e-12);
    };
    check(g0.entity, g1.entity, g2.entity);
    check(g0.rel_center, g1.rel_center, g2.rel_center);
    check(g0.attn_w1, g1.attn_w1, g2.attn_w1);
    check(g0.attn_w2, g1.attn_w2, g2.attn_w2);
}

TEST(Backward, MatchesFiniteDifferences) {
    std::size_t done = 0, nonzero = 0;
    for (std::uint64_t seed = 1000; done < 30; ++seed) {
        ASSERT_LT(seed, 3000u) << "too many configurations rejected as kinked";
        auto r = oracle::finite_difference_check(seed);
        if (r.kinked) continue;
        ++done;
        SCOPED_TRACE("seed " + std::to_string(seed) + " d " + std::to_string(r.d));
        EXPECT_LT(r.max_rel, 1e-4) << r.worst;
        EXPECT_EQ(r.zero_mismatch, 0u) << r.worst_zero;
        EXPECT_LT(r.loss_gap, 1e-12);
        nonzero += r.coords - r.zeros;
    }
    EXPECT_GT(nonzero, 1000u);
}

TEST(Backward, NonFiniteNamesParameter) {
    Tiny t;
    Parameters p = init_parameters(t.st->node_count(), t.st->relation_count(), 2, 1.0, 0);
    p.rel_center[t.r * 2] = std::numeric_limits<float>::infinity();
    auto plan = plan_query(t.q);
    Example ex{{&plan}, t.v, {t.w}};
    Gradients g(p);
    try {
        backward(p, {ex}, g);
        FAIL() << "expected NumericError";
    } catch (const NumericError& e) {
        EXPECT_EQ(e.param(), "relation.center");
    }
    EXPECT_THROW(loss(p, ex), NumericError);
}

TEST(Checkpoint, RoundTripIsBitIdentical) {
    auto w = fig1();
    Parameters p = init_parameters(w.st->node_count(), w.st->relation_count(), 6, 3.5, 11);
    std::stringstream buf;
    save_checkpoint(p, *w.st, buf);
    auto c = load_checkpoint(buf);
    EXPECT_EQ(c.params.d, p.d);
    EXPECT_EQ(c.params.gamma, p.gamma);
    auto a = p.arrays();
    auto b = c.params.arrays();
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].name, b[i].name);
        ASSERT_EQ(a[i].data->size(), b[i].data->size());
        EXPECT_EQ(0, std::memcmp(a[i].data->data(), b[i].data->data(), a[i].data->size() * sizeof(float))) << a[i].name;
    }
    EXPECT_NO_THROW(check_vocabulary(c, *w.st));
    auto other = std::make_shared<SymbolTable>();
    other->intern_entity("someone");
    EXPECT_THROW(check_vocabulary(c, *other), ContractError);
}

TEST(Checkpoint, CorruptMagicAndTruncation) {
    auto w = fig1();
    Parameters p = init_parameters(w.st->node_count(), w.st->relation_count(), 2, 1.0, 0);
    std::stringstream buf;
    save_checkpoint(p, *w.st, buf);
    const std::string bytes = buf.str();

    std::string bad = bytes;
    bad[0] = 'X';
    std::istringstream in1(bad);
    EXPECT_THROW(load_checkpoint(in1), FormatError);

    std::string ver = bytes;
    ver[kCheckpointMagicSize - 1] = '\x7f';
    std::istringstream in2(ver);
    EXPECT_THROW(load_checkpoint(in2), FormatError);

    std::istringstream in3(bytes.substr(0, bytes.size() - 3));
    EXPECT_THROW(load_checkpoint(in3), FormatError);
}
