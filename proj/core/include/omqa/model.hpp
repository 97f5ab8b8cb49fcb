#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "omqa/query.hpp"
#include "omqa/sampler.hpp"

namespace omqa {

struct Box {
    std::vector<double> center;
    std::vector<double> offset;
};

struct QueryEmbedding {
    std::vector<Box> branches;  // one per union branch
};

// Named view over one parameter array (row-major).
struct ArrayRef {
    std::string name;
    std::vector<float>* data;
    std::size_t rows, cols;
};

struct ConstArrayRef {
    std::string name;
    const std::vector<float>* data;
    std::size_t rows, cols;
};

struct Parameters {
    std::size_t d = 0;
    double gamma = 4.0;
    std::size_t nodes = 0;      // entities and concepts share rows
    std::size_t relations = 0;  // row 0 is `type`

    std::vector<float> entity;                          // nodes × d
    std::vector<float> rel_center, rel_offset;          // relations × d
    std::vector<float> attn_w1, attn_b1, attn_w2, attn_b2;  // center attention NN
    std::vector<float> ds_u1, ds_c1, ds_u2, ds_c2;      // DeepSets element network
    std::vector<float> ds_v, ds_e;                      // DeepSets final map

    std::vector<ArrayRef> arrays();
    std::vector<ConstArrayRef> arrays() const;
    // Name of the first array holding a non-finite value, or empty.
    std::string first_non_finite() const;
};

// Small symmetric uniform init (see README); deterministic in seed.
Parameters init_parameters(std::size_t nodes, std::size_t relations, std::size_t d, double gamma, std::uint64_t seed);

Box embed_entity(const Parameters& p, NodeId c);                       // LookupError
Box project(const Box& b, RelId r, const Parameters& p);               // LookupError
Box intersect(const std::vector<Box>& boxes, const Parameters& p);     // ContractError when fewer than 2
QueryEmbedding embed_query(const Parameters& p, const ConjunctiveQuery& q);  // UnsupportedShape
QueryEmbedding embed_plan(const Parameters& p, const QueryPlan& plan);

double distance(const QueryEmbedding& e, std::span<const double> v);
double distance(const QueryEmbedding& e, const Parameters& p, NodeId v);
double prob(double dist, double gamma);
// log σ(x), evaluated without overflow for any finite x.
double log_sigmoid(double x);

// One training example: plans[0] is the query, the rest its generalizations.
struct Example {
    std::vector<const QueryPlan*> plans;
    NodeId positive = 0;
    std::vector<NodeId> negatives;
};

double loss(const Parameters& p, const Example& ex);
double loss(const Parameters& p, const TrainSample& s, NodeId v, const std::vector<NodeId>& negs);

// Dense mirror of Parameters plus the entity / relation rows touched since
// the last clear().
struct Gradients {
    std::size_t d = 0;
    std::vector<double> entity, rel_center, rel_offset;
    std::vector<double> attn_w1, attn_b1, attn_w2, attn_b2;
    std::vector<double> ds_u1, ds_c1, ds_u2, ds_c2, ds_v, ds_e;
    std::vector<std::uint32_t> entity_rows, rel_rows;

    explicit Gradients(const Parameters& p);
    void clear();
    void touch_entity(NodeId r);
    void touch_relation(RelId r);

private:
    std::vector<char> entity_mark_, rel_mark_;
};

struct LossWeights {
    double positive = 1.0;  // multiplies every β (kept for the linearity check)
};

// Mean loss over the batch; accumulates the exact gradient of that mean into g
// (which is cleared first). NumericError on non-finite values.
double backward(const Parameters& p, const std::vector<Example>& batch, Gradients& g, const LossWeights& w = {});

}  // namespace omqa
