#include "shiftlab/saccade/saccade.hpp"

#include <gtest/gtest.h>

#include "shiftlab/core/error.hpp"
#include "shiftlab/core/random.hpp"

namespace shiftlab::saccade {
namespace {

model::ModelConfig toy_config() {
  model::ModelConfig c;
  c.encoder = encoder::EncoderConfig::oracle(12, 32, 6);
  c.shift_layers = 2;
  c.kernel_size = 5;
  c.shift_channels = 3;
  c.iterations = 2;
  return c;
}

BasicTensor<double> random_mu(const model::ModelConfig& c, std::uint64_t seed) {
  Rng rng(seed);
  BasicTensor<double> mu({c.grid(), c.grid(), c.channels()});
  for (auto& v : mu.values()) v = rng.uniform();
  return mu;
}

const scene::Vocabulary& vocab() {
  static const scene::Vocabulary v = scene::Vocabulary::standard();
  return v;
}

TEST(Traverse, SingleNodeEqualsAttend) {
  const auto c = toy_config();
  model::SsasModel<double> m(c, 1);
  const auto mu = random_mu(c, 2);
  SceneGraph g;
  g.nodes = {4};
  const auto t = traverse(m, mu, g, vocab());
  ASSERT_EQ(t.nodes.size(), 1u);
  ASSERT_EQ(t.visits.size(), 1u);
  const auto ref = model::attend(mu, m.embedding_vector(4));
  EXPECT_TRUE(t.nodes[0].map.logits == ref.logits);
  EXPECT_TRUE(t.nodes[0].map.activated == ref.activated);
}

TEST(Traverse, ForwardEdgeIsRolloutObjectBranch) {
  const auto c = toy_config();
  for (std::uint64_t seed : {3u, 4u, 5u}) {
    model::SsasModel<double> m(c, seed);
    const auto mu = random_mu(c, seed + 10);
    for (int p = 0; p < 4; ++p) {
      SceneGraph g;
      g.nodes = {2, 7};
      g.path = {{0, p, 1, model::Direction::kForward}};
      const auto t = traverse(m, mu, g, vocab());
      const auto r = m.infer_rollout(mu, {2, p, 7}, 1);
      ASSERT_EQ(t.nodes.size(), 2u);
      EXPECT_TRUE(t.nodes[0].map.logits == r.subject[0].logits);
      EXPECT_TRUE(t.nodes[1].map.logits == r.object[1].logits);
      EXPECT_TRUE(t.nodes[1].map.activated == r.object[1].activated);
    }
  }
}

TEST(Traverse, InverseEdgeIsRolloutSubjectBranch) {
  const auto c = toy_config();
  model::SsasModel<float> m(c, 6);
  const Tensor mu = random_mu(c, 7).cast<float>();
  SceneGraph g;
  g.nodes = {9, 1};  // walk starts at the object
  g.path = {{0, 2, 1, model::Direction::kInverse}};
  const auto t = traverse(m, mu, g, vocab());
  const auto r = m.infer_rollout(mu, {1, 2, 9}, 1);
  EXPECT_TRUE(t.nodes[1].map.logits == r.subject[1].logits);
}

TEST(Traverse, RevisitOverwritesAndKeepsFirstVisitOrder) {
  const auto c = toy_config();
  model::SsasModel<double> m(c, 8);
  const auto mu = random_mu(c, 9);
  SceneGraph g;
  g.nodes = {0, 3, 5};
  g.path = {{0, 0, 1, model::Direction::kForward},
            {1, 1, 2, model::Direction::kForward},
            {2, 1, 1, model::Direction::kInverse}};
  const auto t = traverse(m, mu, g, vocab());
  ASSERT_EQ(t.visits.size(), 4u);
  ASSERT_EQ(t.nodes.size(), 3u);
  EXPECT_EQ(t.nodes[0].node, 0u);
  EXPECT_EQ(t.nodes[1].node, 1u);
  EXPECT_EQ(t.nodes[2].node, 2u);
  EXPECT_TRUE(t.nodes[1].map.logits == t.visits[3].map.logits);
  for (const auto& n : t.nodes) EXPECT_EQ(n.map.logits.shape(), (Shape{c.grid(), c.grid()}));
}

TEST(SceneGraph, DiscontinuousPathRejectedBeforeCompute) {
  const auto c = toy_config();
  model::SsasModel<double> m(c, 1);
  SceneGraph g;
  g.nodes = {0, 3, 5};
  g.path = {{0, 0, 1, model::Direction::kForward}, {2, 1, 0, model::Direction::kForward}};
  // A wrongly shaped mu would raise DimensionError if compute started first.
  EXPECT_THROW(traverse(m, BasicTensor<double>({1, 1, 1}), g, vocab()), ValidationError);
}

TEST(SceneGraph, BadIdsRejected) {
  SceneGraph g;
  EXPECT_THROW(g.validate(vocab()), ValidationError);
  g.nodes = {12};
  EXPECT_THROW(g.validate(vocab()), ValidationError);
  g.nodes = {0, 1};
  g.start = 2;
  EXPECT_THROW(g.validate(vocab()), ValidationError);
  g.start = 0;
  g.path = {{0, 4, 1, model::Direction::kForward}};
  EXPECT_THROW(g.validate(vocab()), ValidationError);
  g.path = {{0, 3, 2, model::Direction::kForward}};
  EXPECT_THROW(g.validate(vocab()), ValidationError);
  g.path = {{0, 3, 1, model::Direction::kForward}};
  EXPECT_NO_THROW(g.validate(vocab()));
}

TEST(SceneGraph, JsonRoundTrip) {
  const auto j = nlohmann::json::parse(R"({"nodes":["red circle","blue square","green triangle"],
    "path":[{"src":0,"p":"left","dst":1,"dir":"fwd"},{"src":1,"p":"above","dst":2,"dir":"inv"}],"start":0})");
  const SceneGraph g = graph_from_json(j, vocab());
  ASSERT_EQ(g.nodes.size(), 3u);
  EXPECT_EQ(g.nodes[1], vocab().category("blue square"));
  EXPECT_EQ(g.path[1].predicate, vocab().predicate("above"));
  EXPECT_EQ(g.path[1].direction, model::Direction::kInverse);
  EXPECT_EQ(graph_to_json(g, vocab()), j);
}

TEST(SceneGraph, MalformedJsonRejected) {
  EXPECT_THROW(graph_from_json(nlohmann::json::parse(R"({"path":[]})"), vocab()), ValidationError);
  EXPECT_THROW(graph_from_json(nlohmann::json::parse(R"({"nodes":["purple blob"]})"), vocab()), ValidationError);
  EXPECT_THROW(graph_from_json(nlohmann::json::parse(
                                   R"({"nodes":["red circle","blue square"],
                                       "path":[{"src":0,"p":"left","dst":1,"dir":"sideways"}]})"),
                               vocab()),
               ValidationError);
}

TEST(ArgmaxCell, FirstMaximumRowMajor) {
  Tensor m({3, 4});
  m.at(1, 2) = 5.0f;
  m.at(2, 0) = 5.0f;
  EXPECT_EQ(argmax_cell(m), (std::pair<int, int>{1, 2}));
}

}  // namespace
}  // namespace shiftlab::saccade
