#include <gtest/gtest.h>

#include "coguide/gradcheck_suite.hpp"
#include "coguide/model.hpp"

using namespace coguide;

TEST(IntentVoting, StrictMajorityOfTokens) {
  // 4 tokens: intent 0 has 3 hits, intent 1 exactly half, intent 2 all.
  Matrix<double> p(4, 3, {0.9, 0.6, 0.7,
                          0.8, 0.1, 0.5,
                          0.4, 0.7, 0.9,
                          0.5, 0.2, 0.6});
  EXPECT_EQ(intent_voting(p), (std::vector<int>{0, 2}));
}

TEST(IntentVoting, ThresholdIsInclusive) {
  Matrix<double> p(1, 2, {0.5, 0.49});
  EXPECT_EQ(intent_voting(p), (std::vector<int>{0}));
  EXPECT_EQ(intent_voting(p, 0.3), (std::vector<int>{0, 1}));
}

TEST(IntentVoting, EmptyVoteFallsBackToMostHits) {
  Matrix<double> p(4, 3, {0.9, 0.1, 0.6,
                          0.1, 0.1, 0.6,
                          0.2, 0.1, 0.1,
                          0.9, 0.1, 0.1});
  // intents 0 and 2 both have 2 hits (not a strict majority); 0 has the higher mean.
  EXPECT_EQ(intent_voting(p), (std::vector<int>{0}));
  Matrix<double> tie(2, 2, {0.3, 0.3,
                            0.3, 0.3});
  EXPECT_EQ(intent_voting(tie), (std::vector<int>{0}));
  Matrix<double> none(0, 3);
  EXPECT_TRUE(intent_voting(none).empty());
}

TEST(SlotArgmax, TiesGoToLowestId) {
  Matrix<double> p(3, 3, {0.2, 0.4, 0.4,
                          0.5, 0.5, 0.0,
                          0.1, 0.1, 0.8});
  EXPECT_EQ(slot_argmax(p), (std::vector<int>{1, 0, 2}));
}

TEST(MlpHead, SigmoidAndSoftmaxOutputs) {
  ParamStore<double> store;
  Rng rng(3);
  MlpHead<double> sig(store, "i", 4, 4, 3, HeadOutput::sigmoid, 0.2, rng);
  MlpHead<double> soft(store, "s", 4, 4, 5, HeadOutput::softmax, 0.2, rng);
  Matrix<double> x(6, 4);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::sin(static_cast<double>(i));
  Tape<double> t;
  auto a = sig(t.constant(x)).value();
  auto b = soft(t.constant(x)).value();
  ASSERT_EQ(a.cols(), 3u);
  ASSERT_EQ(b.cols(), 5u);
  for (std::size_t i = 0; i < 6; ++i) {
    double s = 0;
    for (std::size_t j = 0; j < 5; ++j) s += b(i, j);
    EXPECT_NEAR(s, 1.0, 1e-12);
    for (std::size_t j = 0; j < 3; ++j) {
      EXPECT_GT(a(i, j), 0.0);
      EXPECT_LT(a(i, j), 1.0);
    }
  }
}

TEST(MlpHead, MatchesHandComputation) {
  ParamStore<double> store;
  Rng rng(1);
  MlpHead<double> head(store, "h", 2, 2, 1, HeadOutput::sigmoid, 0.2, rng);
  head.w2().value = Matrix<double>(2, 2, {1.0, -1.0, 0.5, 2.0});
  head.b2().value = Matrix<double>(1, 2, {0.0, -3.0});
  head.w1().value = Matrix<double>(2, 1, {1.0, 1.0});
  head.b1().value = Matrix<double>(1, 1, {0.25});
  Tape<double> t;
  auto y = head(t.constant(Matrix<double>(1, 2, {1.0, 1.0}))).value();
  // hidden = leaky([1.5, -2]) = [1.5, -0.4]; logit = 1.1 + 0.25
  EXPECT_NEAR(y(0, 0), 1.0 / (1.0 + std::exp(-1.35)), 1e-12);
}

TEST(Stage1, ShapesAndSelectionsFollowProbabilities) {
  ModelConfig m;
  m.embedding_dim = m.lstm_dim = m.attention_dim = m.hidden_dim = 8;
  m.heads = 2;
  CoGuidingNet<double> net(m, {10, 3, 5}, 4);
  Tape<double> t;
  std::vector<int> ids{2, 3, 4, 5, 6};
  auto s1 = net.stage1(t, ids);
  EXPECT_EQ(s1.intent_features.shape(), (Shape{5, 8}));
  EXPECT_EQ(s1.slot_features.shape(), (Shape{5, 8}));
  EXPECT_EQ(s1.intent_probs.shape(), (Shape{5, 3}));
  EXPECT_EQ(s1.slot_probs.shape(), (Shape{5, 5}));
  EXPECT_EQ(s1.estimated_intents, intent_voting(s1.intent_probs.value()));
  EXPECT_EQ(s1.estimated_slots, slot_argmax(s1.slot_probs.value()));
  std::vector<int> empty;
  EXPECT_THROW(net.stage1(t, empty), DimensionError);
}

TEST(Stage1Gradients, TaskBilstmsAndHeadsMatchFiniteDifferences) {
  for (const auto& r : {check_bilstm("intent_bilstm", 10, 8, 4, 31, {}),
                        check_head("intent_head", 8, 3, HeadOutput::sigmoid, 4, 41, {}),
                        check_head("slot_head", 8, 5, HeadOutput::softmax, 4, 43, {})}) {
    EXPECT_TRUE(r.passed) << r.component << " " << r.max_rel_error;
  }
}
