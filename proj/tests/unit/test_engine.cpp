#include "doctest.h"

#include "oodlab/engine.hpp"
#include "oodlab/metrics.hpp"
#include "oodlab/registry.hpp"
#include "oodlab/synthetic.hpp"

using namespace oodlab;

namespace {

const SyntheticBenchmark& bench() {
  static const SyntheticBenchmark b = [] {
    SyntheticOptions o;
    o.n_train = 400;
    o.n_validation = 100;
    o.n_test = 200;
    o.n_ood = 200;
    o.passes = 5;
    o.seed = 3;
    return make_synthetic(o);
  }();
  return b;
}

}  // namespace

TEST_CASE("every method and variant yields finite scores of the right length") {
  const ScoringEngine engine(bench().train, bench().head);
  for (const MethodInfo& m : method_registry()) {
    for (Variant v : m.variants) {
      const ScoreVector s = engine.score(m.id, v, bench().test);
      CHECK(s.size() == bench().test.size());
      CHECK(s.values.allFinite());
      CHECK(s.orientation == m.orientation);
      CHECK(s.method_id == m.id);
    }
  }
}

TEST_CASE("unsupported variants are rejected") {
  const ScoringEngine engine(bench().train, bench().head);
  try {
    engine.score("ViM", Variant::Global, bench().test);
    FAIL("expected UnsupportedVariant");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::UnsupportedVariant);
  }
  CHECK_THROWS_AS(engine.score("NoSuchMethod", Variant::Unmodified, bench().test), Error);
}

TEST_CASE("scoring is repeatable and does not depend on call order") {
  const ScoringEngine a(bench().train, bench().head);
  const ScoringEngine b(bench().train, bench().head);
  const Vector first = a.score("KPCA", Variant::Class, bench().test).values;
  a.score("NNGuide", Variant::Global, bench().test);
  CHECK(a.score("KPCA", Variant::Class, bench().test).values == first);
  b.score("Maha", Variant::ClassAvg, bench().ood[0]);
  CHECK(b.score("KPCA", Variant::Class, bench().test).values == first);
}

TEST_CASE("missing passes or external scores are data errors") {
  const ScoringEngine engine(bench().train, bench().head);
  FeatureSet bare = bench().test;
  bare.passes.clear();
  bare.external.clear();
  CHECK_THROWS_AS(engine.score("MCD-MSR", Variant::Unmodified, bare), Error);
  CHECK_THROWS_AS(engine.score("Confidence", Variant::Unmodified, bare), Error);
}

TEST_CASE("logits are rebuilt from the head when absent") {
  const ScoringEngine engine(bench().train, bench().head);
  FeatureSet s = bench().test;
  const Matrix stored = *s.logits;
  s.logits.reset();
  CHECK((engine.logits_of(s) - stored).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(engine.score("Energy", Variant::Unmodified, s).values ==
        engine.score("Energy", Variant::Unmodified, bench().test).values);
}

TEST_CASE("temperature changes Energy by the expected scale") {
  const ScoringEngine engine(bench().train, bench().head);
  HyperParams hp;
  hp.temperature = 2.0;
  const Vector e2 = engine.score("Energy", Variant::Unmodified, bench().test, hp).values;
  const Matrix l = *bench().test.logits;
  for (Index i = 0; i < 10; ++i) {
    const Vector row = l.row(i).transpose() / 2.0;
    CHECK(e2[i] == doctest::Approx(-2.0 * logsumexp(row)));
  }
}

TEST_CASE("training labels outside 1..C are rejected") {
  FeatureSet t = bench().train;
  (*t.labels)[0] = 0;
  CHECK_THROWS_AS(ScoringEngine(t, bench().head), Error);
}
