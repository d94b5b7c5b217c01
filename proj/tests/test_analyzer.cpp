#include <doctest.h>

#include "metaslice/analyzer.hpp"
#include "metaslice/rng.hpp"

using namespace metaslice;

namespace {

FunctionVector fv(std::initializer_list<int> types) { return FunctionVector::from_types(9, types); }

MetaSliceSpec spec_of(std::initializer_list<int> types, int class_id = 1) {
  return {class_id, fv(types), {1, 1, 1}};
}

MetaInstance instance_with(int id, std::initializer_list<std::pair<int, int>> type_sharers) {
  MetaInstance mi;
  mi.id = id;
  int next = id * 100;
  for (auto [type, sharers] : type_sharers) {
    mi.functions[next] = {next, type, sharers, {1, 1, 1}};
    ++next;
  }
  mi.members.insert(id);
  return mi;
}

}  // namespace

TEST_CASE("jaccard examples") {
  CHECK(jaccard(fv({1, 2, 3}), fv({1, 2, 3})) == 1.0);
  CHECK(jaccard(fv({1, 2, 3}), fv({4, 5, 6})) == 0.0);
  CHECK(jaccard(fv({1, 2, 3}), fv({1, 2, 4})) == doctest::Approx(0.5));
  CHECK(jaccard(fv({1}), fv({1, 2, 3, 4})) == doctest::Approx(0.25));
}

TEST_CASE("jaccard rejects bad input") {
  const FunctionVector zero(std::vector<std::uint8_t>(9, 0));
  CHECK_THROWS(jaccard(zero, zero));
  CHECK(jaccard(zero, fv({1})) == 0.0);
  CHECK_THROWS(jaccard(fv({1}), FunctionVector::from_types(8, {1})));
}

TEST_CASE("jaccard is symmetric, bounded, and one exactly on equal supports") {
  Rng rng(3);
  for (int t = 0; t < 2000; ++t) {
    std::vector<std::uint8_t> a(9), b(9);
    for (int f = 0; f < 9; ++f) {
      a[f] = static_cast<std::uint8_t>(rng.below(2));
      b[f] = static_cast<std::uint8_t>(rng.below(2));
    }
    a[rng.below(9)] = 1;
    const FunctionVector fa(a), fb(b);
    const double s = jaccard(fa, fb);
    REQUIRE(s == jaccard(fb, fa));
    REQUIRE(s >= 0.0);
    REQUIRE(s <= 1.0);
    REQUIRE((s == 1.0) == (a == b));
    // Intersection over union on binary vectors.
    int inter = 0, uni = 0;
    for (int f = 0; f < 9; ++f) {
      inter += a[f] & b[f];
      uni += a[f] | b[f];
    }
    REQUIRE(s == doctest::Approx(static_cast<double>(inter) / uni));
  }
}

TEST_CASE("metainstance selection") {
  std::map<int, MetaInstance> live;
  CHECK(select_metainstance(spec_of({1, 2, 3}), live) == nullptr);

  live[1] = instance_with(1, {{1, 1}, {2, 1}, {3, 1}});
  live[2] = instance_with(2, {{4, 1}, {5, 1}, {6, 1}});
  const MetaInstance* pick = select_metainstance(spec_of({1, 2, 7}), live);
  REQUIRE(pick != nullptr);
  CHECK(pick->id == 1);

  std::map<int, MetaInstance> only_a{{1, instance_with(1, {{1, 1}, {2, 1}, {3, 1}})}};
  CHECK(select_metainstance(spec_of({7, 8, 9}), only_a) == nullptr);
}

TEST_CASE("selection ties go to the lowest id") {
  std::map<int, MetaInstance> live;
  live[4] = instance_with(4, {{1, 1}, {5, 1}, {6, 1}});
  live[2] = instance_with(2, {{1, 1}, {7, 1}, {8, 1}});
  live[9] = instance_with(9, {{1, 1}, {3, 1}, {4, 1}});
  const MetaInstance* pick = select_metainstance(spec_of({1, 2, 9}), live);
  REQUIRE(pick != nullptr);
  CHECK(pick->id == 2);
}

TEST_CASE("net demand") {
  CHECK(net_demand(spec_of({1, 2, 3}), nullptr, false, 5) == ResourceVector{3, 3, 3});
  const MetaInstance half = instance_with(1, {{1, 2}, {2, 2}});
  CHECK(net_demand(spec_of({1, 2, 3}), &half, true, 5) == ResourceVector{1, 1, 1});
  CHECK(net_demand(spec_of({1, 2, 3}), &half, false, 5) == ResourceVector{3, 3, 3});
  const MetaInstance full = instance_with(1, {{1, 5}});
  CHECK(net_demand(spec_of({1, 2, 3}), &full, true, 5) == ResourceVector{3, 3, 3});
}

TEST_CASE("admission with sharing") {
  SystemPool pool({12, 12, 12});
  MetaSliceAnalyzer an({9, 5, true});

  auto first = an.admit(spec_of({1, 2, 3}), pool);
  REQUIRE(first);
  CHECK(first->created_metainstance);
  CHECK(first->net_allocation == ResourceVector{3, 3, 3});
  CHECK(first->new_instances.size() == 3);

  auto second = an.admit(spec_of({1, 2, 3}), pool);
  REQUIRE(second);
  CHECK_FALSE(second->created_metainstance);
  CHECK(second->metainstance_id == first->metainstance_id);
  CHECK(second->net_allocation == ResourceVector{0, 0, 0});
  CHECK(second->shared_bindings.size() == 3);
  for (const auto& [id, inst] : an.metainstances().at(first->metainstance_id).functions) {
    CHECK(inst.sharers == 2);
  }
  for (int i = 0; i < 3; ++i) REQUIRE(an.admit(spec_of({1, 2, 3}), pool));
  auto sixth = an.admit(spec_of({1, 2, 3}), pool);
  REQUIRE(sixth);
  CHECK(sixth->net_allocation == ResourceVector{3, 3, 3});
  CHECK(sixth->new_instances.size() == 3);
  CHECK(pool.allocated() == ResourceVector{6, 6, 6});
  CHECK(an.audit(pool).ok());
}

TEST_CASE("joining prefers the fuller eligible instance") {
  SystemPool pool({12, 12, 12});
  MetaSliceAnalyzer an({9, 2, true});
  for (int i = 0; i < 3; ++i) REQUIRE(an.admit(spec_of({1, 2, 3}), pool));
  // Type-1 instances now hold 2 and 1 sharers; the next joiner fills the second.
  auto out = an.admit(spec_of({1, 2, 3}), pool);
  REQUIRE(out);
  CHECK(out->net_allocation == ResourceVector{0, 0, 0});
  for (const auto& [id, mi] : an.metainstances()) {
    for (const auto& [iid, inst] : mi.functions) CHECK(inst.sharers == 2);
  }
}

TEST_CASE("partial overlap joins the selected instance") {
  SystemPool pool({12, 12, 12});
  MetaSliceAnalyzer an({9, 5, true});
  auto a = an.admit(spec_of({1, 2, 3}), pool);
  auto b = an.admit(spec_of({1, 2, 4}), pool);
  REQUIRE(a);
  REQUIRE(b);
  CHECK(b->metainstance_id == a->metainstance_id);
  CHECK(b->net_allocation == ResourceVector{1, 1, 1});
  CHECK(b->shared_bindings.size() == 2);
  CHECK(an.metainstances().at(a->metainstance_id).function_vector(9) == fv({1, 2, 3, 4}));
}

TEST_CASE("disjoint request creates a new metainstance") {
  SystemPool pool({12, 12, 12});
  MetaSliceAnalyzer an({9, 5, true});
  auto a = an.admit(spec_of({1, 2, 3}), pool);
  auto b = an.admit(spec_of({7, 8, 9}), pool);
  REQUIRE(a);
  REQUIRE(b);
  CHECK(b->created_metainstance);
  CHECK(b->metainstance_id != a->metainstance_id);
  CHECK(an.metainstances().size() == 2);
}

TEST_CASE("admission is atomic when resources are short") {
  SystemPool pool({4, 4, 4});
  MetaSliceAnalyzer an({9, 5, true});
  REQUIRE(an.admit(spec_of({1, 2, 3}), pool));
  const SystemPool pool_before = pool;
  const MetaSliceAnalyzer an_before = an;
  CHECK_FALSE(an.admit(spec_of({7, 8, 9}), pool));
  CHECK(pool == pool_before);
  CHECK(an == an_before);
  // Full sharing needs nothing new, so it fits on a saturated pool.
  REQUIRE(pool.checked_alloc({1, 1, 1}));
  auto shared = an.admit(spec_of({1, 2, 3}), pool);
  REQUIRE(shared);
  CHECK(shared->net_allocation.is_zero());
}

TEST_CASE("departures") {
  SUBCASE("sole member") {
    SystemPool pool({12, 12, 12});
    MetaSliceAnalyzer an({9, 5, true});
    auto a = an.admit(spec_of({1, 2, 3}), pool);
    CHECK(an.depart(a->slice_id, pool) == ResourceVector{3, 3, 3});
    CHECK(an.metainstances().empty());
    CHECK(pool.allocated().is_zero());
  }
  SUBCASE("one of two full-overlap members") {
    SystemPool pool({12, 12, 12});
    MetaSliceAnalyzer an({9, 5, true});
    auto a = an.admit(spec_of({1, 2, 3}), pool);
    an.admit(spec_of({1, 2, 3}), pool);
    CHECK(an.depart(a->slice_id, pool).is_zero());
    for (const auto& [id, inst] : an.metainstances().begin()->second.functions) {
      CHECK(inst.sharers == 1);
    }
    CHECK(an.audit(pool).ok());
  }
  SUBCASE("member sharing two of three functions") {
    SystemPool pool({12, 12, 12});
    MetaSliceAnalyzer an({9, 5, true});
    an.admit(spec_of({1, 2, 3}), pool);
    auto b = an.admit(spec_of({1, 2, 4}), pool);
    CHECK(an.depart(b->slice_id, pool) == ResourceVector{1, 1, 1});
    CHECK(an.metainstances().begin()->second.function_vector(9) == fv({1, 2, 3}));
  }
  SUBCASE("unknown slice") {
    SystemPool pool({12, 12, 12});
    MetaSliceAnalyzer an({9, 5, true});
    CHECK_THROWS_AS(an.depart(77, pool), AccountingError);
  }
}

TEST_CASE("sharing disabled gives every slice dedicated instances") {
  SystemPool pool({12, 12, 12});
  MetaSliceAnalyzer an({9, 5, false});
  auto a = an.admit(spec_of({1, 2, 3}), pool);
  auto b = an.admit(spec_of({1, 2, 3}), pool);
  CHECK(an.net_demand(spec_of({1, 2, 3})) == ResourceVector{3, 3, 3});
  CHECK(b->net_allocation == ResourceVector{3, 3, 3});
  CHECK(a->metainstance_id != b->metainstance_id);
  CHECK(an.depart(a->slice_id, pool) == ResourceVector{3, 3, 3});
}

TEST_CASE("random admit and depart keep accounting consistent") {
  for (bool sharing : {true, false}) {
    Rng rng(sharing ? 21 : 22);
    SystemPool pool({12, 10, 14});
    MetaSliceAnalyzer an({9, 5, sharing});
    std::vector<SliceId> live;
    for (int i = 0; i < 20000; ++i) {
      if (live.empty() || rng.bernoulli(0.5)) {
        const auto picks = rng.sample_distinct(9, 3);
        MetaSliceSpec s{1, FunctionVector::from_types(9, {static_cast<int>(picks[0]) + 1,
                                                          static_cast<int>(picks[1]) + 1,
                                                          static_cast<int>(picks[2]) + 1}),
                        {1, 1, 1}};
        const auto predicted = an.net_demand(s);
        if (auto out = an.admit(s, pool)) {
          REQUIRE(out->net_allocation == predicted);
          ResourceVector sum(3);
          for (const auto& inst : out->new_instances) sum += inst.footprint;
          REQUIRE(sum == out->net_allocation);
          REQUIRE(out->new_instances.size() + out->shared_bindings.size() == 3);
          live.push_back(out->slice_id);
        }
      } else {
        const auto k = static_cast<std::size_t>(rng.below(live.size()));
        const ResourceVector gross = gross_demand(an.slice(live[k]).spec);
        const ResourceVector freed = an.depart(live[k], pool);
        if (!sharing) REQUIRE(freed == gross);
        live[k] = live.back();
        live.pop_back();
      }
      const AuditReport report = an.audit(pool);
      REQUIRE_MESSAGE(report.ok(), (report.messages.empty() ? "" : report.messages.front()));
      REQUIRE(an.slices().size() == live.size());
    }
  }
}
