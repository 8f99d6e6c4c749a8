#include <gtest/gtest.h>

#include <random>

#include "emergent/errors.hpp"
#include "emergent/matcher.hpp"
#include "support/fixtures.hpp"

using namespace emergent;
using namespace fixtures;

namespace {

Role simple_role(const std::string& name, bool compulsory, std::set<ServiceTypeId> provides,
                 std::optional<std::size_t> max = std::nullopt) {
  Role r;
  r.name = name;
  r.compulsory = compulsory;
  for (const auto& s : provides) r.services.push_back(provided(s));
  r.max_instances = max;
  return r;
}

struct BruteForce {
  bool feasible = false;
  std::size_t best = 0;
};

// Every thing takes one role index or none; counts role instances directly.
BruteForce brute_force_single(const MatchProblem& p) {
  const std::size_t nr = p.roles.size();
  const std::size_t nt = p.things.size();
  std::size_t combos = 1;
  for (std::size_t i = 0; i < nt; ++i) combos *= nr + 1;
  BruteForce out;
  for (std::size_t code = 0; code < combos; ++code) {
    std::size_t c = code;
    std::vector<std::size_t> count(nr, 0);
    bool ok = true;
    std::size_t score = 0;
    for (std::size_t t = 0; t < nt; ++t) {
      const std::size_t choice = c % (nr + 1);
      c /= nr + 1;
      if (choice == nr) continue;
      const Role& r = p.roles[choice];
      bool capable = true;
      for (const auto& s : r.services) {
        if (s.direction == Direction::Provided && !p.things[t].capabilities.contains(s.type_id)) capable = false;
      }
      if (!capable) {
        ok = false;
        break;
      }
      ++count[choice];
      ++score;
    }
    if (!ok) continue;
    for (std::size_t r = 0; r < nr; ++r) {
      const std::size_t cap = p.roles[r].max_instances.value_or(p.roles[r].compulsory ? 1 : nt);
      if (count[r] > cap) ok = false;
      if (p.roles[r].compulsory && count[r] == 0) ok = false;
    }
    if (!ok) continue;
    out.feasible = true;
    out.best = std::max(out.best, score);
  }
  return out;
}

void expect_sound(const MatchProblem& p, const MatchResult& m) {
  std::map<ThingId, const Thing*> by_id;
  for (const auto& t : p.things) by_id[t.id] = &t;
  std::map<ThingId, int> uses;
  for (const auto& [inst, tid] : m.delta) {
    const Role* role = nullptr;
    for (const auto& r : p.roles) {
      if (r.name == inst.role) role = &r;
    }
    ASSERT_NE(role, nullptr);
    ASSERT_TRUE(by_id.contains(tid));
    EXPECT_TRUE(feasible(*role, *by_id[tid]));
    ++uses[tid];
  }
  if (!p.policy.allow_multi_role) {
    for (const auto& [tid, n] : uses) EXPECT_EQ(n, 1) << tid.value;
  }
  for (const auto& r : p.roles) {
    if (r.compulsory) EXPECT_TRUE(m.delta.contains(RoleInstanceId{r.name, 0})) << r.name;
  }
  EXPECT_EQ(m.score, m.delta.size());
}

MatchProblem random_problem(std::mt19937_64& rng) {
  const std::vector<ServiceTypeId> services = {"a", "b", "c"};
  MatchProblem p;
  const std::size_t nr = rng() % 6;
  const std::size_t nt = rng() % 6;
  for (std::size_t i = 0; i < nr; ++i) {
    std::set<ServiceTypeId> prov;
    for (const auto& s : services) {
      if (rng() % 3 == 0) prov.insert(s);
    }
    std::optional<std::size_t> max;
    if (rng() % 3 == 0) max = 1 + rng() % 2;
    p.roles.push_back(simple_role("r" + std::to_string(i), rng() % 2 == 0, prov, max));
  }
  for (std::size_t i = 0; i < nt; ++i) {
    std::set<ServiceTypeId> caps;
    for (const auto& s : services) {
      if (rng() % 2 == 0) caps.insert(s);
    }
    p.things.push_back(thing("t" + std::to_string(i), caps, {0, 0}));
  }
  return p;
}

}  // namespace

TEST(Feasible, PresenterOnCapableTablet) { EXPECT_TRUE(feasible(presenter_role(), tablet_a())); }

TEST(Feasible, EmptyProvidedSetFitsAnything) {
  EXPECT_TRUE(feasible(simple_role("idle", false, {}), thing("pir", {}, {0, 0})));
}

TEST(Feasible, PresenterOnBareSensor) { EXPECT_FALSE(feasible(presenter_role(), thing("pir", {}, {0, 0}))); }

TEST(ComputeDelta, SingleCompulsoryRole) {
  MatchProblem p{{simple_role("r", true, {"x"})}, {thing("t", {"x"}, {0, 0})}, {}};
  const auto m = compute_delta(p);
  EXPECT_EQ(m.delta, (std::map<RoleInstanceId, ThingId>{{{"r", 0}, "t"}}));
  EXPECT_EQ(m.score, 1u);
}

TEST(ComputeDelta, MeshPresenterFillsAllThreeAndIsOptimal) {
  Role reviewer = reviewer_role();
  reviewer.max_instances = 2;
  Thing a = tablet_a();
  a.capabilities.insert("share_content");
  MatchProblem p{{presenter_role(), reviewer}, {a, phone_b(), phone_c()}, {}};
  const auto m = compute_delta(p);
  EXPECT_EQ(m.score, 3u);
  EXPECT_EQ(m.delta.at(RoleInstanceId{"presenter", 0}), ThingId("tablet-A"));
  expect_sound(p, m);
  const auto bf = brute_force_single(p);
  EXPECT_TRUE(bf.feasible);
  EXPECT_EQ(bf.best, m.score);
  EXPECT_EQ(oracle_delta(p).score, bf.best);
}

TEST(ComputeDelta, NoCapableThingIsInfeasible) {
  MatchProblem p{{presenter_role(), reviewer_role()}, {phone_b(), phone_c()}, {}};
  try {
    compute_delta(p);
    FAIL() << "expected InfeasibleError";
  } catch (const InfeasibleError& e) {
    EXPECT_EQ(e.roles(), std::vector<std::string>{"presenter"});
  }
}

TEST(ComputeDelta, BacktracksPastGreedyTrap) {
  // r1 fits t1 and t2, r2 only t1: r1 must yield t1.
  MatchProblem p{{simple_role("r1", true, {"a"}), simple_role("r2", true, {"b"})},
                 {thing("t1", {"a", "b"}, {0, 0}), thing("t2", {"a"}, {0, 0})},
                 {}};
  const auto m = compute_delta(p);
  EXPECT_EQ(m.delta.at(RoleInstanceId{"r2", 0}), ThingId("t1"));
  EXPECT_EQ(m.delta.at(RoleInstanceId{"r1", 0}), ThingId("t2"));
}

TEST(ComputeDelta, Deterministic) {
  std::mt19937_64 rng(44);
  for (int i = 0; i < 200; ++i) {
    const auto p = random_problem(rng);
    try {
      EXPECT_EQ(compute_delta(p), compute_delta(p));
    } catch (const InfeasibleError&) {
      EXPECT_THROW(compute_delta(p), InfeasibleError);
    }
  }
}

TEST(OracleDelta, PigeonholeIsInfeasible) {
  MatchProblem p{{simple_role("r1", true, {"a"}), simple_role("r2", true, {"b"})},
                 {thing("t", {"a", "b"}, {0, 0})},
                 {}};
  EXPECT_THROW(oracle_delta(p), InfeasibleError);
  EXPECT_THROW(compute_delta(p), InfeasibleError);
}

TEST(OracleDelta, MultiRolePolicyMapsBothToOneThing) {
  MatchProblem p{{simple_role("r1", true, {"a"}), simple_role("r2", true, {"b"})},
                 {thing("t", {"a", "b"}, {0, 0})},
                 {}};
  // Enumerate both policies: only the multi-role one admits a mapping.
  for (bool multi : {false, true}) {
    p.policy.allow_multi_role = multi;
    if (!multi) {
      EXPECT_THROW(oracle_delta(p), InfeasibleError);
      continue;
    }
    const auto o = oracle_delta(p);
    EXPECT_EQ(o.delta, (std::map<RoleInstanceId, ThingId>{{{"r1", 0}, "t"}, {{"r2", 0}, "t"}}));
    EXPECT_EQ(compute_delta(p).delta, o.delta);
  }
}

TEST(OracleDelta, RejectsOversizedProblems) {
  MatchProblem p;
  for (int i = 0; i < 7; ++i) p.roles.push_back(simple_role("r" + std::to_string(i), false, {}));
  EXPECT_THROW(oracle_delta(p), ProblemTooLargeError);
}

TEST(OracleDelta, AgreesWithBruteForceAndDominatesHeuristic) {
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 400; ++i) {
    const auto p = random_problem(rng);
    const auto bf = brute_force_single(p);
    bool oracle_ok = true;
    std::size_t oracle_score = 0;
    try {
      const auto o = oracle_delta(p);
      expect_sound(p, o);
      oracle_score = o.score;
    } catch (const InfeasibleError&) {
      oracle_ok = false;
    }
    ASSERT_EQ(oracle_ok, bf.feasible) << "problem " << i;
    if (!oracle_ok) {
      EXPECT_THROW(compute_delta(p), InfeasibleError);
      continue;
    }
    EXPECT_EQ(oracle_score, bf.best);
    const auto h = compute_delta(p);
    expect_sound(p, h);
    EXPECT_GE(oracle_score, h.score);
  }
}

TEST(OracleDelta, UnfilledOptionalIsReported) {
  MatchProblem p{{simple_role("lead", true, {"a"}), simple_role("helper", false, {"z"})},
                 {thing("t1", {"a"}, {0, 0})},
                 {}};
  const auto m = compute_delta(p);
  EXPECT_EQ(m.unfilled_optional, (std::set<std::string>{"helper"}));
  EXPECT_EQ(oracle_delta(p).unfilled_optional, m.unfilled_optional);
}

TEST(InfeasibleRoles, NamesRolesWithoutCandidates) {
  MatchProblem p{{simple_role("r1", true, {"a"}), simple_role("r2", true, {"q"})}, {thing("t", {"a"}, {0, 0})}, {}};
  EXPECT_EQ(infeasible_roles(p), std::vector<std::string>{"r2"});
}
