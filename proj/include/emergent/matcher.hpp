#pragma once

#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "emergent/core_model.hpp"

namespace emergent {

struct MatchProblem {
  std::vector<Role> roles;
  // Already filtered through induce_things.
  std::vector<Thing> things;
  MatchPolicy policy;
};

struct MatchResult {
  std::map<RoleInstanceId, ThingId> delta;
  std::set<std::string> unfilled_optional;
  std::size_t score = 0;

  friend bool operator==(const MatchResult&, const MatchResult&) = default;
};

// {s.type_id | s ∈ P(role)} ⊆ thing.capabilities.
bool feasible(const Role& role, const Thing& thing);

// Backtracking over compulsory roles (fewest feasible things first, things by
// id), then greedy fill of every role's remaining instances in declaration
// order. Throws InfeasibleError.
MatchResult compute_delta(const MatchProblem& problem);

inline constexpr std::size_t kOracleMaxRoles = 6;
inline constexpr std::size_t kOracleMaxThings = 6;

// Exhaustive maximum-score search. Throws ProblemTooLargeError beyond the
// bounds above and InfeasibleError like compute_delta.
MatchResult oracle_delta(const MatchProblem& problem);

// Compulsory roles with no feasible thing, or every compulsory role when each
// has candidates but they cannot be filled together.
std::vector<std::string> infeasible_roles(const MatchProblem& problem);

}  // namespace emergent
