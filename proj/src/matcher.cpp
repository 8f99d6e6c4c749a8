#include "emergent/matcher.hpp"

#include <algorithm>
#include <numeric>
#include <tuple>

#include "emergent/errors.hpp"

namespace emergent {

bool feasible(const Role& role, const Thing& thing) {
  for (const auto& s : role.provided()) {
    if (!thing.capabilities.contains(s)) return false;
  }
  return true;
}

std::vector<std::string> infeasible_roles(const MatchProblem& problem) {
  std::vector<std::string> none;
  std::vector<std::string> all;
  for (const auto& r : problem.roles) {
    if (!r.compulsory) continue;
    all.push_back(r.name);
    const bool any = std::any_of(problem.things.begin(), problem.things.end(),
                                 [&](const Thing& t) { return feasible(r, t); });
    if (!any) none.push_back(r.name);
  }
  return none.empty() ? all : none;
}

namespace {

void fill_unfilled(const MatchProblem& problem, MatchResult& result) {
  result.unfilled_optional.clear();
  for (const auto& r : problem.roles) {
    if (r.compulsory) continue;
    const bool any = std::any_of(result.delta.begin(), result.delta.end(),
                                 [&](const auto& kv) { return kv.first.role == r.name; });
    if (!any) result.unfilled_optional.insert(r.name);
  }
  result.score = result.delta.size();
}

class Backtracker {
 public:
  explicit Backtracker(const MatchProblem& problem) : problem_(problem) {
    things_.reserve(problem.things.size());
    for (std::size_t i = 0; i < problem.things.size(); ++i) things_.push_back(i);
    std::sort(things_.begin(), things_.end(),
              [&](std::size_t a, std::size_t b) { return problem.things[a].id < problem.things[b].id; });

    for (std::size_t r = 0; r < problem.roles.size(); ++r) {
      std::vector<std::size_t> cand;
      for (auto t : things_) {
        if (feasible(problem.roles[r], problem.things[t])) cand.push_back(t);
      }
      feasible_.push_back(std::move(cand));
      if (problem.roles[r].compulsory) compulsory_.push_back(r);
    }
    std::stable_sort(compulsory_.begin(), compulsory_.end(),
                     [&](std::size_t a, std::size_t b) { return feasible_[a].size() < feasible_[b].size(); });

    upper_bound_ = 0;
    for (std::size_t r = 0; r < problem.roles.size(); ++r) {
      upper_bound_ += std::min(problem.roles[r].instance_limit(problem.things.size()), feasible_[r].size());
    }
    if (!problem.policy.allow_multi_role) upper_bound_ = std::min(upper_bound_, problem.things.size());
  }

  std::optional<MatchResult> solve() {
    for (auto r : compulsory_) {
      if (problem_.roles[r].instance_limit(problem_.things.size()) == 0) return std::nullopt;
    }
    assignment_.assign(compulsory_.size(), 0);
    used_.assign(problem_.things.size(), 0);
    descend(0);
    return best_;
  }

 private:
  static constexpr std::size_t kLeafBudget = 4096;

  void descend(std::size_t depth) {
    if (done()) return;
    if (depth == compulsory_.size()) {
      ++leaves_;
      evaluate_leaf();
      return;
    }
    const std::size_t r = compulsory_[depth];
    for (auto t : feasible_[r]) {
      if (!problem_.policy.allow_multi_role && used_[t] > 0) continue;
      assignment_[depth] = t;
      ++used_[t];
      descend(depth + 1);
      --used_[t];
      if (done()) return;
    }
  }

  bool done() const {
    return leaves_ >= kLeafBudget || (best_ && best_->score >= upper_bound_);
  }

  void evaluate_leaf() {
    const auto& roles = problem_.roles;
    std::vector<std::size_t> used = used_;
    std::vector<std::set<std::size_t>> holders(roles.size());
    MatchResult result;
    for (std::size_t d = 0; d < compulsory_.size(); ++d) {
      const std::size_t r = compulsory_[d];
      holders[r].insert(assignment_[d]);
      result.delta[{roles[r].name, 0}] = problem_.things[assignment_[d]].id;
    }
    // Greedy: remaining instances of every role, declaration order.
    for (std::size_t r = 0; r < roles.size(); ++r) {
      const std::size_t limit = roles[r].instance_limit(problem_.things.size());
      auto next_index = static_cast<std::uint32_t>(holders[r].size());
      for (auto t : feasible_[r]) {
        if (holders[r].size() >= limit) break;
        if (holders[r].contains(t)) continue;
        if (!problem_.policy.allow_multi_role && used[t] > 0) continue;
        holders[r].insert(t);
        ++used[t];
        result.delta[{roles[r].name, next_index++}] = problem_.things[t].id;
      }
    }
    fill_unfilled(problem_, result);
    if (!best_ || result.score > best_->score) best_ = std::move(result);
  }

  const MatchProblem& problem_;
  std::vector<std::size_t> things_;
  std::vector<std::vector<std::size_t>> feasible_;
  std::vector<std::size_t> compulsory_;
  std::vector<std::size_t> assignment_;
  std::vector<std::size_t> used_;
  std::optional<MatchResult> best_;
  std::size_t upper_bound_ = 0;
  std::size_t leaves_ = 0;
};

}  // namespace

MatchResult compute_delta(const MatchProblem& problem) {
  Backtracker bt(problem);
  auto best = bt.solve();
  if (!best) throw InfeasibleError(infeasible_roles(problem));
  return *best;
}

namespace {

// Enumerates, thing by thing (id order), every set of roles the thing may
// take, with an admissible bound to skip subtrees that cannot reach the best
// score found so far.
class Oracle {
 public:
  explicit Oracle(const MatchProblem& problem) : problem_(problem) {
    for (std::size_t i = 0; i < problem.things.size(); ++i) order_.push_back(i);
    std::sort(order_.begin(), order_.end(),
              [&](std::size_t a, std::size_t b) { return problem.things[a].id < problem.things[b].id; });
    const std::size_t n = problem.things.size();
    for (const auto& r : problem.roles) limits_.push_back(r.instance_limit(n));
    feasible_.assign(problem.roles.size(), std::vector<bool>(n, false));
    for (std::size_t r = 0; r < problem.roles.size(); ++r) {
      for (std::size_t t = 0; t < n; ++t) feasible_[r][t] = feasible(problem.roles[r], problem.things[t]);
    }
    // Suffix counts of feasible things per role, in enumeration order.
    remaining_.assign(n + 1, std::vector<std::size_t>(problem.roles.size(), 0));
    for (std::size_t pos = n; pos-- > 0;) {
      for (std::size_t r = 0; r < problem.roles.size(); ++r) {
        remaining_[pos][r] = remaining_[pos + 1][r] + (feasible_[r][order_[pos]] ? 1 : 0);
      }
    }
  }

  std::optional<MatchResult> solve() {
    counts_.assign(problem_.roles.size(), 0);
    chosen_.assign(problem_.things.size(), {});
    visit(0, 0);
    if (!best_key_) return std::nullopt;
    return build(*best_assignment_);
  }

 private:
  using Key = std::vector<std::pair<std::string, std::string>>;

  void visit(std::size_t pos, std::size_t score) {
    const std::size_t n = problem_.things.size();
    // Compulsory roles that can no longer be filled.
    for (std::size_t r = 0; r < problem_.roles.size(); ++r) {
      if (problem_.roles[r].compulsory && counts_[r] == 0 && remaining_[pos][r] == 0) return;
    }
    if (best_key_ && score + bound(pos) < best_score_) return;
    if (pos == n) {
      record(score);
      return;
    }
    const std::size_t t = order_[pos];
    std::vector<std::size_t> options;
    for (std::size_t r = 0; r < problem_.roles.size(); ++r) {
      if (feasible_[r][t] && counts_[r] < limits_[r]) options.push_back(r);
    }
    const std::size_t k = options.size();
    if (problem_.policy.allow_multi_role) {
      // Every subset of the options, larger subsets first.
      std::vector<std::uint32_t> masks(std::size_t{1} << k);
      std::iota(masks.begin(), masks.end(), 0u);
      std::stable_sort(masks.begin(), masks.end(), [](std::uint32_t a, std::uint32_t b) {
        return __builtin_popcount(a) > __builtin_popcount(b);
      });
      for (auto mask : masks) {
        std::vector<std::size_t> pick;
        for (std::size_t i = 0; i < k; ++i) {
          if (mask & (1u << i)) pick.push_back(options[i]);
        }
        apply(t, pick, +1);
        visit(pos + 1, score + pick.size());
        apply(t, pick, -1);
      }
    } else {
      for (auto r : options) {
        apply(t, {r}, +1);
        visit(pos + 1, score + 1);
        apply(t, {r}, -1);
      }
      visit(pos + 1, score);
    }
  }

  std::size_t bound(std::size_t pos) const {
    std::size_t total = 0;
    for (std::size_t r = 0; r < problem_.roles.size(); ++r) {
      total += std::min(limits_[r] - counts_[r], remaining_[pos][r]);
    }
    if (!problem_.policy.allow_multi_role) total = std::min(total, problem_.things.size() - pos);
    return total;
  }

  void apply(std::size_t t, const std::vector<std::size_t>& roles, int sign) {
    for (auto r : roles) counts_[r] = static_cast<std::size_t>(static_cast<long>(counts_[r]) + sign);
    chosen_[t] = sign > 0 ? roles : std::vector<std::size_t>{};
  }

  void record(std::size_t score) {
    Key key;
    for (std::size_t t = 0; t < chosen_.size(); ++t) {
      for (auto r : chosen_[t]) key.emplace_back(problem_.roles[r].name, problem_.things[t].id.value);
    }
    std::sort(key.begin(), key.end());
    if (!best_key_ || score > best_score_ || (score == best_score_ && key < *best_key_)) {
      best_score_ = score;
      best_key_ = std::move(key);
      best_assignment_ = chosen_;
    }
  }

  MatchResult build(const std::vector<std::vector<std::size_t>>& chosen) const {
    MatchResult result;
    std::vector<std::uint32_t> next(problem_.roles.size(), 0);
    for (auto t : order_) {
      for (auto r : chosen[t]) result.delta[{problem_.roles[r].name, next[r]++}] = problem_.things[t].id;
    }
    fill_unfilled(problem_, result);
    return result;
  }

  const MatchProblem& problem_;
  std::vector<std::size_t> order_;
  std::vector<std::size_t> limits_;
  std::vector<std::vector<bool>> feasible_;
  std::vector<std::vector<std::size_t>> remaining_;
  std::vector<std::size_t> counts_;
  std::vector<std::vector<std::size_t>> chosen_;
  std::size_t best_score_ = 0;
  std::optional<Key> best_key_;
  std::optional<std::vector<std::vector<std::size_t>>> best_assignment_;
};

}  // namespace

MatchResult oracle_delta(const MatchProblem& problem) {
  if (problem.roles.size() > kOracleMaxRoles || problem.things.size() > kOracleMaxThings) {
    throw ProblemTooLargeError("oracle_delta supports at most " + std::to_string(kOracleMaxRoles) + " roles and " +
                               std::to_string(kOracleMaxThings) + " things");
  }
  Oracle oracle(problem);
  auto best = oracle.solve();
  if (!best) throw InfeasibleError(infeasible_roles(problem));
  return *best;
}

}  // namespace emergent
