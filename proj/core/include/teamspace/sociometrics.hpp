#pragma once

// Team-level measures computed from self-reports, rankings, allocations and
// survey answers. Everything here is a pure function of its arguments.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "teamspace/errors.hpp"

namespace teamspace {

using ParticipantId = std::string;

/// Valence of a member's team experience on the integer scale -5..+5.
class EmotionScore {
 public:
  static constexpr int min = -5;
  static constexpr int max = 5;

  explicit EmotionScore(int value);

  int value() const noexcept { return value_; }
  friend bool operator==(EmotionScore, EmotionScore) = default;

 private:
  int value_;
};

/// One member's guesses about how each teammate feels.
struct GuessSet {
  ParticipantId guesser;
  std::map<ParticipantId, EmotionScore> guesses;

  /// Throws ValidationError if the guesser appears among the targets.
  void validate() const;
};

struct AccuracyResult {
  ParticipantId participant;
  double accuracy = 0.0;
  std::size_t evaluated_targets = 0;
  /// Sum of |guess - actual| over the evaluated targets.
  int total_abs_error = 0;

  /// Accuracy as a whole-number percentage, rounded half-up.
  int percent() const noexcept;
};

/// 1 - mean|G - S| / 5 over targets that have a self-report, floored at 0.
/// Absent when no guessed target has a self-report.
std::optional<AccuracyResult> perception_accuracy(
    const GuessSet& guesses, const std::map<ParticipantId, EmotionScore>& actuals);

/// Mean of the self-reports. Throws std::invalid_argument("no reports") when empty.
double group_climate(std::span<const EmotionScore> self_reports);

/// ranks[p] is the rank (1-based) given to proposal p.
class RankVector {
 public:
  /// Throws ValidationError unless `ranks` is a permutation of 1..ranks.size().
  explicit RankVector(std::vector<int> ranks);

  std::size_t size() const noexcept { return ranks_.size(); }
  int operator[](std::size_t proposal) const { return ranks_[proposal]; }
  const std::vector<int>& ranks() const noexcept { return ranks_; }

  friend bool operator==(const RankVector&, const RankVector&) = default;

 private:
  std::vector<int> ranks_;
};

/// Spearman footrule: sum over proposals of |a[p] - b[p]|.
int footrule_distance(const RankVector& a, const RankVector& b);

/// Mean footrule distance over all unordered pairs of members.
double team_disagreement(const std::map<ParticipantId, RankVector>& rankings);

/// Whole-currency amounts per proposal that add up to the budget exactly.
class AllocationVector {
 public:
  /// Throws ValidationError on a negative amount, non-positive budget, or a
  /// total that differs from the budget (the message names the discrepancy).
  AllocationVector(std::vector<std::int64_t> amounts, std::int64_t budget);

  const std::vector<std::int64_t>& amounts() const noexcept { return amounts_; }
  std::int64_t budget() const noexcept { return budget_; }
  std::size_t size() const noexcept { return amounts_.size(); }
  std::vector<double> proportions() const;

  friend bool operator==(const AllocationVector&, const AllocationVector&) = default;

 private:
  std::vector<std::int64_t> amounts_;
  std::int64_t budget_;
};

/// Mean over members of the RMS difference, in budget proportions, between
/// the member's allocation and the team's.
double compromise(std::span<const AllocationVector> member_allocations,
                  const AllocationVector& team_allocation);

struct LikertResponse {
  std::string item_id;
  int value = 0;
};

/// Maps v -> (points + 1) - v on every item listed in `reverse_items`.
std::vector<LikertResponse> reverse_code(std::span<const LikertResponse> responses,
                                         const std::set<std::string>& reverse_items,
                                         int points = 5);

/// Mean of the reverse-coded responses.
double score_scale(std::span<const LikertResponse> responses,
                   const std::set<std::string>& reverse_items, int points = 5);

/// Cronbach's alpha with sample variances. items_by_respondent[r][i] is
/// respondent r's answer to item i. Throws std::invalid_argument on fewer
/// than two items or respondents, ragged rows, or "degenerate scale" when the
/// total-score variance is zero.
double cronbach_alpha(const std::vector<std::vector<int>>& items_by_respondent);

/// Sample (n-1) variance. Requires at least two values.
double sample_variance(std::span<const double> values);

}  // namespace teamspace
