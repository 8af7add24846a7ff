#include "teamspace/sociometrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <stdexcept>

namespace teamspace {

EmotionScore::EmotionScore(int value) : value_(value) {
  if (value < min || value > max) {
    throw ValidationError("emotion score " + std::to_string(value) + " outside [-5, 5]");
  }
}

void GuessSet::validate() const {
  if (guesses.contains(guesser)) {
    throw ValidationError("participant " + guesser + " cannot guess their own score");
  }
}

int AccuracyResult::percent() const noexcept {
  if (evaluated_targets == 0) return 0;
  const long long denom = 5LL * static_cast<long long>(evaluated_targets);
  const long long numer = 100LL * (denom - total_abs_error);
  if (numer <= 0) return 0;
  return static_cast<int>((2 * numer + denom) / (2 * denom));
}

std::optional<AccuracyResult> perception_accuracy(
    const GuessSet& guesses, const std::map<ParticipantId, EmotionScore>& actuals) {
  guesses.validate();
  int abs_error = 0;
  std::size_t targets = 0;
  for (const auto& [target, guess] : guesses.guesses) {
    auto it = actuals.find(target);
    if (it == actuals.end()) continue;
    abs_error += std::abs(guess.value() - it->second.value());
    ++targets;
  }
  if (targets == 0) return std::nullopt;

  // (5n - sum) / 5n is the exact value of 1 - (1/5) * sum / n; one division
  // keeps the result correctly rounded.
  const auto denom = 5 * static_cast<long long>(targets);
  const auto numer = denom - abs_error;
  AccuracyResult result;
  result.participant = guesses.guesser;
  result.evaluated_targets = targets;
  result.total_abs_error = abs_error;
  result.accuracy = numer <= 0 ? 0.0 : static_cast<double>(numer) / static_cast<double>(denom);
  return result;
}

double group_climate(std::span<const EmotionScore> self_reports) {
  if (self_reports.empty()) throw std::invalid_argument("no reports");
  long long sum = 0;
  for (auto s : self_reports) sum += s.value();
  return static_cast<double>(sum) / static_cast<double>(self_reports.size());
}

RankVector::RankVector(std::vector<int> ranks) : ranks_(std::move(ranks)) {
  const auto n = ranks_.size();
  if (n == 0) throw ValidationError("ranking is empty");
  std::vector<bool> seen(n + 1, false);
  for (int r : ranks_) {
    if (r < 1 || static_cast<std::size_t>(r) > n) {
      throw ValidationError("rank " + std::to_string(r) + " outside 1.." + std::to_string(n));
    }
    if (seen[r]) throw ValidationError("rank " + std::to_string(r) + " used twice");
    seen[r] = true;
  }
}

int footrule_distance(const RankVector& a, const RankVector& b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("rankings cover different proposal sets (" +
                                std::to_string(a.size()) + " vs " + std::to_string(b.size()) +
                                ")");
  }
  int d = 0;
  for (std::size_t p = 0; p < a.size(); ++p) d += std::abs(a[p] - b[p]);
  return d;
}

double team_disagreement(const std::map<ParticipantId, RankVector>& rankings) {
  if (rankings.size() < 2) throw std::invalid_argument("need at least two rankings");
  long long total = 0;
  long long pairs = 0;
  for (auto i = rankings.begin(); i != rankings.end(); ++i) {
    for (auto j = std::next(i); j != rankings.end(); ++j) {
      total += footrule_distance(i->second, j->second);
      ++pairs;
    }
  }
  return static_cast<double>(total) / static_cast<double>(pairs);
}

AllocationVector::AllocationVector(std::vector<std::int64_t> amounts, std::int64_t budget)
    : amounts_(std::move(amounts)), budget_(budget) {
  if (budget_ <= 0) throw ValidationError("budget must be positive");
  if (amounts_.empty()) throw ValidationError("allocation is empty");
  std::int64_t total = 0;
  for (std::size_t p = 0; p < amounts_.size(); ++p) {
    if (amounts_[p] < 0) {
      throw ValidationError("amount for proposal " + std::to_string(p + 1) + " is negative");
    }
    total += amounts_[p];
  }
  if (total < budget_) {
    throw ValidationError("allocation total " + std::to_string(total) + " is below budget " +
                          std::to_string(budget_) + " (deficit " +
                          std::to_string(budget_ - total) + ")");
  }
  if (total > budget_) {
    throw ValidationError("allocation total " + std::to_string(total) + " exceeds budget " +
                          std::to_string(budget_) + " (excess " +
                          std::to_string(total - budget_) + ")");
  }
}

std::vector<double> AllocationVector::proportions() const {
  std::vector<double> out;
  out.reserve(amounts_.size());
  for (auto a : amounts_) out.push_back(static_cast<double>(a) / static_cast<double>(budget_));
  return out;
}

double compromise(std::span<const AllocationVector> member_allocations,
                  const AllocationVector& team_allocation) {
  if (member_allocations.empty()) throw std::invalid_argument("no member allocations");
  const auto team = team_allocation.proportions();
  double sum_rms = 0.0;
  for (const auto& member : member_allocations) {
    if (member.budget() != team_allocation.budget()) {
      throw std::invalid_argument("budget mismatch: " + std::to_string(member.budget()) +
                                  " vs " + std::to_string(team_allocation.budget()));
    }
    if (member.size() != team_allocation.size()) {
      throw std::invalid_argument("allocations cover different proposal sets");
    }
    const auto mine = member.proportions();
    double sq = 0.0;
    for (std::size_t p = 0; p < mine.size(); ++p) {
      const double d = mine[p] - team[p];
      sq += d * d;
    }
    sum_rms += std::sqrt(sq / static_cast<double>(mine.size()));
  }
  return sum_rms / static_cast<double>(member_allocations.size());
}

std::vector<LikertResponse> reverse_code(std::span<const LikertResponse> responses,
                                         const std::set<std::string>& reverse_items,
                                         int points) {
  std::set<std::string> present;
  std::vector<LikertResponse> out;
  out.reserve(responses.size());
  for (const auto& r : responses) {
    if (r.value < 1 || r.value > points) {
      throw ValidationError("item " + r.item_id + " value " + std::to_string(r.value) +
                            " outside 1.." + std::to_string(points));
    }
    present.insert(r.item_id);
    auto coded = r;
    if (reverse_items.contains(r.item_id)) coded.value = points + 1 - r.value;
    out.push_back(std::move(coded));
  }
  for (const auto& item : reverse_items) {
    if (!present.contains(item)) {
      throw std::invalid_argument("reverse-coded item " + item + " missing from responses");
    }
  }
  return out;
}

double score_scale(std::span<const LikertResponse> responses,
                   const std::set<std::string>& reverse_items, int points) {
  if (responses.empty()) throw std::invalid_argument("no responses");
  const auto coded = reverse_code(responses, reverse_items, points);
  long long sum = 0;
  for (const auto& r : coded) sum += r.value;
  return static_cast<double>(sum) / static_cast<double>(coded.size());
}

double sample_variance(std::span<const double> values) {
  if (values.size() < 2) throw std::invalid_argument("variance needs two values");
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return ss / (n - 1.0);
}

double cronbach_alpha(const std::vector<std::vector<int>>& items_by_respondent) {
  const auto respondents = items_by_respondent.size();
  if (respondents < 2) throw std::invalid_argument("need at least two respondents");
  const auto k = items_by_respondent.front().size();
  if (k < 2) throw std::invalid_argument("need at least two items");

  std::vector<std::vector<double>> columns(k, std::vector<double>(respondents));
  std::vector<double> totals(respondents, 0.0);
  for (std::size_t r = 0; r < respondents; ++r) {
    if (items_by_respondent[r].size() != k) throw std::invalid_argument("ragged item matrix");
    for (std::size_t i = 0; i < k; ++i) {
      columns[i][r] = items_by_respondent[r][i];
      totals[r] += items_by_respondent[r][i];
    }
  }
  const double total_var = sample_variance(totals);
  if (total_var == 0.0) throw std::invalid_argument("degenerate scale");
  double item_var = 0.0;
  for (const auto& col : columns) item_var += sample_variance(col);
  const double kd = static_cast<double>(k);
  return (kd / (kd - 1.0)) * (1.0 - item_var / total_var);
}

}  // namespace teamspace
