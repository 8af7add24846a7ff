#include "teamspace/analysis.hpp"

#include <cmath>
#include <fstream>
#include <functional>

#include "teamspace/csv.hpp"
#include "teamspace/errors.hpp"
#include "teamspace/event_log.hpp"
#include "teamspace/intervention.hpp"

namespace teamspace::analysis {
namespace {

const std::vector<std::string> kSubcommands{"disagreement", "climate", "compromise", "scales",
                                            "accuracy",     "liwc",    "all"};

std::vector<ParticipantId> analyzed_members(const TeamState& t) {
  std::vector<ParticipantId> out;
  for (const auto& m : t.members) {
    if (t.is_active(m)) out.push_back(m);
  }
  return out;
}

std::optional<double> scale_score(const SurveyScale& scale, const ExitSurveyResponse& r,
                                  int points) {
  std::vector<LikertResponse> responses;
  std::set<std::string> reverse;
  for (const auto& item : scale.items) {
    auto it = r.likert.find(item.id);
    if (it == r.likert.end()) return std::nullopt;
    responses.push_back({item.id, it->second});
    if (item.reverse) reverse.insert(item.id);
  }
  if (responses.empty()) return std::nullopt;
  return score_scale(responses, reverse, points);
}

void collect(std::map<std::string, std::map<std::string, std::vector<double>>>& values,
             const std::string& measure, Condition c, const std::optional<double>& v) {
  auto& bucket = values[measure][std::string(to_string(c))];
  if (v) bucket.push_back(*v);
}

std::string opt_int(const std::optional<int>& v) { return v ? std::to_string(*v) : ""; }

std::string opt_bool(const std::optional<bool>& v) {
  return v ? (*v ? "true" : "false") : "";
}

void write_file(const std::filesystem::path& path, const std::function<void(csv::Writer&)>& body) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  csv::Writer w(out);
  body(w);
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

void write_descriptives(const std::filesystem::path& path, const AnalysisReport& report,
                        const std::vector<std::string>& measures) {
  write_file(path, [&](csv::Writer& w) {
    w.row({"measure", "condition", "n", "mean", "sd"});
    for (const auto& [measure, by_condition] : report.descriptives) {
      if (!measures.empty() &&
          std::find(measures.begin(), measures.end(), measure) == measures.end()) {
        continue;
      }
      for (const auto& [condition, d] : by_condition) {
        w.row({measure, condition, std::to_string(d.n), csv::number(d.mean), csv::number(d.sd)});
      }
    }
  });
}

void write_excluded(const std::filesystem::path& dir, const AnalysisReport& report) {
  write_file(dir / "excluded_teams.csv", [&](csv::Writer& w) {
    w.row({"team_id", "condition", "final_phase", "reason"});
    for (const auto& e : report.excluded) {
      w.row({e.team_id, std::string(to_string(e.condition)), e.final_phase, e.reason});
    }
  });
}

void write_disagreement(const std::filesystem::path& dir, const AnalysisReport& report) {
  write_file(dir / "disagreement.csv", [&](csv::Writer& w) {
    w.row({"team_id", "condition", "analyzed_members", "baseline_disagreement"});
    for (const auto& t : report.teams) {
      w.row({t.team_id, std::string(to_string(t.condition)), std::to_string(t.analyzed_members),
             csv::number(t.baseline_disagreement)});
    }
  });
  write_descriptives(dir / "disagreement_descriptives.csv", report, {"baseline_disagreement"});
}

void write_climate(const std::filesystem::path& dir, const AnalysisReport& report) {
  write_file(dir / "climate.csv", [&](csv::Writer& w) {
    w.row({"team_id", "condition", "climate", "climate_display"});
    for (const auto& t : report.teams) {
      w.row({t.team_id, std::string(to_string(t.condition)), csv::number(t.climate),
             t.climate ? intervention::format_climate(*t.climate) : ""});
    }
  });
  write_descriptives(dir / "climate_descriptives.csv", report, {"climate"});
}

void write_compromise(const std::filesystem::path& dir, const AnalysisReport& report) {
  write_file(dir / "compromise.csv", [&](csv::Writer& w) {
    w.row({"team_id", "condition", "analyzed_members", "compromise", "ranking_submitted",
           "ranking_agreed"});
    for (const auto& t : report.teams) {
      w.row({t.team_id, std::string(to_string(t.condition)), std::to_string(t.analyzed_members),
             csv::number(t.compromise), t.ranking_submitted ? "true" : "false",
             t.ranking_agreed ? "true" : "false"});
    }
  });
  write_descriptives(dir / "compromise_descriptives.csv", report, {"compromise"});
}

void write_scales(const std::filesystem::path& dir, const AnalysisReport& report,
                  const ExperimentConfig& config) {
  write_file(dir / "scales.csv", [&](csv::Writer& w) {
    std::vector<std::string> header{"team_id", "participant_id", "condition"};
    for (const auto& s : config.survey.scales) header.push_back(s.name);
    for (const auto& b : config.survey.binary_items) header.push_back(b.id);
    w.row(header);
    for (const auto& p : report.participants) {
      std::vector<std::string> row{p.team_id, p.participant_id, std::string(to_string(p.condition))};
      for (const auto& s : config.survey.scales) row.push_back(csv::number(p.scales.at(s.name)));
      for (const auto& b : config.survey.binary_items) row.push_back(opt_bool(p.binary.at(b.id)));
      w.row(row);
    }
  });
  std::vector<std::string> measures;
  for (const auto& s : config.survey.scales) measures.push_back(s.name);
  for (const auto& b : config.survey.binary_items) measures.push_back(b.id);
  write_descriptives(dir / "scales_descriptives.csv", report, measures);
}

void write_accuracy(const std::filesystem::path& dir, const AnalysisReport& report) {
  write_file(dir / "accuracy.csv", [&](csv::Writer& w) {
    w.row({"team_id", "participant_id", "condition", "self_report", "accuracy",
           "evaluated_targets", "accuracy_percent"});
    for (const auto& p : report.participants) {
      if (p.condition != Condition::intervention) continue;
      w.row({p.team_id, p.participant_id, std::string(to_string(p.condition)),
             opt_int(p.self_report), p.accuracy ? csv::number(p.accuracy->accuracy) : "",
             p.accuracy ? std::to_string(p.accuracy->evaluated_targets) : "",
             p.accuracy ? std::to_string(p.accuracy->percent()) : ""});
    }
  });
  write_descriptives(dir / "accuracy_descriptives.csv", report, {"accuracy", "self_report"});
}

void write_all(const std::filesystem::path& dir, const AnalysisReport& report,
               const ExperimentConfig& config) {
  write_file(dir / "teams.csv", [&](csv::Writer& w) {
    w.row({"team_id", "condition", "members", "analyzed_members", "baseline_disagreement",
           "climate", "compromise", "ranking_submitted", "ranking_agreed"});
    for (const auto& t : report.teams) {
      w.row({t.team_id, std::string(to_string(t.condition)), std::to_string(t.members),
             std::to_string(t.analyzed_members), csv::number(t.baseline_disagreement),
             csv::number(t.climate), csv::number(t.compromise),
             t.ranking_submitted ? "true" : "false", t.ranking_agreed ? "true" : "false"});
    }
  });
  std::map<TeamId, const TeamMeasures*> team_rows;
  for (const auto& t : report.teams) team_rows[t.team_id] = &t;
  write_file(dir / "participants.csv", [&](csv::Writer& w) {
    std::vector<std::string> header{"team_id", "participant_id", "condition",
                                    "baseline_disagreement", "climate", "compromise",
                                    "ranking_agreed"};
    for (const auto& s : config.survey.scales) header.push_back(s.name);
    for (const auto& b : config.survey.binary_items) header.push_back(b.id);
    for (const char* h : {"self_report", "accuracy", "evaluated_targets", "accuracy_percent",
                          "allocation_divergence"}) {
      header.emplace_back(h);
    }
    w.row(header);
    for (const auto& p : report.participants) {
      const auto& t = *team_rows.at(p.team_id);
      std::vector<std::string> row{p.team_id,
                                   p.participant_id,
                                   std::string(to_string(p.condition)),
                                   csv::number(t.baseline_disagreement),
                                   csv::number(t.climate),
                                   csv::number(t.compromise),
                                   t.ranking_agreed ? "true" : "false"};
      for (const auto& s : config.survey.scales) row.push_back(csv::number(p.scales.at(s.name)));
      for (const auto& b : config.survey.binary_items) row.push_back(opt_bool(p.binary.at(b.id)));
      row.push_back(opt_int(p.self_report));
      row.push_back(p.accuracy ? csv::number(p.accuracy->accuracy) : "");
      row.push_back(p.accuracy ? std::to_string(p.accuracy->evaluated_targets) : "");
      row.push_back(p.accuracy ? std::to_string(p.accuracy->percent()) : "");
      row.push_back(csv::number(p.allocation_divergence));
      w.row(row);
    }
  });
  write_descriptives(dir / "descriptives.csv", report, {});
}

void write_liwc(const std::filesystem::path& dir, const SystemState& state,
                const LiwcDictionary& dict, bool by_phase, bool shift) {
  const auto rows = liwc_rows(state, dict, by_phase);
  write_file(dir / "liwc_profiles.csv", [&](csv::Writer& w) {
    w.row({"team_id", "condition", "phase", "message_count", "category", "value"});
    for (const auto& r : rows) {
      for (const auto& [category, v] : r.profile.values) {
        w.row({r.team_id, std::string(to_string(r.condition)), r.phase,
               std::to_string(r.profile.message_count), category, csv::number(v)});
      }
    }
  });
  if (!shift) return;
  const auto phase_rows = by_phase ? rows : liwc_rows(state, dict, true);
  const auto shifts = liwc_shifts(phase_rows, dict);
  write_file(dir / "liwc_shift.csv", [&](csv::Writer& w) {
    w.row({"team_id", "condition", "category", "discuss", "decide", "shift_percent", "status"});
    for (const auto& s : shifts) {
      w.row({s.team_id, std::string(to_string(s.condition)), s.category, csv::number(s.discuss),
             csv::number(s.decide), csv::number(s.shift_percent), s.status});
    }
  });
  write_file(dir / "liwc_shift_by_condition.csv", [&](csv::Writer& w) {
    w.row({"condition", "category", "n_teams", "mean_shift_percent", "sd_shift_percent",
           "pooled_discuss", "pooled_decide", "pooled_shift_percent"});
    for (const auto& c : liwc_condition_shifts(shifts)) {
      w.row({c.condition, c.category, std::to_string(c.team_shifts.n),
             csv::number(c.team_shifts.mean), csv::number(c.team_shifts.sd),
             csv::number(c.pooled_discuss), csv::number(c.pooled_decide),
             csv::number(c.pooled_shift_percent)});
    }
  });
}

}  // namespace

Descriptive describe(std::span<const double> values) {
  Descriptive d;
  d.n = values.size();
  if (values.empty()) return d;
  double sum = 0.0;
  for (double v : values) sum += v;
  d.mean = sum / static_cast<double>(values.size());
  if (values.size() >= 2) d.sd = std::sqrt(sample_variance(values));
  return d;
}

AnalysisReport analyze(const SystemState& state, const ExperimentConfig& config) {
  AnalysisReport report;
  std::map<std::string, std::map<std::string, std::vector<double>>> values;

  for (const auto& [id, t] : state.teams) {
    if (t.phase != Phase::complete) {
      report.excluded.push_back({id, t.condition, std::string(to_string(t.phase)),
                                 t.phase == Phase::terminated
                                     ? t.termination_reason.value_or("terminated")
                                     : "incomplete"});
      continue;
    }
    const auto members = analyzed_members(t);
    TeamMeasures tm;
    tm.team_id = id;
    tm.condition = t.condition;
    tm.members = t.members.size();
    tm.analyzed_members = members.size();
    tm.ranking_submitted = t.team_ranking.has_value();
    tm.ranking_agreed = t.team_ranking && t.team_ranking->agreed;

    std::map<ParticipantId, RankVector> rankings;
    for (const auto& m : members) {
      const auto& p = state.participants.at(m);
      if (p.lobby_ranking) rankings.emplace(m, RankVector(*p.lobby_ranking));
    }
    if (rankings.size() >= 2) tm.baseline_disagreement = team_disagreement(rankings);

    if (t.exercise && t.exercise->feedback) tm.climate = t.exercise->feedback->climate;

    std::optional<AllocationVector> team_alloc;
    if (t.allocation) team_alloc.emplace(t.allocation->amounts, config.budget);
    std::vector<AllocationVector> member_allocs;

    for (const auto& m : members) {
      ParticipantMeasures pm;
      pm.team_id = id;
      pm.participant_id = m;
      pm.condition = t.condition;
      const auto survey = t.exit_surveys.find(m);
      for (const auto& scale : config.survey.scales) {
        pm.scales[scale.name] = survey == t.exit_surveys.end()
                                    ? std::nullopt
                                    : scale_score(scale, survey->second, config.survey.likert_points);
      }
      for (const auto& item : config.survey.binary_items) {
        std::optional<bool> v;
        if (survey != t.exit_surveys.end()) {
          if (auto b = survey->second.binary.find(item.id); b != survey->second.binary.end()) {
            v = b->second;
          }
        }
        pm.binary[item.id] = v;
      }
      if (t.exercise) {
        const auto& ex = *t.exercise;
        if (auto r = ex.self_reports.find(m); r != ex.self_reports.end()) pm.self_report = r->second;
        if (ex.feedback) {
          if (auto a = ex.feedback->accuracies.find(m); a != ex.feedback->accuracies.end()) {
            pm.accuracy = a->second;
          }
        }
      }
      if (survey != t.exit_surveys.end() && team_alloc) {
        AllocationVector own(survey->second.allocation, config.budget);
        pm.allocation_divergence = compromise(std::span(&own, 1), *team_alloc);
        member_allocs.push_back(std::move(own));
      }

      for (const auto& [name, v] : pm.scales) collect(values, name, t.condition, v);
      for (const auto& [name, v] : pm.binary) {
        collect(values, name, t.condition, v ? std::optional<double>(*v ? 1.0 : 0.0) : std::nullopt);
      }
      if (t.condition == Condition::intervention) {
        collect(values, "accuracy", t.condition,
                pm.accuracy ? std::optional<double>(pm.accuracy->accuracy) : std::nullopt);
        collect(values, "self_report", t.condition,
                pm.self_report ? std::optional<double>(*pm.self_report) : std::nullopt);
      }
      collect(values, "allocation_divergence", t.condition, pm.allocation_divergence);
      report.participants.push_back(std::move(pm));
    }
    if (team_alloc && !member_allocs.empty()) tm.compromise = compromise(member_allocs, *team_alloc);

    collect(values, "baseline_disagreement", t.condition, tm.baseline_disagreement);
    if (t.condition == Condition::intervention) collect(values, "climate", t.condition, tm.climate);
    collect(values, "compromise", t.condition, tm.compromise);
    report.teams.push_back(std::move(tm));
  }
  if (report.teams.empty()) throw ValidationError("no analyzable teams");

  for (const auto& [measure, by_condition] : values) {
    for (const auto& [condition, v] : by_condition) {
      report.descriptives[measure][condition] = describe(v);
    }
  }
  return report;
}

void check_feedback_consistency(const SystemState& state) {
  for (const auto& [id, t] : state.teams) {
    if (!t.exercise || !t.exercise->feedback) continue;
    const auto& logged = *t.exercise->feedback;
    const auto recomputed = intervention::compute_feedback(*t.exercise);
    if (logged.climate != recomputed.climate) {
      throw ConsistencyError("team " + id + ": logged climate differs from recomputed climate");
    }
    if (logged.accuracies.size() != recomputed.accuracies.size()) {
      throw ConsistencyError("team " + id + ": logged accuracies cover different members");
    }
    for (const auto& [who, r] : recomputed.accuracies) {
      auto it = logged.accuracies.find(who);
      if (it == logged.accuracies.end()) {
        throw ConsistencyError("team " + id + ": no logged accuracy for " + who);
      }
      const auto& l = it->second;
      const bool same = l.has_value() == r.has_value() &&
                        (!r || (l->accuracy == r->accuracy &&
                                l->evaluated_targets == r->evaluated_targets &&
                                l->total_abs_error == r->total_abs_error));
      if (!same) {
        throw ConsistencyError("team " + id + ": logged accuracy for " + who +
                               " differs from recomputed accuracy");
      }
    }
  }
}

std::vector<LiwcRow> liwc_rows(const SystemState& state, const LiwcDictionary& dict,
                               bool by_phase) {
  std::vector<LiwcRow> rows;
  for (const auto& [id, t] : state.teams) {
    if (t.phase != Phase::complete) continue;
    std::map<std::string, std::vector<std::string>> texts;
    for (const auto& m : t.transcript) {
      if (m.system) continue;
      if (m.phase != kTagDiscuss && m.phase != kTagDecide) continue;
      texts[by_phase ? m.phase : "all"].push_back(m.body);
    }
    for (const auto& phase : by_phase ? std::vector<std::string>{"discuss", "decide"}
                                      : std::vector<std::string>{"all"}) {
      auto it = texts.find(phase);
      if (it == texts.end()) continue;
      auto profile = liwc_profile(it->second, dict);
      if (profile.message_count == 0) continue;
      rows.push_back({id, t.condition, phase, std::move(profile)});
    }
  }
  return rows;
}

std::vector<ShiftRow> liwc_shifts(std::span<const LiwcRow> rows, const LiwcDictionary& dict) {
  std::map<TeamId, std::pair<const LiwcRow*, const LiwcRow*>> by_team;
  std::map<TeamId, Condition> conditions;
  for (const auto& r : rows) {
    conditions[r.team_id] = r.condition;
    auto& slot = by_team[r.team_id];
    if (r.phase == "discuss") slot.first = &r;
    if (r.phase == "decide") slot.second = &r;
  }
  std::vector<ShiftRow> out;
  for (const auto& [team, pair] : by_team) {
    const auto [discuss, decide] = pair;
    for (const auto& [category, _] : dict.categories()) {
      ShiftRow s;
      s.team_id = team;
      s.condition = conditions.at(team);
      s.category = category;
      if (discuss) s.discuss = discuss->profile.values.at(category);
      if (decide) s.decide = decide->profile.values.at(category);
      if (!discuss || !decide) {
        s.status = "n/a";
      } else {
        s.shift_percent = liwc_shift(discuss->profile, decide->profile, category);
        s.status = s.shift_percent ? "ok" : "new";
      }
      out.push_back(std::move(s));
    }
  }
  return out;
}

std::vector<ConditionShift> liwc_condition_shifts(std::span<const ShiftRow> rows) {
  struct Acc {
    std::vector<double> shifts, discuss, decide;
  };
  std::map<std::pair<std::string, std::string>, Acc> acc;
  for (const auto& r : rows) {
    auto& a = acc[{std::string(to_string(r.condition)), r.category}];
    if (r.shift_percent) a.shifts.push_back(*r.shift_percent);
    if (r.discuss && r.decide) {
      a.discuss.push_back(*r.discuss);
      a.decide.push_back(*r.decide);
    }
  }
  std::vector<ConditionShift> out;
  for (const auto& [key, a] : acc) {
    ConditionShift c;
    c.condition = key.first;
    c.category = key.second;
    c.team_shifts = describe(a.shifts);
    c.pooled_discuss = describe(a.discuss).mean;
    c.pooled_decide = describe(a.decide).mean;
    if (c.pooled_discuss && c.pooled_decide) {
      LiwcProfile before, after;
      before.values[c.category] = *c.pooled_discuss;
      after.values[c.category] = *c.pooled_decide;
      c.pooled_shift_percent = liwc_shift(before, after, c.category);
    }
    out.push_back(std::move(c));
  }
  return out;
}

ExperimentConfig discover_config(const std::filesystem::path& log,
                                 const std::optional<std::filesystem::path>& explicit_path) {
  if (explicit_path) return load_config(explicit_path->string());
  const auto beside = log.parent_path() / "config.json";
  if (std::filesystem::exists(beside)) return load_config(beside.string());
  return ExperimentConfig::defaults();
}

int run_on_state(const Options& o, const SystemState& state, const ExperimentConfig& config,
                 std::ostream& err) {
  try {
    if (std::find(kSubcommands.begin(), kSubcommands.end(), o.subcommand) == kSubcommands.end()) {
      throw ValidationError("unknown analysis '" + o.subcommand + "'");
    }
    const bool all = o.subcommand == "all";
    std::optional<LiwcDictionary> dict;
    if (o.subcommand == "liwc" || (all && o.dict)) {
      if (!o.dict) throw ValidationError("liwc needs --dict");
      dict = LiwcDictionary::load(o.dict->string());
    }
    if (all || o.subcommand == "climate" || o.subcommand == "accuracy") {
      check_feedback_consistency(state);
    }
    const auto report = analyze(state, config);
    std::filesystem::create_directories(o.out);
    write_excluded(o.out, report);
    if (all || o.subcommand == "disagreement") write_disagreement(o.out, report);
    if (all || o.subcommand == "climate") write_climate(o.out, report);
    if (all || o.subcommand == "compromise") write_compromise(o.out, report);
    if (all || o.subcommand == "scales") write_scales(o.out, report, config);
    if (all || o.subcommand == "accuracy") write_accuracy(o.out, report);
    if (all) write_all(o.out, report, config);
    if (dict) write_liwc(o.out, state, *dict, o.by_phase, o.shift || all);
    return kExitOk;
  } catch (const ConsistencyError& e) {
    err << "consistency failure: " << e.what() << '\n';
    return kExitConsistency;
  } catch (const DictionaryError& e) {
    err << "invalid dictionary: " << e.what() << '\n';
    return kExitValidation;
  } catch (const CommandError& e) {
    err << e.what() << '\n';
    return kExitValidation;
  }
}

int run(const Options& o, std::ostream& err) {
  SystemState state;
  ExperimentConfig config;
  try {
    config = discover_config(o.log, o.config);
    const auto events = read_event_log(o.log);
    state = replay(events);
  } catch (const ReplayError& e) {
    err << "invalid log: " << e.what() << '\n';
    return kExitValidation;
  } catch (const CommandError& e) {
    err << "invalid input: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "cannot read input: " << e.what() << '\n';
    return kExitValidation;
  }
  return run_on_state(o, state, config, err);
}

}  // namespace teamspace::analysis
