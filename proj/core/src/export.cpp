#include "teamspace/export.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "teamspace/csv.hpp"

namespace teamspace {
namespace {

using nlohmann::json;

std::string join(const std::vector<std::string>& parts, char sep = ';') {
  std::string out;
  for (const auto& p : parts) {
    if (!out.empty()) out += sep;
    out += p;
  }
  return out;
}

std::string proposal_id(const ExperimentConfig& c, std::size_t index) {
  return index < c.proposals.size() ? c.proposals[index].id : std::to_string(index + 1);
}

std::string text_of(const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

std::string opt_time(const std::optional<Timestamp>& t) { return t ? to_iso8601(*t) : ""; }

void participants(csv::Writer& w, const SystemState& s, const ExperimentConfig& c) {
  std::vector<std::string> header{"participant_id", "pseudonym", "joined_at", "team_id",
                                  "condition",      "active_at_end", "connected", "released"};
  for (const auto& item : c.survey.demographics) header.push_back(item.id);
  header.push_back("demographics_json");
  w.row(header);
  for (const auto& [id, p] : s.participants) {
    const auto* t = p.team_id ? s.find_team(*p.team_id) : nullptr;
    std::vector<std::string> row{id,
                                 p.pseudonym.value_or(""),
                                 to_iso8601(p.joined_at),
                                 p.team_id.value_or(""),
                                 t ? std::string(to_string(t->condition)) : "",
                                 t ? (t->is_active(id) ? "true" : "false") : "",
                                 p.connected ? "true" : "false",
                                 p.released ? "true" : "false"};
    for (const auto& item : c.survey.demographics) {
      const bool has = p.demographics.is_object() && p.demographics.contains(item.id);
      row.push_back(has ? text_of(p.demographics[item.id]) : "");
    }
    row.push_back(p.demographics.is_null() ? "" : p.demographics.dump());
    w.row(row);
  }
}

void teams(csv::Writer& w, const SystemState& s) {
  w.row({"team_id", "condition", "formed_at", "ended_at", "final_phase", "phase_history",
         "member_count", "active_count", "members", "termination_reason", "ranking_submitted",
         "ranking_agreed", "allocation_submitted"});
  for (const auto& [id, t] : s.teams) {
    std::vector<std::string> history;
    for (auto ph : t.history) history.emplace_back(to_string(ph));
    w.row({id, std::string(to_string(t.condition)), to_iso8601(t.formed_at), opt_time(t.ended_at),
           std::string(to_string(t.phase)), join(history), std::to_string(t.members.size()),
           std::to_string(t.active.size()), join(t.members), t.termination_reason.value_or(""),
           t.team_ranking ? "true" : "false",
           t.team_ranking && t.team_ranking->agreed ? "true" : "false",
           t.allocation ? "true" : "false"});
  }
}

void messages(csv::Writer& w, const SystemState& s) {
  w.row({"team_id", "message_id", "phase", "sender", "sent_at", "body"});
  for (const auto& [id, t] : s.teams) {
    for (const auto& m : t.transcript) {
      w.row({id, std::to_string(m.message_id), m.phase, m.sender, to_iso8601(m.sent_at), m.body});
    }
  }
}

void rankings(csv::Writer& w, const SystemState& s, const ExperimentConfig& c) {
  w.row({"source", "team_id", "participant_id", "proposal_id", "rank", "agreed"});
  for (const auto& [id, p] : s.participants) {
    if (!p.lobby_ranking) continue;
    for (std::size_t i = 0; i < p.lobby_ranking->size(); ++i) {
      w.row({"lobby", p.team_id.value_or(""), id, proposal_id(c, i),
             std::to_string((*p.lobby_ranking)[i]), ""});
    }
  }
  for (const auto& [id, t] : s.teams) {
    if (!t.team_ranking) continue;
    const auto& r = *t.team_ranking;
    for (std::size_t i = 0; i < r.ranking.size(); ++i) {
      w.row({"team", id, r.submitter, proposal_id(c, i), std::to_string(r.ranking[i]),
             r.agreed ? "true" : "false"});
    }
  }
}

void allocation_rows(csv::Writer& w, const ExperimentConfig& c, std::string_view source,
                     const std::string& team, const std::string& who,
                     const std::vector<std::int64_t>& amounts) {
  for (std::size_t i = 0; i < amounts.size(); ++i) {
    w.row({source, team, who, proposal_id(c, i), std::to_string(amounts[i]),
           csv::number(static_cast<double>(amounts[i]) / static_cast<double>(c.budget))});
  }
}

void allocations(csv::Writer& w, const SystemState& s, const ExperimentConfig& c) {
  w.row({"source", "team_id", "participant_id", "proposal_id", "amount", "proportion"});
  for (const auto& [id, t] : s.teams) {
    if (t.allocation) allocation_rows(w, c, "team", id, t.allocation->submitter, t.allocation->amounts);
    for (const auto& [who, r] : t.exit_surveys) allocation_rows(w, c, "individual", id, who, r.allocation);
  }
}

void exercise(csv::Writer& w, const SystemState& s) {
  w.row({"team_id", "participant_id", "self_report", "guesses", "accuracy", "evaluated_targets",
         "accuracy_percent"});
  for (const auto& [id, t] : s.teams) {
    if (!t.exercise) continue;
    const auto& ex = *t.exercise;
    for (const auto& member : t.members) {
      std::string report;
      if (auto it = ex.self_reports.find(member); it != ex.self_reports.end()) {
        report = std::to_string(it->second);
      }
      std::string guesses;
      if (auto it = ex.guess_sets.find(member); it != ex.guess_sets.end()) {
        std::vector<std::string> parts;
        for (const auto& [target, g] : it->second) parts.push_back(target + "=" + std::to_string(g));
        guesses = join(parts);
      }
      std::string accuracy, targets, percent;
      if (ex.feedback) {
        auto it = ex.feedback->accuracies.find(member);
        if (it != ex.feedback->accuracies.end() && it->second) {
          accuracy = csv::number(it->second->accuracy);
          targets = std::to_string(it->second->evaluated_targets);
          percent = std::to_string(it->second->percent());
        }
      }
      w.row({id, member, report, guesses, accuracy, targets, percent});
    }
  }
}

void surveys(csv::Writer& w, const SystemState& s) {
  w.row({"team_id", "participant_id", "item_id", "kind", "value"});
  for (const auto& [id, t] : s.teams) {
    for (const auto& [who, r] : t.exit_surveys) {
      for (const auto& [item, v] : r.likert) w.row({id, who, item, "likert", std::to_string(v)});
      for (const auto& [item, v] : r.binary) w.row({id, who, item, "binary", v ? "true" : "false"});
      for (const auto& [item, v] : r.open) w.row({id, who, item, "open", v});
    }
  }
}

}  // namespace

const std::vector<std::string>& export_table_names() {
  static const std::vector<std::string> names{"participants", "teams",    "messages", "rankings",
                                              "allocations",  "exercise", "surveys"};
  return names;
}

std::string export_table(std::string_view name, const SystemState& s, const ExperimentConfig& c) {
  std::ostringstream out;
  csv::Writer w(out);
  if (name == "participants") {
    participants(w, s, c);
  } else if (name == "teams") {
    teams(w, s);
  } else if (name == "messages") {
    messages(w, s);
  } else if (name == "rankings") {
    rankings(w, s, c);
  } else if (name == "allocations") {
    allocations(w, s, c);
  } else if (name == "exercise") {
    exercise(w, s);
  } else if (name == "surveys") {
    surveys(w, s);
  } else {
    throw std::invalid_argument("unknown table '" + std::string(name) +
                                "'; valid tables: " + join(export_table_names(), ' '));
  }
  return out.str();
}

std::vector<std::filesystem::path> export_tables(const SystemState& s, const ExperimentConfig& c,
                                                 const std::filesystem::path& dir,
                                                 std::span<const std::string> names) {
  std::vector<std::string> wanted(names.begin(), names.end());
  if (wanted.empty()) wanted = export_table_names();
  std::vector<std::string> rendered;
  for (const auto& n : wanted) rendered.push_back(export_table(n, s, c));  // validate all first
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  for (std::size_t i = 0; i < wanted.size(); ++i) {
    auto path = dir / (wanted[i] + ".csv");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << rendered[i];
    if (!out) throw std::runtime_error("cannot write " + path.string());
    written.push_back(std::move(path));
  }
  return written;
}

}  // namespace teamspace
