#include "voicepilot/session/wire.hpp"

#include <cmath>

namespace voicepilot::session::wire {

using nlohmann::json;

namespace {

double display_round(double v) { return std::round(v * 1e6) / 1e6; }

}  // namespace

json to_json(const dsl::SafetyReport& report) {
  json clips = json::array();
  for (const auto& c : report.clips) {
    clips.push_back({{"stmt_index", c.stmt_index},
                     {"var", c.target},
                     {"raw_value", c.raw_value},
                     {"clipped_value", c.clipped_value}});
  }
  json insertions = json::array();
  for (const auto& i : report.insertions) {
    insertions.push_back({{"position", i.position}, {"inserted", {{"kind", "sleep"}, {"seconds", i.inserted.seconds}}}});
  }
  json rejections = json::array();
  for (const auto& r : report.rejections) {
    json row = {{"line", r.line}, {"token", r.token}, {"reason", r.reason}};
    if (r.stmt_index) row["stmt_index"] = *r.stmt_index;
    rejections.push_back(std::move(row));
  }
  return {{"accepted", report.accepted()},
          {"clips", std::move(clips)},
          {"insertions", std::move(insertions)},
          {"rejections", std::move(rejections)}};
}

json to_json(const SessionEvent& event) {
  json j = {{"seq", event.seq},
            {"t_ms", event.t_ms},
            {"source", event.source},
            {"kind", event.kind},
            {"detail", event.detail}};
  if (event.run) j["run"] = *event.run;
  return j;
}

json to_json(const sim::RobotState& robot, const dsl::VariableSpec& spec) {
  json native = json::object();
  json grounded = json::object();
  for (dsl::Variable v : dsl::kAllVariables) {
    const std::string name(dsl::to_string(v));
    native[name] = robot.variables_native[v];
    grounded[name] = display_round(dsl::unscale_variable(v, robot.variables_native[v], spec));
  }
  return {{"arm_phase", sim::to_string(robot.arm_phase)},
          {"bowls", robot.bowl_contents},
          {"spoon_attached", robot.spoon_attached},
          {"exec_status", std::string(sim::to_string(robot.exec_status))},
          {"variables_native", std::move(native)},
          {"variables_grounded", std::move(grounded)}};
}

json snapshot_message(const SessionView& view) {
  json history = json::array();
  std::size_t cap = 0;
  if (view.history) {
    cap = view.history->cap();
    for (const auto& e : view.history->entries()) {
      history.push_back({{"command", e.user_command}, {"code", e.generated_code}});
    }
  }
  json session = {{"phase", std::string(to_string(view.phase))},
                  {"history", std::move(history)},
                  {"history_cap", cap},
                  {"inter_bite_delay_s", view.pause.inter_bite_delay_s},
                  {"max_sleep_s", view.pause.max_sleep_s},
                  {"last_report", to_json(view.last_report)},
                  {"cheat_sheet", view.cheat_sheet}};
  return {{"type", "snapshot"},
          {"protocol", kProtocolVersion},
          {"t_ms", view.t_ms},
          {"session", std::move(session)},
          {"robot", to_json(view.robot, view.variables)}};
}

json event_message(const SessionEvent& event) {
  return {{"type", "event"}, {"event", to_json(event)}};
}

json report_message(const dsl::SafetyReport& report, const ReportContext& context) {
  return {{"type", "report"},
          {"command", context.command},
          {"completion", context.completion},
          {"code", context.code},
          {"canonical", context.canonical},
          {"prompt", context.prompt},
          {"report", to_json(report)}};
}

json error_message(std::string_view reason, std::string_view detail) {
  json j = {{"type", "error"}, {"reason", std::string(reason)}};
  if (!detail.empty()) j["detail"] = std::string(detail);
  return j;
}

std::string serialize(const json& message) { return message.dump(); }

std::variant<SessionInput, SchemaError> parse_client_message(std::string_view text) {
  const json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) return SchemaError{"not valid JSON"};
  if (!j.is_object()) return SchemaError{"message must be a JSON object"};
  const auto type_it = j.find("type");
  if (type_it == j.end() || !type_it->is_string()) return SchemaError{"missing string member 'type'"};
  const std::string type = type_it->get<std::string>();

  if (type == "command") {
    const auto it = j.find("text");
    if (it == j.end() || !it->is_string()) return SchemaError{"command requires string 'text'"};
    return SessionInput{TextCommandInput{it->get<std::string>()}};
  }
  if (type == "interrupt") {
    const auto it = j.find("kind");
    if (it == j.end() || !it->is_string()) return SchemaError{"interrupt requires string 'kind'"};
    const std::string kind = it->get<std::string>();
    if (kind != "stop" && kind != "pause" && kind != "resume") {
      return SchemaError{"interrupt kind must be stop, pause or resume"};
    }
    return SessionInput{InterruptInput{kind}};
  }
  if (type == "config_set") {
    const auto key = j.find("key");
    const auto value = j.find("value");
    if (key == j.end() || !key->is_string() || value == j.end() || !value->is_number()) {
      return SchemaError{"config_set requires string 'key' and numeric 'value'"};
    }
    return SessionInput{ConfigSetInput{key->get<std::string>(), value->get<double>()}};
  }
  return SchemaError{"unsupported message type '" + type + "'"};
}

}  // namespace voicepilot::session::wire
