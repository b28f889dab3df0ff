#pragma once

#include <string>
#include <string_view>
#include <variant>

#include <nlohmann/json.hpp>

#include "voicepilot/dsl/validator.hpp"
#include "voicepilot/session/session.hpp"

// Wire schema. Every message is a JSON object with a "type" member:
//
//   server -> client: snapshot, event, report, error
//   client -> server: command, interrupt, config_set
//
// Objects serialize with sorted keys so output is byte-stable. The layout
// is documented in docs/wire_protocol.md and frozen by tests/golden.
namespace voicepilot::session::wire {

inline constexpr int kProtocolVersion = 1;

nlohmann::json to_json(const dsl::SafetyReport& report);
nlohmann::json to_json(const SessionEvent& event);
nlohmann::json to_json(const sim::RobotState& robot, const dsl::VariableSpec& spec);

nlohmann::json snapshot_message(const SessionView& view);
nlohmann::json event_message(const SessionEvent& event);

struct ReportContext {
  std::string command;
  std::string completion;  // raw model text
  std::string code;        // extracted candidate code
  std::string canonical;   // pretty-printed validated program, empty on rejection
  std::string prompt;
};
nlohmann::json report_message(const dsl::SafetyReport& report, const ReportContext& context);
nlohmann::json error_message(std::string_view reason, std::string_view detail = {});

std::string serialize(const nlohmann::json& message);

struct SchemaError {
  std::string detail;
};
// Decodes a client -> server message.
std::variant<SessionInput, SchemaError> parse_client_message(std::string_view text);

}  // namespace voicepilot::session::wire
