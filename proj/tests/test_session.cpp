#include <gtest/gtest.h>

#include <fstream>
#include <iterator>

#include "support.hpp"
#include "voicepilot/error.hpp"
#include "voicepilot/session/config.hpp"
#include "voicepilot/session/replay.hpp"
#include "voicepilot/session/session.hpp"
#include "voicepilot/session/wire.hpp"

using namespace voicepilot;
using namespace voicepilot::session;

namespace {

class RecordingCues : public CueSink {
 public:
  void play(CueKind, std::string_view text) override { played.emplace_back(text); }
  std::vector<std::string> played;
};

struct Harness {
  AppConfig config = load_config(vp_test::shipped_config());
  std::unique_ptr<speech::Transcriber> stt = make_transcriber(config, true);
  std::unique_ptr<llm::CompletionBackend> llm = make_completion_backend(config, true);
  RecordingCues cues;
  sim::Executor executor{config.robot};
  Session session{config, executor, Backends{*stt, *llm, cues}};
  std::vector<nlohmann::json> messages;

  Harness() {
    session.add_observer([this](const nlohmann::json& m) { messages.push_back(m); });
    session.start();
  }

  std::optional<std::string> say(const std::string& text) { return session.handle(TextCommandInput{text}); }

  void tick(int n = 1) {
    for (int i = 0; i < n; ++i) {
      executor.tick();
      session.pump();
    }
  }

  void settle() {
    for (int i = 0; i < 100000 && executor.state().exec_status == sim::ExecStatus::running; ++i) tick();
    tick();
  }

  std::vector<SessionEvent> robot_events(const std::string& kind = "") const {
    std::vector<SessionEvent> out;
    for (const auto& e : session.events()) {
      if (e.source == "robot" && (kind.empty() || e.kind == kind)) out.push_back(e);
    }
    return out;
  }

  std::vector<nlohmann::json> of_type(const std::string& type) const {
    std::vector<nlohmann::json> out;
    for (const auto& m : messages) {
      if (m["type"] == type) out.push_back(m);
    }
    return out;
  }
};

std::vector<std::uint8_t> fixture(const std::string& name) {
  std::ifstream in(vp_test::source_dir() / "config" / "audio" / name, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST(Config, ShippedConfigLoads) {
  const AppConfig c = load_config(vp_test::shipped_config());
  EXPECT_EQ(c.robot.bowls, (std::vector<std::string>{"blueberries", "granola", "yogurt", "empty"}));
  EXPECT_EQ(c.environment.bowl_contents[1], "granola");
  EXPECT_DOUBLE_EQ(c.pause.inter_bite_delay_s, 4.0);
  EXPECT_EQ(c.robot.tick_ms, 50);
  EXPECT_EQ(c.llm.history_cap, 20u);
  EXPECT_TRUE(std::filesystem::exists(c.llm.prompt_template));
  EXPECT_FALSE(c.cheat_sheet.empty());
}

TEST(Config, BadFilesAreConfigErrors) {
  const auto dir = std::filesystem::temp_directory_path() / "vp_config_test";
  std::filesystem::create_directories(dir);
  const auto write = [&](const std::string& body) {
    std::ofstream(dir / "c.json") << body;
    return dir / "c.json";
  };
  EXPECT_THROW(load_config(dir / "missing.json"), ConfigError);
  EXPECT_THROW(load_config(write("{")), ConfigError);
  EXPECT_THROW(load_config(write(R"({"schema_version": 2})")), ConfigError);
  EXPECT_THROW(load_config(write(R"({"schema_version": 1, "environment": {"bowls": ["a","b","c"]},
                                     "llm": {"prompt_template": "t.txt"}})")),
               ConfigError);
  EXPECT_THROW(load_config(write(R"({"schema_version": 1, "environment": {"bowls": ["a","b","c","d"]}})")),
               ConfigError);
  EXPECT_THROW(load_config(write(R"({"schema_version": 1, "environment": {"bowls": ["a","b","c","d"]},
                                     "pause": {"inter_bite_delay_s": -1},
                                     "llm": {"prompt_template": "t.txt"}})")),
               ConfigError);
}

TEST(Session, CueOrderForOneBite) {
  Harness h;
  EXPECT_FALSE(h.say("feed me a bite of bowl 1"));
  EXPECT_EQ(h.session.phase(), Phase::executing);
  h.settle();
  EXPECT_EQ(h.cues.played,
            (std::vector<std::string>{"beep", "Got it, processing", "Scooping now", "Ready for another command"}));
  EXPECT_EQ(h.session.phase(), Phase::awaiting_wake);
}

TEST(Session, RejectedCompletionNeverMoves) {
  Harness h;
  h.say("import os please");
  h.settle();
  EXPECT_TRUE(h.robot_events().empty());
  EXPECT_EQ(h.session.history()->size(), 0u);
  EXPECT_EQ(h.session.phase(), Phase::awaiting_wake);
  const auto reports = h.of_type("report");
  ASSERT_EQ(reports.size(), 1u);
  EXPECT_FALSE(reports[0]["report"]["accepted"].get<bool>());
  EXPECT_EQ(reports[0]["report"]["rejections"][0]["token"], "import");
  EXPECT_EQ(h.cues.played.back(), "Sorry, I couldn't do that");
}

TEST(Session, ProseCompletionIsNoCode) {
  Harness h;
  h.say("sing me a song");
  EXPECT_EQ(h.session.phase(), Phase::awaiting_wake);
  EXPECT_EQ(h.session.history()->size(), 0u);
  bool saw = false;
  for (const auto& e : h.session.events()) saw |= e.kind == "error" && e.detail.rfind("no_code", 0) == 0;
  EXPECT_TRUE(saw);
}

TEST(Session, SecondPromptContainsFirstExchange) {
  Harness h;
  h.say("scoop from bowl 2");
  h.settle();
  h.say("feed me a bite of bowl 0");
  EXPECT_NE(h.session.last_prompt().find("User: scoop from bowl 2\nobi.scoop_from_bowlno(2)"), std::string::npos);
}

TEST(Session, HistoryStoresClippedCanonicalCode) {
  Harness h;
  h.say("set speed to 9");
  h.settle();
  ASSERT_EQ(h.session.history()->size(), 1u);
  EXPECT_EQ(h.session.history()->entries()[0].generated_code, "obi.speed = 5");
  EXPECT_NEAR(h.executor.state().variables_native.speed, 1.0, 1e-12);
}

TEST(Session, FastPathStopSkipsTheModel) {
  Harness h;
  h.say("feed me two bites of bowl 1");
  h.tick(10);
  const auto calls = h.llm->calls();
  EXPECT_FALSE(h.say("stop"));
  h.tick();
  EXPECT_EQ(h.llm->calls(), calls);
  EXPECT_EQ(h.robot_events("stopped").size(), 1u);
  EXPECT_EQ(h.session.phase(), Phase::awaiting_wake);
  const auto before = h.robot_events().size();
  h.tick(400);
  EXPECT_EQ(h.robot_events().size(), before);
}

TEST(Session, PauseThenStartResumes) {
  Harness h;
  h.say("feed me a bite of bowl 1");
  h.tick(5);
  h.say("pause");
  h.tick();
  EXPECT_EQ(h.session.phase(), Phase::paused);
  h.say("start");
  h.tick();
  EXPECT_EQ(h.session.phase(), Phase::executing);
  EXPECT_EQ(h.robot_events("paused").size(), 1u);
  EXPECT_EQ(h.robot_events("resumed").size(), 1u);
  EXPECT_EQ(h.llm->calls(), 1u);
  h.settle();
  EXPECT_EQ(h.robot_events("program_done").size(), 1u);
}

TEST(Session, ControlWordWhileIdleIsNoop) {
  Harness h;
  h.say("stop");
  EXPECT_EQ(h.llm->calls(), 0u);
  EXPECT_EQ(h.cues.played.back(), "Nothing to do right now");
  EXPECT_EQ(h.session.phase(), Phase::awaiting_wake);
}

TEST(Session, OtherSpeechWhileBusyIsRefused) {
  Harness h;
  h.say("feed me a bite of bowl 1");
  h.tick(3);
  h.say("feed me a bite of bowl 2");
  EXPECT_EQ(h.llm->calls(), 1u);
  EXPECT_EQ(h.cues.played.back(), "I'm busy right now");
  EXPECT_EQ(h.session.phase(), Phase::executing);
}

TEST(Session, InterruptInputs) {
  Harness h;
  EXPECT_EQ(h.session.handle(InterruptInput{"stop"}), std::optional<std::string>("state"));
  h.say("feed me a bite of bowl 1");
  EXPECT_EQ(h.session.handle(InterruptInput{"resume"}), std::optional<std::string>("state"));
  EXPECT_FALSE(h.session.handle(InterruptInput{"pause"}));
  h.tick();
  EXPECT_FALSE(h.session.handle(InterruptInput{"stop"}));
  h.tick();
  EXPECT_EQ(h.robot_events("stopped").size(), 1u);
}

TEST(Session, ConfigSetChangesInsertedPause) {
  Harness h;
  EXPECT_EQ(h.session.handle(ConfigSetInput{"speed", 1}), std::optional<std::string>("unknown_key"));
  EXPECT_EQ(h.session.handle(ConfigSetInput{"inter_bite_delay_s", 100}), std::optional<std::string>("value"));
  EXPECT_FALSE(h.session.handle(ConfigSetInput{"inter_bite_delay_s", 6}));
  EXPECT_DOUBLE_EQ(h.session.view().pause.inter_bite_delay_s, 6.0);
  h.say("feed me two bites of bowl 1");
  const auto report = h.of_type("report").back();
  ASSERT_EQ(report["report"]["insertions"].size(), 1u);
  EXPECT_DOUBLE_EQ(report["report"]["insertions"][0]["inserted"]["seconds"].get<double>(), 2.0);
  EXPECT_NE(h.session.last_prompt().find("time.sleep(6)"), std::string::npos);
}

TEST(Session, UtteranceNeedsWake) {
  Harness h;
  speech::Utterance u;
  u.text_hint = "stop";
  EXPECT_EQ(h.session.handle(UtteranceInput{u}), std::optional<std::string>("no_wake"));
}

TEST(Session, AudioUtteranceIsTranscribed) {
  Harness h;
  h.session.handle(WakeInput{speech::WakeEvent{0, speech::WakeSource::push_to_talk}});
  EXPECT_EQ(h.session.phase(), Phase::capturing);
  speech::Utterance u;
  u.audio = fixture("feed_bowl1.bin");
  u.duration_ms = 1200;
  h.session.handle(UtteranceInput{u});
  EXPECT_EQ(h.session.phase(), Phase::executing);
  bool saw = false;
  for (const auto& e : h.session.events()) saw |= e.kind == "transcript" && e.detail == "feed me a bite of bowl 1";
  EXPECT_TRUE(saw);
}

TEST(Session, UnknownAudioIsAnError) {
  Harness h;
  h.session.handle(WakeInput{speech::WakeEvent{0, speech::WakeSource::push_to_talk}});
  speech::Utterance u;
  u.audio = fixture("noise.bin");
  h.session.handle(UtteranceInput{u});
  EXPECT_EQ(h.session.phase(), Phase::awaiting_wake);
  EXPECT_EQ(h.llm->calls(), 0u);
  EXPECT_EQ(h.session.events().back().kind, "cue");
  EXPECT_EQ(h.session.events().back().detail, "Sorry, I couldn't do that");
}

TEST(Session, SnapshotsCarryRobotAndHistory) {
  Harness h;
  h.say("scoop from bowl 2");
  h.settle();
  const auto snap = h.session.latest_snapshot();
  EXPECT_EQ(snap["type"], "snapshot");
  EXPECT_EQ(snap["session"]["phase"], "awaiting_wake");
  EXPECT_EQ(snap["session"]["history"][0]["code"], "obi.scoop_from_bowlno(2)");
  EXPECT_EQ(snap["robot"]["bowls"][2], "yogurt");
  EXPECT_EQ(snap["robot"]["arm_phase"], "at_bowl(2)");
  EXPECT_DOUBLE_EQ(snap["robot"]["variables_grounded"]["speed"].get<double>(), 2.5);
}

TEST(Session, EventsAreOrdered) {
  Harness h;
  h.say("feed me two bites of bowl 1");
  h.tick(30);
  h.say("pause");
  h.tick(4);
  h.say("resume");
  h.settle();
  const auto& ev = h.session.events();
  for (std::size_t i = 1; i < ev.size(); ++i) {
    EXPECT_EQ(ev[i].seq, ev[i - 1].seq + 1);
    EXPECT_GE(ev[i].t_ms, ev[i - 1].t_ms);
  }
}

TEST(Classify, SingleIntentKeywords) {
  EXPECT_EQ(classify_control_utterance("Stop!"), ControlIntent::stop);
  EXPECT_EQ(classify_control_utterance("okay obi, please wait"), ControlIntent::pause);
  EXPECT_EQ(classify_control_utterance("continue"), ControlIntent::resume);
  EXPECT_EQ(classify_control_utterance("stop and go"), ControlIntent::none);
  EXPECT_EQ(classify_control_utterance("feed me"), ControlIntent::none);
  EXPECT_EQ(classify_control_utterance(""), ControlIntent::none);
}

TEST(Script, ParsesAndRejects) {
  const auto lines = parse_script("# c\n0 command feed me\n\n100 interrupt stop\n100 ptt\n");
  ASSERT_EQ(lines.size(), 3u);
  EXPECT_EQ(lines[0].argument, "feed me");
  EXPECT_EQ(lines[1].verb, "interrupt");
  EXPECT_THROW(parse_script("x command a"), ConfigError);
  EXPECT_THROW(parse_script("10 dance"), ConfigError);
  EXPECT_THROW(parse_script("10 ptt\n5 ptt"), ConfigError);
}

TEST(Replay, SpokenInputRunsThroughListener) {
  const AppConfig config = load_config(vp_test::shipped_config());
  auto stt = make_transcriber(config, true);
  auto llm = make_completion_backend(config, true);
  std::vector<nlohmann::json> out;
  const auto outcome = run_replay(config,
                                  "0 say hey obi feed me a bite of bowl 0\n"
                                  "2000 say hey obi\n2100 audio audio/stop.bin 800\n",
                                  vp_test::source_dir() / "config", *stt, *llm,
                                  [&](const nlohmann::json& m) { out.push_back(m); });
  EXPECT_EQ(outcome.completion_calls, 1u);
  EXPECT_EQ(outcome.final_phase, Phase::awaiting_wake);
  bool stopped = false;
  for (const auto& e : outcome.events) stopped |= e.source == "robot" && e.kind == "stopped";
  EXPECT_TRUE(stopped);
}

TEST(Replay, RefusedInputsBecomeErrorMessages) {
  const AppConfig config = load_config(vp_test::shipped_config());
  auto stt = make_transcriber(config, true);
  auto llm = make_completion_backend(config, true);
  std::vector<nlohmann::json> errors;
  run_replay(config, "0 interrupt stop\n", {}, *stt, *llm, [&](const nlohmann::json& m) {
    if (m["type"] == "error") errors.push_back(m);
  });
  ASSERT_EQ(errors.size(), 1u);
  EXPECT_EQ(errors[0]["reason"], "state");
}
