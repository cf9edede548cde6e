#include "tgt/backend.hpp"

#include <gtest/gtest.h>

#include <atomic>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "tgt/errors.hpp"
#include "tgt/http_backend.hpp"
#include "tgt/mock_backend.hpp"
#include "tgt/mock_server.hpp"
#include "tgt/prompts.hpp"
#include "testutil.hpp"

using namespace tgt;
using backend::MockBackend;
using backend::MockScript;
using backend::QueryMeta;
using nlohmann::json;

namespace {

QueryMeta meta_for(const std::string& organ, int q, int round = 1, int attempt = 1,
                   const std::string& kind = "answer") {
  QueryMeta meta;
  meta.organ = organ;
  meta.question_index = q;
  meta.round = round;
  meta.attempt = attempt;
  meta.kind = kind;
  return meta;
}

}  // namespace

TEST(TokenEstimator, CeilOfQuarter) {
  EXPECT_EQ(backend::estimate_tokens(""), 0);
  EXPECT_EQ(backend::estimate_tokens("abc"), 1);
  EXPECT_EQ(backend::estimate_tokens("abcd"), 1);
  EXPECT_EQ(backend::estimate_tokens("abcde"), 2);
  EXPECT_EQ(backend::estimate_tokens(std::string(320, 'x')), 80);
}

TEST(MockBackend, ScriptedAnswerLookup) {
  MockScript script;
  script.answers["heart/0/1"] = "Normal size";
  MockBackend mock(script);
  const auto r1 = mock.answer({}, "Q?", meta_for("heart", 0));
  const auto r2 = mock.answer({}, "Q?", meta_for("heart", 0));
  EXPECT_EQ(r1.text, "Normal size");
  EXPECT_EQ(r2.text, r1.text);
  EXPECT_EQ(r1.completion_tokens, backend::estimate_tokens("Normal size"));
}

TEST(MockBackend, UnscriptedKeySynthesizedAndReplayStable) {
  MockBackend mock{MockScript{}};
  const auto a = mock.answer({}, "Q?", meta_for("lungs", 3, 2));
  const auto b = mock.answer({}, "Q?", meta_for("lungs", 3, 2));
  EXPECT_EQ(a.text, b.text);
  EXPECT_EQ(a.completion_tokens, b.completion_tokens);
  EXPECT_NE(a.text.find("lungs"), std::string::npos);
}

TEST(MockBackend, VerifyPlanRejectionsThenAccept) {
  MockScript script;
  script.verify_plan["heart/0"] = 2;
  MockBackend mock(script);
  EXPECT_FALSE(mock.verify({}, "Q?", "A", meta_for("heart", 0, 1, 1, "verify")).verified);
  EXPECT_FALSE(mock.verify({}, "Q?", "A", meta_for("heart", 0, 1, 2, "verify")).verified);
  EXPECT_TRUE(mock.verify({}, "Q?", "A", meta_for("heart", 0, 1, 3, "verify")).verified);
  // Rounds past the first always verify.
  EXPECT_TRUE(mock.verify({}, "Q?", "A", meta_for("heart", 0, 2, 1, "verify")).verified);
}

TEST(MockBackend, ReportTemplateRendersFirstAnswer) {
  MockScript script;
  script.report_templates["heart"] = "The {organ} looks fine: {first_answer}";
  MockBackend mock(script);
  knowledge::ExampleSet examples;
  examples.organ = "heart";
  const auto response = mock.generate_report({}, {{"Q1", "answer-one", 1}}, examples,
                                             meta_for("heart", -1, 1, 1, "report"));
  EXPECT_EQ(response.text, "The heart looks fine: answer-one");
}

TEST(MockBackend, EmptyExamplesElideBlockInPrompt) {
  MockBackend mock{MockScript{}};
  std::string captured;
  mock.set_prompt_capture([&](const QueryMeta&, const std::string& prompt) { captured = prompt; });
  knowledge::ExampleSet empty;
  empty.organ = "heart";
  mock.generate_report({}, {{"Q1", "A1", 1}}, empty, meta_for("heart", -1, 1, 1, "report"));
  EXPECT_EQ(captured.find("Example statements"), std::string::npos);
  EXPECT_NE(captured.find("Findings from the question-and-answer review:"), std::string::npos);
}

TEST(MockBackend, PromptContainsExactExampleAndQaLinesInOrder) {
  MockBackend mock{MockScript{}};
  std::string captured;
  mock.set_prompt_capture([&](const QueryMeta&, const std::string& prompt) { captured = prompt; });
  knowledge::ExampleSet examples;
  examples.organ = "lungs";
  for (int i = 0; i < 5; ++i) examples.examples.push_back("Example sentence " + std::to_string(i));
  std::vector<backend::QaPair> qa;
  for (int i = 0; i < 7; ++i)
    qa.push_back({"Question " + std::to_string(i), "Answer " + std::to_string(i), 1});
  mock.generate_report({}, qa, examples, meta_for("lungs", -1, 1, 1, "report"));

  std::size_t example_lines = 0;
  std::size_t qa_lines = 0;
  std::size_t last_pos = 0;
  for (int i = 1; i <= 5; ++i) {
    const auto pos = captured.find(std::to_string(i) + ". Example sentence " + std::to_string(i - 1));
    ASSERT_NE(pos, std::string::npos);
    EXPECT_GT(pos, last_pos);
    last_pos = pos;
    ++example_lines;
  }
  for (int i = 1; i <= 7; ++i) {
    const auto pos = captured.find("Q" + std::to_string(i) + ": Question " + std::to_string(i - 1));
    ASSERT_NE(pos, std::string::npos);
    EXPECT_GT(pos, last_pos);
    last_pos = pos;
    ++qa_lines;
  }
  EXPECT_EQ(example_lines, 5u);
  EXPECT_EQ(qa_lines, 7u);
}

// Prompt injectivity: distinct QA lists must yield distinct prompts.
TEST(Prompts, DistinctQaListsDistinctPrompts) {
  const auto templates = prompts::default_templates();
  knowledge::ExampleSet examples;
  examples.organ = "heart";
  const auto p1 = prompts::render_report(templates, "heart", {{"Qa", "Ab", 1}}, examples);
  const auto p2 = prompts::render_report(templates, "heart", {{"Qa", "Ac", 1}}, examples);
  const auto p3 = prompts::render_report(templates, "heart", {{"Qa", "Ab", 1}, {"Qb", "Ac", 1}},
                                         examples);
  EXPECT_NE(p1, p2);
  EXPECT_NE(p1, p3);
  EXPECT_NE(p2, p3);
}

TEST(ParseAffirmative, PrefixRule) {
  EXPECT_TRUE(backend::parse_affirmative("yes"));
  EXPECT_TRUE(backend::parse_affirmative("Yes, the answer is consistent."));
  EXPECT_TRUE(backend::parse_affirmative("  YES."));
  EXPECT_FALSE(backend::parse_affirmative("No."));
  EXPECT_FALSE(backend::parse_affirmative("maybe yes"));
  EXPECT_FALSE(backend::parse_affirmative(""));
}

TEST(Base64, Rfc4648Vectors) {
  EXPECT_EQ(backend::base64_encode(""), "");
  EXPECT_EQ(backend::base64_encode("f"), "Zg==");
  EXPECT_EQ(backend::base64_encode("fo"), "Zm8=");
  EXPECT_EQ(backend::base64_encode("foo"), "Zm9v");
  EXPECT_EQ(backend::base64_encode("foob"), "Zm9vYg==");
  EXPECT_EQ(backend::base64_encode("fooba"), "Zm9vYmE=");
  EXPECT_EQ(backend::base64_encode("foobar"), "Zm9vYmFy");
}

namespace {

// Bare httplib stub returning a fixed body; independent of MockServer.
class FixedStub {
 public:
  explicit FixedStub(std::string body, int fail_first = 0, int status = 200)
      : body_(std::move(body)), fail_remaining_(fail_first), status_(status) {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req,
                                                httplib::Response& res) {
      last_request_body_ = req.body;
      auto it = req.headers.find("Authorization");
      last_auth_ = it == req.headers.end() ? "" : it->second;
      if (fail_remaining_ > 0) {
        --fail_remaining_;
        res.status = 503;
        res.set_content("overloaded", "text/plain");
        return;
      }
      res.status = status_;
      res.set_content(body_, "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~FixedStub() {
    server_.stop();
    thread_.join();
  }

  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }
  std::string last_request_body() const { return last_request_body_; }
  std::string last_auth() const { return last_auth_; }

 private:
  std::string body_;
  std::atomic<int> fail_remaining_;
  int status_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::string last_request_body_;
  std::string last_auth_;
};

backend::BackendConfig quick_config(const std::string& url) {
  backend::BackendConfig cfg;
  cfg.base_url = url;
  cfg.retry_max = 2;
  cfg.backoff_base_ms = 10;
  cfg.timeout_s = 5;
  return cfg;
}

}  // namespace

TEST(HttpBackend, ParsesFirstChoiceContent) {
  const json body{{"choices", json::array({json{{"message", {{"role", "assistant"},
                                                             {"content", "stub text"}}}}})},
                  {"usage", {{"prompt_tokens", 11}, {"completion_tokens", 7}}}};
  FixedStub stub(body.dump());
  backend::HttpBackend client(quick_config(stub.url()));
  const auto response = client.answer({}, "What about the heart?", meta_for("heart", 0));
  EXPECT_EQ(response.text, "stub text");
  EXPECT_EQ(response.prompt_tokens, 11);
  EXPECT_EQ(response.completion_tokens, 7);
  EXPECT_FALSE(response.estimated);
}

TEST(HttpBackend, MissingUsageFallsBackToEstimator) {
  const json body{
      {"choices", json::array({json{{"message", {{"role", "assistant"}, {"content", "abcdefgh"}}}}})}};
  FixedStub stub(body.dump());
  backend::HttpBackend client(quick_config(stub.url()));
  const auto response = client.answer({}, "Q?", meta_for("heart", 0));
  EXPECT_TRUE(response.estimated);
  EXPECT_EQ(response.completion_tokens, 2);  // ceil(8/4)
}

TEST(HttpBackend, RetriesTransientServerErrors) {
  const json body{
      {"choices", json::array({json{{"message", {{"role", "assistant"}, {"content", "ok"}}}}})}};
  FixedStub stub(body.dump(), /*fail_first=*/2);
  backend::HttpBackend client(quick_config(stub.url()));
  EXPECT_EQ(client.answer({}, "Q?", meta_for("heart", 0)).text, "ok");
}

TEST(HttpBackend, ExhaustsRetriesToTransportError) {
  FixedStub stub("irrelevant", /*fail_first=*/100);
  backend::HttpBackend client(quick_config(stub.url()));
  EXPECT_THROW(client.answer({}, "Q?", meta_for("heart", 0)), TransportError);
}

TEST(HttpBackend, MalformedBodyIsProtocolError) {
  FixedStub stub("this is not json");
  backend::HttpBackend client(quick_config(stub.url()));
  EXPECT_THROW(client.answer({}, "Q?", meta_for("heart", 0)), ProtocolError);
}

TEST(HttpBackend, VerifyParsesAffirmativePrefix) {
  const json yes{{"choices", json::array({json{{"message", {{"role", "assistant"},
                                                            {"content",
                                                             "Yes, the answer is consistent."}}}}})}};
  FixedStub stub(yes.dump());
  backend::HttpBackend client(quick_config(stub.url()));
  EXPECT_TRUE(client.verify({}, "Q?", "A", meta_for("heart", 0, 1, 1, "verify")).verified);
}

TEST(HttpBackend, VerifyParsesNegativePrefix) {
  const json no{{"choices",
                 json::array({json{{"message", {{"role", "assistant"}, {"content", "No."}}}}})}};
  FixedStub stub(no.dump());
  backend::HttpBackend client(quick_config(stub.url()));
  EXPECT_FALSE(client.verify({}, "Q?", "A", meta_for("heart", 0, 1, 1, "verify")).verified);
}

TEST(HttpBackend, SendsBearerTokenAndImageParts) {
  const json body{
      {"choices", json::array({json{{"message", {{"role", "assistant"}, {"content", "ok"}}}}})}};
  FixedStub stub(body.dump());
  setenv("TGT_API_KEY", "secret-key", 1);
  tgt::test::TempDir tmp;
  tgt::test::write_file(tmp.file("img.png"), "fakepng");
  backend::HttpBackend client(quick_config(stub.url()));
  client.answer({tmp.file("img.png").string()}, "Q?", meta_for("heart", 0));
  unsetenv("TGT_API_KEY");

  EXPECT_EQ(stub.last_auth(), "Bearer secret-key");
  const auto request = json::parse(stub.last_request_body());
  const auto& content = request["messages"][0]["content"];
  ASSERT_TRUE(content.is_array());
  EXPECT_EQ(content[0]["type"], "text");
  EXPECT_EQ(content[1]["type"], "image_url");
  const std::string url = content[1]["image_url"]["url"].get<std::string>();
  EXPECT_EQ(url.rfind("data:image/png;base64,", 0), 0u);
  EXPECT_NE(url.find(backend::base64_encode("fakepng")), std::string::npos);
}

TEST(HttpBackend, MissingImageIsImageLoadError) {
  FixedStub stub("{}");
  backend::HttpBackend client(quick_config(stub.url()));
  EXPECT_THROW(client.answer({"/nonexistent/image.png"}, "Q?", meta_for("heart", 0)),
               ImageLoadError);
}

// Wire round trip through the reconstructing stub: scripted entries must come
// back byte-identical to the in-process mock.
TEST(MockServer, ScriptedAnswerOverWire) {
  MockScript script;
  script.answers["heart/1/1"] = "scripted wire answer";
  script.verify_plan["heart/1"] = 1;

  const auto organs = knowledge::default_alias_table();
  const auto bank = knowledge::default_question_bank(organs);
  const auto question = bank.questions.at("heart")[1];
  backend::MockServer::Options options;
  options.script = script;
  options.bank = bank;
  backend::MockServer server(std::move(options));
  const int port = server.start();

  backend::HttpBackend client(quick_config("http://127.0.0.1:" + std::to_string(port)));

  MockBackend in_process(script);
  const auto wire = client.answer({}, question, meta_for("heart", 1));
  const auto local = in_process.answer({}, question, meta_for("heart", 1));
  EXPECT_EQ(wire.text, local.text);
  EXPECT_EQ(wire.completion_tokens, local.completion_tokens);
  EXPECT_EQ(wire.prompt_tokens, local.prompt_tokens);

  // verify plan: first call rejected, second accepted, matching in-process.
  EXPECT_FALSE(client.verify({}, question, wire.text, meta_for("heart", 1, 1, 1, "verify")).verified);
  EXPECT_TRUE(client.verify({}, question, wire.text, meta_for("heart", 1, 1, 2, "verify")).verified);
  server.stop();
}

TEST(MockServer, OmittedUsageExercisesClientEstimator) {
  backend::MockServer::Options options;
  options.bank = knowledge::default_question_bank(knowledge::default_alias_table());
  options.include_usage = false;
  backend::MockServer server(std::move(options));
  const int port = server.start();
  backend::HttpBackend client(quick_config("http://127.0.0.1:" + std::to_string(port)));
  const auto question = knowledge::default_question_bank(knowledge::default_alias_table())
                            .questions.at("lungs")[0];
  const auto response = client.answer({}, question, meta_for("lungs", 0));
  EXPECT_TRUE(response.estimated);
  EXPECT_EQ(response.completion_tokens, backend::estimate_tokens(response.text));
  server.stop();
}
