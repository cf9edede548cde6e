#pragma once

#include <memory>
#include <string>

#include "tgt/knowledge.hpp"
#include "tgt/mock_backend.hpp"
#include "tgt/prompts.hpp"

namespace tgt::backend {

// Chat-protocol stub that replays a MockScript over HTTP so the real wire
// client can be exercised end to end. Incoming prompts are parsed back into
// (kind, organ, question slot, round) using the server's own copies of the
// templates and question bank; replies are byte-identical to the in-process
// MockBackend for the same traversal.
//
// Limitation: degrade_with_displacement needs the organ's graph position,
// which is not on the wire; that knob only works in-process.
class MockServer {
 public:
  struct Options {
    MockScript script;
    prompts::PromptTemplates templates = prompts::default_templates();
    knowledge::QuestionBank bank;
    std::size_t question_limit = 7;
    std::string follow_up_template =
        "Regarding {organ}: your earlier answer was '{answer}'. "
        "What additional findings refine or contradict this?";
    int max_rounds = 16;       // search bound for follow-up round reconstruction
    bool include_usage = true; // false exercises the client's token estimator
  };

  explicit MockServer(Options options);
  ~MockServer();

  // Binds (port 0 picks an ephemeral one), serves on a background thread,
  // returns the bound port.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  void stop();
  int port() const;

  // Exposed for unit tests: body-in, body-out of one chat completion.
  std::string handle_chat_completion(const std::string& request_body);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace tgt::backend
