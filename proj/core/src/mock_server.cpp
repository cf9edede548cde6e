#include "tgt/mock_server.hpp"

#include <atomic>
#include <cctype>
#include <map>
#include <mutex>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "tgt/errors.hpp"

namespace tgt::backend {

using nlohmann::json;

namespace {

struct TemplateSegments {
  std::vector<std::string> literals;      // literals.size() == placeholders.size() + 1
  std::vector<std::string> placeholders;  // in template order
};

TemplateSegments split_template(const std::string& tmpl) {
  TemplateSegments out;
  std::string literal;
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    const auto open = tmpl.find('{', pos);
    if (open == std::string::npos) {
      literal += tmpl.substr(pos);
      break;
    }
    const auto close = tmpl.find('}', open);
    if (close == std::string::npos) {
      literal += tmpl.substr(pos);
      break;
    }
    literal += tmpl.substr(pos, open - pos);
    out.literals.push_back(literal);
    literal.clear();
    out.placeholders.push_back(tmpl.substr(open + 1, close - open - 1));
    pos = close + 1;
  }
  out.literals.push_back(literal);
  return out;
}

// Sequential literal matching; each capture runs to the first occurrence of
// the next literal. First capture wins for repeated placeholder names.
bool parse_against(const TemplateSegments& segs, const std::string& prompt,
                   std::map<std::string, std::string>& captures) {
  std::size_t pos = 0;
  if (prompt.compare(0, segs.literals[0].size(), segs.literals[0]) != 0) return false;
  pos = segs.literals[0].size();
  for (std::size_t i = 0; i < segs.placeholders.size(); ++i) {
    const std::string& next_literal = segs.literals[i + 1];
    std::size_t end;
    if (next_literal.empty()) {
      end = prompt.size();
    } else {
      end = prompt.find(next_literal, pos);
      if (end == std::string::npos) return false;
    }
    captures.emplace(segs.placeholders[i], prompt.substr(pos, end - pos));
    pos = end + next_literal.size();
  }
  return true;
}

}  // namespace

struct MockServer::Impl {
  Options options;
  MockBackend mock;
  TemplateSegments answer_segs;
  TemplateSegments verify_segs;
  TemplateSegments report_segs;
  TemplateSegments report_verify_segs;
  TemplateSegments extract_segs;
  TemplateSegments follow_up_segs;
  std::map<std::string, std::vector<std::string>> round1_questions;  // organ -> prefix list
  std::string examples_header_prefix;

  std::mutex state_mutex;
  std::map<std::string, int> verify_calls;         // "organ/q" -> count (round-1 loop)
  std::map<std::string, int> report_verify_calls;  // organ -> count
  std::map<std::string, int> follow_up_calls;      // organ|prior_answer|kind -> count

  httplib::Server server;
  std::thread serve_thread;
  int bound_port = 0;

  explicit Impl(Options opts)
      : options(std::move(opts)),
        mock(options.script, options.templates),
        answer_segs(split_template(options.templates.answer)),
        verify_segs(split_template(options.templates.verify)),
        report_segs(split_template(options.templates.report)),
        report_verify_segs(split_template(options.templates.report_verify)),
        extract_segs(split_template(options.templates.extract)),
        follow_up_segs(split_template(options.follow_up_template)) {
    for (const auto& [organ, questions] : options.bank.questions) {
      const std::size_t n = std::min(options.question_limit, questions.size());
      round1_questions[organ] = {questions.begin(),
                                 questions.begin() + static_cast<std::ptrdiff_t>(n)};
    }
  }

  struct ResolvedQuestion {
    std::string organ;
    int question_index = -1;
    int round = 1;
    bool ok = false;
  };

  ResolvedQuestion resolve_question(const std::string& question, const std::string& kind) {
    ResolvedQuestion out;
    for (const auto& [organ, questions] : round1_questions) {
      for (std::size_t i = 0; i < questions.size(); ++i) {
        if (questions[i] == question) {
          out.organ = organ;
          out.question_index = static_cast<int>(i);
          out.round = 1;
          out.ok = true;
          return out;
        }
      }
    }
    // Follow-up text embeds the organ and the prior answer; the prior answer
    // identifies (slot, round) because this server generated it.
    std::map<std::string, std::string> captures;
    if (!parse_against(follow_up_segs, question, captures)) return out;
    const std::string organ = captures["organ"];
    const std::string prior = captures["answer"];
    auto bank_it = round1_questions.find(organ);
    if (bank_it == round1_questions.end()) return out;

    std::vector<std::pair<int, int>> candidates;  // (round, slot)
    for (int round = 2; round <= options.max_rounds; ++round) {
      for (std::size_t i = 0; i < bank_it->second.size(); ++i) {
        QueryMeta meta;
        meta.organ = organ;
        meta.question_index = static_cast<int>(i);
        meta.round = round - 1;
        if (mock.answer_text(meta) == prior) candidates.emplace_back(round, static_cast<int>(i));
      }
    }
    if (candidates.empty()) return out;
    std::size_t pick = 0;
    if (candidates.size() > 1) {
      // Identical prior answers across slots: calls arrive in slot order, so a
      // per-(organ, prior, kind) counter disambiguates.
      std::lock_guard lock(state_mutex);
      auto& count = follow_up_calls[organ + "\x1f" + prior + "\x1f" + kind];
      pick = std::min(static_cast<std::size_t>(count), candidates.size() - 1);
      ++count;
    }
    out.organ = organ;
    out.round = candidates[pick].first;
    out.question_index = candidates[pick].second;
    out.ok = true;
    return out;
  }

  json reply_for(const std::string& prompt) {
    std::map<std::string, std::string> captures;

    if (parse_against(answer_segs, prompt, captures)) {
      const std::string question = captures["question"];
      auto resolved = resolve_question(question, "answer");
      QueryMeta meta;
      if (resolved.ok) {
        meta.organ = resolved.organ;
        meta.question_index = resolved.question_index;
        meta.round = resolved.round;
      }
      return make_body(prompt, mock.answer_text(meta));
    }

    captures.clear();
    if (parse_against(report_verify_segs, prompt, captures)) {
      const std::string organ = captures["organ"];
      int attempt;
      {
        std::lock_guard lock(state_mutex);
        attempt = ++report_verify_calls[organ];
      }
      QueryMeta meta;
      meta.organ = organ;
      meta.kind = "report_verify";
      meta.attempt = attempt;
      return make_body(prompt, mock.verify_verdict(meta) ? "yes." : "no.");
    }

    captures.clear();
    if (parse_against(verify_segs, prompt, captures)) {
      const std::string question = captures["question"];
      auto resolved = resolve_question(question, "verify");
      bool verdict = true;
      if (resolved.ok && resolved.round == 1) {
        int attempt;
        {
          std::lock_guard lock(state_mutex);
          attempt = ++verify_calls[resolved.organ + "/" + std::to_string(resolved.question_index)];
        }
        QueryMeta meta;
        meta.organ = resolved.organ;
        meta.question_index = resolved.question_index;
        meta.round = 1;
        meta.attempt = attempt;
        meta.kind = "verify";
        verdict = mock.verify_verdict(meta);
      }
      return make_body(prompt, verdict ? "yes." : "no.");
    }

    captures.clear();
    if (parse_against(report_segs, prompt, captures)) {
      const std::string organ = captures["organ"];
      const std::string qa_block = captures["qa_block"];
      const std::string examples_block = captures["examples_block"];

      std::vector<QaPair> qa_pairs;
      std::string first_answer;
      bool has_follow_up = false;
      std::size_t line_start = 0;
      const auto follow_up_head = follow_up_segs.literals[0];
      while (line_start < qa_block.size()) {
        auto line_end = qa_block.find('\n', line_start);
        if (line_end == std::string::npos) line_end = qa_block.size();
        const std::string line = qa_block.substr(line_start, line_end - line_start);
        line_start = line_end + 1;
        if (line.rfind("A1: ", 0) == 0) first_answer = line.substr(4);
        const auto colon = line.find(": ");
        if (line.rfind("Q", 0) == 0 && colon != std::string::npos &&
            line.compare(colon + 2, follow_up_head.size(), follow_up_head) == 0)
          has_follow_up = true;
      }
      qa_pairs.push_back({"", first_answer, 1});
      if (has_follow_up) qa_pairs.push_back({"", "", 2});

      knowledge::ExampleSet examples;
      examples.organ = organ;
      line_start = 0;
      while (line_start < examples_block.size()) {
        auto line_end = examples_block.find('\n', line_start);
        if (line_end == std::string::npos) line_end = examples_block.size();
        const std::string line = examples_block.substr(line_start, line_end - line_start);
        line_start = line_end + 1;
        std::size_t d = 0;
        while (d < line.size() && std::isdigit(static_cast<unsigned char>(line[d]))) ++d;
        if (d > 0 && line.compare(d, 2, ". ") == 0) examples.examples.push_back(line.substr(d + 2));
      }
      examples.k = examples.examples.size();

      QueryMeta meta;
      meta.organ = organ;
      meta.kind = "report";
      return make_body(prompt, mock.report_text(qa_pairs, examples, meta));
    }

    captures.clear();
    if (parse_against(extract_segs, prompt, captures))
      return make_body(prompt, mock.extract_text(captures["report"]));

    throw ProtocolError("mock server could not classify prompt");
  }

  json make_body(const std::string& prompt, const std::string& text) const {
    json body{{"id", "mock"},
              {"object", "chat.completion"},
              {"choices", json::array({json{{"index", 0},
                                            {"message", {{"role", "assistant"}, {"content", text}}},
                                            {"finish_reason", "stop"}}})}};
    if (options.include_usage) {
      body["usage"] = {{"prompt_tokens", estimate_tokens(prompt)},
                       {"completion_tokens", estimate_tokens(text)},
                       {"total_tokens", estimate_tokens(prompt) + estimate_tokens(text)}};
    }
    return body;
  }

  std::string handle(const std::string& request_body) {
    json request;
    try {
      request = json::parse(request_body);
    } catch (const json::parse_error& e) {
      return json{{"error", std::string("bad request: ") + e.what()}}.dump();
    }
    std::string prompt;
    if (request.contains("messages")) {
      for (const auto& message : request["messages"]) {
        if (message.value("role", "") != "user") continue;
        const auto& content = message["content"];
        if (content.is_string()) {
          prompt = content.get<std::string>();
        } else if (content.is_array()) {
          prompt.clear();
          for (const auto& part : content)
            if (part.value("type", "") == "text") prompt += part.value("text", "");
        }
      }
    }
    try {
      return reply_for(prompt).dump();
    } catch (const std::exception& e) {
      return json{{"error", e.what()}}.dump();
    }
  }
};

MockServer::MockServer(Options options) : impl_(std::make_unique<Impl>(std::move(options))) {}

MockServer::~MockServer() { stop(); }

std::string MockServer::handle_chat_completion(const std::string& request_body) {
  return impl_->handle(request_body);
}

int MockServer::start(const std::string& host, int port) {
  impl_->server.Post("/v1/chat/completions",
                     [this](const httplib::Request& req, httplib::Response& res) {
                       res.set_content(impl_->handle(req.body), "application/json");
                     });
  if (port == 0) {
    impl_->bound_port = impl_->server.bind_to_any_port(host);
  } else {
    if (!impl_->server.bind_to_port(host, port))
      throw TransportError("cannot bind " + host + ":" + std::to_string(port));
    impl_->bound_port = port;
  }
  impl_->serve_thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return impl_->bound_port;
}

void MockServer::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
  if (impl_ && impl_->serve_thread.joinable()) impl_->serve_thread.join();
}

int MockServer::port() const { return impl_->bound_port; }

}  // namespace tgt::backend
