#include "tgt/http_backend.hpp"

#include <cctype>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <semaphore>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "tgt/errors.hpp"
#include "tgt/text.hpp"

namespace tgt::backend {

using nlohmann::json;

bool parse_affirmative(const std::string& reply) {
  std::size_t start = 0;
  while (start < reply.size() && std::isspace(static_cast<unsigned char>(reply[start]))) ++start;
  const std::string head = text::to_lower(reply.substr(start, 3));
  return head == "yes";
}

std::string base64_encode(std::string_view bytes) {
  static const char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  while (i + 3 <= bytes.size()) {
    const unsigned v = (static_cast<unsigned char>(bytes[i]) << 16) |
                       (static_cast<unsigned char>(bytes[i + 1]) << 8) |
                       static_cast<unsigned char>(bytes[i + 2]);
    out.push_back(kAlphabet[(v >> 18) & 63]);
    out.push_back(kAlphabet[(v >> 12) & 63]);
    out.push_back(kAlphabet[(v >> 6) & 63]);
    out.push_back(kAlphabet[v & 63]);
    i += 3;
  }
  const std::size_t rest = bytes.size() - i;
  if (rest == 1) {
    const unsigned v = static_cast<unsigned char>(bytes[i]) << 16;
    out.push_back(kAlphabet[(v >> 18) & 63]);
    out.push_back(kAlphabet[(v >> 12) & 63]);
    out.append("==");
  } else if (rest == 2) {
    const unsigned v = (static_cast<unsigned char>(bytes[i]) << 16) |
                       (static_cast<unsigned char>(bytes[i + 1]) << 8);
    out.push_back(kAlphabet[(v >> 18) & 63]);
    out.push_back(kAlphabet[(v >> 12) & 63]);
    out.push_back(kAlphabet[(v >> 6) & 63]);
    out.push_back('=');
  }
  return out;
}

namespace {

std::string mime_for(const std::string& path) {
  auto ends_with = [&](const char* suffix) {
    const std::string lowered = text::to_lower(path);
    const std::string s = suffix;
    return lowered.size() >= s.size() && lowered.compare(lowered.size() - s.size(), s.size(), s) == 0;
  };
  if (ends_with(".jpg") || ends_with(".jpeg")) return "image/jpeg";
  if (ends_with(".gif")) return "image/gif";
  if (ends_with(".webp")) return "image/webp";
  return "image/png";
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageLoadError("cannot read image: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

struct ParsedUrl {
  std::string origin;  // scheme://host:port for httplib::Client
  std::string prefix;  // path prefix before /v1/...
};

ParsedUrl parse_base_url(const std::string& base_url) {
  const auto scheme_end = base_url.find("://");
  if (scheme_end == std::string::npos)
    throw ConfigError("base_url must include a scheme: " + base_url);
  const auto path_start = base_url.find('/', scheme_end + 3);
  ParsedUrl out;
  if (path_start == std::string::npos) {
    out.origin = base_url;
  } else {
    out.origin = base_url.substr(0, path_start);
    out.prefix = base_url.substr(path_start);
    while (!out.prefix.empty() && out.prefix.back() == '/') out.prefix.pop_back();
  }
  return out;
}

}  // namespace

struct HttpBackend::Impl {
  BackendConfig config;
  prompts::PromptTemplates templates;
  ParsedUrl url;
  std::string api_key;
  PromptCapture capture;
  std::counting_semaphore<4096> in_flight;

  Impl(BackendConfig cfg, prompts::PromptTemplates tmpl)
      : config(std::move(cfg)),
        templates(std::move(tmpl)),
        url(parse_base_url(config.base_url)),
        in_flight(std::max(config.max_concurrent_requests, 1)) {
    if (const char* key = std::getenv(config.api_key_env.c_str())) api_key = key;
  }

  BackendResponse complete(const std::string& prompt, const std::vector<std::string>& images,
                           double temperature, const QueryMeta& meta) {
    if (capture) capture(meta, prompt);

    json content;
    if (images.empty()) {
      content = prompt;
    } else {
      content = json::array();
      content.push_back({{"type", "text"}, {"text", prompt}});
      for (const auto& ref : images) {
        const std::string url_field =
            "data:" + mime_for(ref) + ";base64," + base64_encode(read_file(ref));
        content.push_back({{"type", "image_url"}, {"image_url", {{"url", url_field}}}});
      }
    }
    json body{{"model", config.model_name},
              {"max_tokens", config.max_output_tokens},
              {"temperature", temperature},
              {"messages", json::array({json{{"role", "user"}, {"content", content}}})}};
    const std::string payload = body.dump();

    in_flight.acquire();
    struct Release {
      std::counting_semaphore<4096>& sem;
      ~Release() { sem.release(); }
    } release{in_flight};

    std::string last_error;
    for (int attempt = 0; attempt <= config.retry_max; ++attempt) {
      if (attempt > 0) {
        std::this_thread::sleep_for(
            std::chrono::milliseconds(config.backoff_base_ms * (1L << (attempt - 1))));
      }
      httplib::Client client(url.origin);
      client.set_connection_timeout(config.timeout_s, 0);
      client.set_read_timeout(config.timeout_s, 0);
      client.set_write_timeout(config.timeout_s, 0);
      httplib::Headers headers;
      if (!api_key.empty()) headers.emplace("Authorization", "Bearer " + api_key);

      const auto t0 = std::chrono::steady_clock::now();
      auto res = client.Post(url.prefix + "/v1/chat/completions", headers, payload,
                             "application/json");
      const double elapsed_ms =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();

      if (!res) {
        last_error = "transport: " + httplib::to_string(res.error());
        continue;
      }
      if (res->status == 429 || res->status >= 500) {
        last_error = "server status " + std::to_string(res->status);
        continue;
      }
      if (res->status != 200)
        throw TransportError("chat completion failed with status " + std::to_string(res->status) +
                             ": " + res->body);

      json reply;
      try {
        reply = json::parse(res->body);
      } catch (const json::parse_error& e) {
        throw ProtocolError(std::string("unparseable response body: ") + e.what());
      }
      if (!reply.contains("choices") || !reply["choices"].is_array() || reply["choices"].empty())
        throw ProtocolError("response has no choices");
      const auto& message = reply["choices"][0];
      if (!message.contains("message") || !message["message"].contains("content"))
        throw ProtocolError("response choice has no message content");

      BackendResponse out;
      out.text = message["message"]["content"].get<std::string>();
      out.latency_ms = elapsed_ms;
      if (reply.contains("usage") && reply["usage"].contains("completion_tokens")) {
        out.prompt_tokens = reply["usage"].value("prompt_tokens", 0L);
        out.completion_tokens = reply["usage"]["completion_tokens"].get<long>();
      } else {
        out.prompt_tokens = estimate_tokens(prompt);
        out.completion_tokens = estimate_tokens(out.text);
        out.estimated = true;
      }
      return out;
    }
    throw TransportError("chat completion failed after " + std::to_string(config.retry_max + 1) +
                         " attempts: " + last_error);
  }
};

HttpBackend::HttpBackend(BackendConfig config, prompts::PromptTemplates templates)
    : impl_(std::make_unique<Impl>(std::move(config), std::move(templates))) {}

HttpBackend::~HttpBackend() = default;

void HttpBackend::set_prompt_capture(PromptCapture capture) {
  impl_->capture = std::move(capture);
}

BackendResponse HttpBackend::answer(const std::vector<std::string>& images,
                                    const std::string& question, const QueryMeta& meta) {
  if (question.empty()) throw Error("question must be nonempty");
  return impl_->complete(prompts::render_answer(impl_->templates, question), images,
                         impl_->config.temperature_answer, meta);
}

VerifyResult HttpBackend::verify(const std::vector<std::string>& images,
                                 const std::string& question, const std::string& answer,
                                 const QueryMeta& meta) {
  if (answer.empty()) throw Error("answer must be nonempty");
  const std::string prompt =
      meta.kind == "report_verify"
          ? prompts::render_report_verify(impl_->templates, meta.organ, question, answer)
          : prompts::render_verify(impl_->templates, question, answer);
  VerifyResult out;
  out.response = impl_->complete(prompt, images, impl_->config.temperature_verify, meta);
  out.verified = parse_affirmative(out.response.text);
  return out;
}

BackendResponse HttpBackend::generate_report(const std::vector<std::string>& images,
                                             const std::vector<QaPair>& qa_pairs,
                                             const knowledge::ExampleSet& examples,
                                             const QueryMeta& meta) {
  if (qa_pairs.empty()) throw Error("qa_pairs must be nonempty");
  return impl_->complete(prompts::render_report(impl_->templates, meta.organ, qa_pairs, examples),
                         images, impl_->config.temperature_report, meta);
}

BackendResponse HttpBackend::extract(const std::string& report, const QueryMeta& meta) {
  return impl_->complete(prompts::render_extract(impl_->templates, report), {}, 0.0, meta);
}

}  // namespace tgt::backend
