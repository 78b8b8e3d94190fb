#include <httplib.h>

#include "tag2cred/net.hpp"

#include <algorithm>
#include <cctype>

#include "tag2cred/error.hpp"

namespace tag2cred::net {

ParsedUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw Error(Errc::Transport, "URL without scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  ParsedUrl p;
  p.origin = url.substr(0, path_start);
  p.target = path_start == std::string::npos ? "/" : url.substr(path_start);
  return p;
}

namespace {

class HttplibClient final : public HttpClient {
 public:
  explicit HttplibClient(double timeout) : timeout_(timeout) {}

  HttpResponse get(const std::string& url, const Headers& headers) override {
    return run(url, [&](httplib::Client& c, const std::string& target, const httplib::Headers& h) {
      return c.Get(target, h);
    }, headers);
  }

  HttpResponse post(const std::string& url, const std::string& body, const std::string& content_type,
                    const Headers& headers) override {
    return run(url, [&](httplib::Client& c, const std::string& target, const httplib::Headers& h) {
      return c.Post(target, h, body, content_type);
    }, headers);
  }

  HttpResponse head(const std::string& url, const Headers& headers) override {
    return run(url, [&](httplib::Client& c, const std::string& target, const httplib::Headers& h) {
      return c.Head(target, h);
    }, headers);
  }

 private:
  template <class F>
  HttpResponse run(const std::string& url, F&& call, const Headers& headers) {
    const ParsedUrl parts = split_url(url);
    httplib::Client client(parts.origin);
    const auto secs = static_cast<time_t>(timeout_);
    const auto usecs = static_cast<time_t>((timeout_ - static_cast<double>(secs)) * 1e6);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);
    client.set_follow_location(false);
    httplib::Headers h;
    for (const auto& [k, v] : headers) h.emplace(k, v);
    auto res = call(client, parts.target, h);
    if (!res) {
      throw Error(Errc::Transport, url + ": " + httplib::to_string(res.error()));
    }
    HttpResponse out;
    out.status = res->status;
    out.body = res->body;
    for (const auto& [k, v] : res->headers) {
      std::string key = k;
      std::transform(key.begin(), key.end(), key.begin(),
                     [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
      out.headers.emplace(std::move(key), v);
    }
    return out;
  }

  double timeout_;
};

}  // namespace

std::shared_ptr<HttpClient> make_http_client(double timeout_seconds) {
  return std::make_shared<HttplibClient>(timeout_seconds);
}

}  // namespace tag2cred::net
