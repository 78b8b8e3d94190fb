#pragma once

#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace tag2cred::net {

using Headers = std::vector<std::pair<std::string, std::string>>;

struct HttpResponse {
  int status = 0;
  std::string body;
  std::map<std::string, std::string> headers;  // names lowercased
};

/// Minimal blocking HTTP client. Implementations throw Error(Transport) when
/// no response could be obtained.
class HttpClient {
 public:
  virtual ~HttpClient() = default;
  virtual HttpResponse get(const std::string& url, const Headers& headers) = 0;
  virtual HttpResponse post(const std::string& url, const std::string& body,
                            const std::string& content_type, const Headers& headers) = 0;
  virtual HttpResponse head(const std::string& url, const Headers& headers) = 0;
};

/// cpp-httplib backed client; supports http:// and https:// URLs.
std::shared_ptr<HttpClient> make_http_client(double timeout_seconds);

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string target;  // path + query, at least "/"
};
ParsedUrl split_url(const std::string& url);

}  // namespace tag2cred::net
