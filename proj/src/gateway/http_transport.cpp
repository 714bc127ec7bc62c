#include <httplib.h>

#include "magicitem/gateway/gateway.hpp"

namespace magicitem::gateway {

namespace {

class HttplibTransport final : public HttpTransport {
 public:
  HttpResponse post(const HttpRequest& req,
                    const std::function<void(std::string_view)>& onChunk) override {
    auto schemeEnd = req.url.find("://");
    if (schemeEnd == std::string::npos) {
      throw GatewayError(GatewayErrorKind::Transport, "base URL must include a scheme");
    }
    auto pathStart = req.url.find('/', schemeEnd + 3);
    std::string origin = req.url.substr(0, pathStart);
    std::string path = pathStart == std::string::npos ? "/" : req.url.substr(pathStart);

    httplib::Client client(origin);
    if (!client.is_valid()) {
      throw GatewayError(GatewayErrorKind::Transport, "unsupported base URL " + origin);
    }
    const auto secs = static_cast<time_t>(req.timeoutSeconds);
    const auto usecs = static_cast<time_t>((req.timeoutSeconds - static_cast<double>(secs)) * 1e6);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);

    httplib::Request hreq;
    hreq.method = "POST";
    hreq.path = path;
    for (const auto& [k, v] : req.headers) {
      if (k != "Content-Type") hreq.headers.emplace(k, v);
    }
    hreq.headers.emplace("Content-Type", "application/json");
    hreq.body = req.body;
    hreq.content_receiver = [&](const char* data, size_t len, uint64_t, uint64_t) {
      onChunk(std::string_view(data, len));
      return true;
    };

    httplib::Response hres;
    httplib::Error err = httplib::Error::Success;
    if (!client.send(hreq, hres, err)) {
      const auto kind = (err == httplib::Error::Read || err == httplib::Error::Write ||
                         err == httplib::Error::ConnectionTimeout)
                            ? GatewayErrorKind::Timeout
                            : GatewayErrorKind::Transport;
      throw GatewayError(kind, "request to " + origin + " failed: " + httplib::to_string(err));
    }
    return HttpResponse{hres.status};
  }
};

}  // namespace

std::unique_ptr<HttpTransport> makeDefaultTransport() {
  return std::make_unique<HttplibTransport>();
}

}  // namespace magicitem::gateway
