#include "pushdqn/server.h"

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "pushdqn/session.h"

namespace pushdqn {

namespace {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = boost::asio::ip::tcp;

std::string MimeType(const std::filesystem::path& p) {
  const std::string ext = p.extension().string();
  if (ext == ".html" || ext == ".htm") return "text/html";
  if (ext == ".js" || ext == ".mjs") return "application/javascript";
  if (ext == ".css") return "text/css";
  if (ext == ".json") return "application/json";
  if (ext == ".png") return "image/png";
  if (ext == ".svg") return "image/svg+xml";
  if (ext == ".ico") return "image/x-icon";
  return "application/octet-stream";
}

http::response<http::string_body> Respond(
    const http::request<http::string_body>& req, http::status status,
    std::string body, const std::string& type) {
  http::response<http::string_body> res{status, req.version()};
  res.set(http::field::content_type, type);
  res.keep_alive(req.keep_alive());
  res.body() = std::move(body);
  res.prepare_payload();
  return res;
}

http::response<http::string_body> ServeStatic(
    const http::request<http::string_body>& req, const std::string& root) {
  if (req.method() != http::verb::get && req.method() != http::verb::head) {
    return Respond(req, http::status::method_not_allowed, "method not allowed\n",
                   "text/plain");
  }
  std::string target(req.target());
  if (target == "/health") {
    return Respond(req, http::status::ok, "{\"ok\":true}", "application/json");
  }
  if (root.empty()) {
    return Respond(req, http::status::not_found, "no static root\n",
                   "text/plain");
  }
  if (const auto q = target.find('?'); q != std::string::npos) {
    target.resize(q);
  }
  if (target.empty() || target.back() == '/') target += "index.html";
  if (target.find("..") != std::string::npos) {
    return Respond(req, http::status::bad_request, "bad path\n", "text/plain");
  }
  const std::filesystem::path file =
      std::filesystem::path(root) / target.substr(1);
  std::ifstream in(file, std::ios::binary);
  if (!in) {
    return Respond(req, http::status::not_found, "not found\n", "text/plain");
  }
  std::string body((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return Respond(req, http::status::ok, std::move(body), MimeType(file));
}

void RunWebSocket(tcp::socket socket, http::request<http::string_body> req,
                  SessionManager& manager, SessionManager::ConnectionId id) {
  websocket::stream<tcp::socket> ws(std::move(socket));
  ws.accept(req);
  beast::flat_buffer buffer;
  try {
    for (;;) {
      buffer.clear();
      ws.read(buffer);
      const nlohmann::json reply =
          manager.HandleText(beast::buffers_to_string(buffer.data()), id);
      ws.text(true);
      ws.write(boost::asio::buffer(reply.dump()));
    }
  } catch (const beast::system_error& e) {
    if (e.code() != websocket::error::closed) {
      std::cerr << "connection " << id << ": " << e.code().message() << "\n";
    }
  }
  manager.DropConnection(id);
}

void HandleConnection(tcp::socket socket, SessionManager& manager,
                      SessionManager::ConnectionId id,
                      const std::string& static_dir) {
  try {
    beast::flat_buffer buffer;
    for (;;) {
      http::request<http::string_body> req;
      http::read(socket, buffer, req);
      if (websocket::is_upgrade(req)) {
        RunWebSocket(std::move(socket), std::move(req), manager, id);
        return;
      }
      auto res = ServeStatic(req, static_dir);
      const bool keep = res.keep_alive();
      http::write(socket, res);
      if (!keep) break;
    }
    beast::error_code ec;
    socket.shutdown(tcp::socket::shutdown_send, ec);
  } catch (const beast::system_error& e) {
    if (e.code() != http::error::end_of_stream) {
      std::cerr << "connection " << id << ": " << e.code().message() << "\n";
    }
  }
}

}  // namespace

int RunServer(const ServerOptions& opts) {
  std::ofstream log;
  SessionServiceConfig cfg;
  cfg.geometry = opts.geometry;
  cfg.weights = opts.weights;
  cfg.default_checkpoint = opts.default_checkpoint;
  if (!opts.episode_log.empty()) {
    log.open(opts.episode_log, std::ios::app);
    if (!log) throw std::runtime_error("cannot open log " + opts.episode_log);
    cfg.episode_log = &log;
  }
  SessionManager manager(cfg);

  boost::asio::io_context ioc;
  tcp::acceptor acceptor(
      ioc, {boost::asio::ip::make_address(opts.host), opts.port});
  std::cerr << "serving on http://" << opts.host << ":"
            << acceptor.local_endpoint().port() << "\n";
  std::atomic<SessionManager::ConnectionId> next_id{1};
  for (;;) {
    tcp::socket socket(ioc);
    acceptor.accept(socket);
    std::thread(HandleConnection, std::move(socket), std::ref(manager),
                next_id++, opts.static_dir)
        .detach();
  }
}

}  // namespace pushdqn
