#include "reachabc/service.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <list>
#include <thread>

namespace reachabc {

namespace {

constexpr int kPollMs = 100;

bool send_all(int fd, const std::string& data) {
  std::size_t sent = 0;
  while (sent < data.size()) {
    const ssize_t n = ::send(fd, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) return false;
    sent += static_cast<std::size_t>(n);
  }
  return true;
}

void serve_connection(std::stop_token stop, int fd, std::shared_ptr<const ServiceContext> context) {
  Session session(std::move(context));
  std::string pending;
  char buffer[4096];
  while (!stop.stop_requested() && !session.closed()) {
    pollfd p{fd, POLLIN, 0};
    const int ready = ::poll(&p, 1, kPollMs);
    if (ready < 0 && errno != EINTR) break;
    if (ready <= 0) continue;
    const ssize_t n = ::recv(fd, buffer, sizeof buffer, 0);
    if (n <= 0) break;
    pending.append(buffer, static_cast<std::size_t>(n));
    std::size_t start = 0;
    for (std::size_t nl; !session.closed() && (nl = pending.find('\n', start)) != std::string::npos; start = nl + 1) {
      const std::string line = pending.substr(start, nl - start);
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      std::string out;
      for (const auto& reply : session.handle_line(line)) out += reply.dump() + '\n';
      if (!out.empty() && !send_all(fd, out)) {
        ::close(fd);
        return;
      }
    }
    pending.erase(0, start);
  }
  ::shutdown(fd, SHUT_RDWR);
  ::close(fd);
}

}  // namespace

Server::Server(std::shared_ptr<const ServiceContext> context, int port, const std::string& host)
    : context_(std::move(context)) {
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) throw Error(ErrorCode::io, std::string("socket: ") + std::strerror(errno));
  const int yes = 1;
  ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    ::close(fd_);
    throw Error(ErrorCode::parameter, "bad listen address " + host);
  }
  if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(fd_, 16) != 0) {
    const std::string why = std::strerror(errno);
    ::close(fd_);
    throw Error(ErrorCode::io, "cannot listen on " + host + ":" + std::to_string(port) + ": " + why);
  }
  socklen_t len = sizeof addr;
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

Server::~Server() {
  if (fd_ >= 0) ::close(fd_);
}

void Server::run(std::stop_token stop) {
  std::list<std::jthread> connections;
  while (!stop.stop_requested()) {
    pollfd p{fd_, POLLIN, 0};
    const int ready = ::poll(&p, 1, kPollMs);
    if (ready < 0 && errno != EINTR) throw Error(ErrorCode::io, std::string("poll: ") + std::strerror(errno));
    if (ready <= 0) continue;
    const int client = ::accept(fd_, nullptr, nullptr);
    if (client < 0) continue;
    const int yes = 1;
    ::setsockopt(client, IPPROTO_TCP, TCP_NODELAY, &yes, sizeof yes);
    connections.emplace_back(serve_connection, client, context_);
  }
  for (auto& c : connections) c.request_stop();
}

}  // namespace reachabc
