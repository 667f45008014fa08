#include "gtv/transport.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstring>

#include "gtv/error.hpp"

namespace gtv {

namespace {

class Fd {
 public:
  explicit Fd(int fd) : fd_(fd) {}
  ~Fd() {
    if (fd_ >= 0) ::close(fd_);
  }
  Fd(const Fd&) = delete;
  Fd& operator=(const Fd&) = delete;
  int get() const { return fd_; }

 private:
  int fd_;
};

}  // namespace

std::pair<std::string, uint16_t> split_host_port(const std::string& address, uint16_t default_port) {
  const auto colon = address.rfind(':');
  if (colon == std::string::npos || address.find(':') != colon) return {address, default_port};
  const std::string port = address.substr(colon + 1);
  try {
    const int p = std::stoi(port);
    if (p <= 0 || p > 65535) throw ConfigError("port out of range in address " + address);
    return {address.substr(0, colon), static_cast<uint16_t>(p)};
  } catch (const std::logic_error&) {
    throw ConfigError("bad port in address " + address);
  }
}

UdpTransport::UdpTransport(std::string host, uint16_t port) : host_(std::move(host)), port_(port) {}

std::optional<Bytes> UdpTransport::exchange(ByteView request, std::chrono::milliseconds timeout) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_DGRAM;
  addrinfo* res = nullptr;
  const std::string port = std::to_string(port_);
  if (::getaddrinfo(host_.c_str(), port.c_str(), &hints, &res) != 0 || res == nullptr) {
    throw UnreachableError("cannot resolve " + host_);
  }
  std::unique_ptr<addrinfo, decltype(&::freeaddrinfo)> guard(res, ::freeaddrinfo);
  Fd sock(::socket(res->ai_family, res->ai_socktype, res->ai_protocol));
  if (sock.get() < 0) throw UnreachableError("socket(): " + std::string(std::strerror(errno)));
  if (::connect(sock.get(), res->ai_addr, res->ai_addrlen) != 0) {
    throw UnreachableError("connect(): " + std::string(std::strerror(errno)));
  }
  if (::send(sock.get(), request.data(), request.size(), 0) < 0) return std::nullopt;

  pollfd pfd{sock.get(), POLLIN, 0};
  if (::poll(&pfd, 1, static_cast<int>(timeout.count())) <= 0) return std::nullopt;
  Bytes buf(65536);
  const ssize_t n = ::recv(sock.get(), buf.data(), buf.size(), 0);
  if (n < 0) return std::nullopt;
  buf.resize(static_cast<size_t>(n));
  return buf;
}

UdpServer::UdpServer(Handler h) : handler_(std::move(h)) {
  fd_ = ::socket(AF_INET, SOCK_DGRAM, 0);
  if (fd_ < 0) throw UnreachableError("socket(): " + std::string(std::strerror(errno)));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = 0;
  if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
    ::close(fd_);
    throw UnreachableError("bind(): " + std::string(std::strerror(errno)));
  }
  socklen_t len = sizeof addr;
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
  thread_ = std::thread([this] { run(); });
}

UdpServer::~UdpServer() {
  stop_ = true;
  if (thread_.joinable()) thread_.join();
  ::close(fd_);
}

void UdpServer::run() {
  Bytes buf(65536);
  while (!stop_) {
    pollfd pfd{fd_, POLLIN, 0};
    if (::poll(&pfd, 1, 20) <= 0) continue;
    sockaddr_storage peer{};
    socklen_t plen = sizeof peer;
    const ssize_t n = ::recvfrom(fd_, buf.data(), buf.size(), 0, reinterpret_cast<sockaddr*>(&peer), &plen);
    if (n < 0) continue;
    std::optional<Bytes> reply;
    try {
      reply = handler_(ByteView(buf.data(), static_cast<size_t>(n)));
    } catch (const std::exception&) {
      reply.reset();
    }
    if (reply) {
      ::sendto(fd_, reply->data(), reply->size(), 0, reinterpret_cast<sockaddr*>(&peer), plen);
    }
  }
}

}  // namespace gtv
