#pragma once

#include <atomic>
#include <memory>
#include <chrono>
#include <functional>
#include <optional>
#include <string>
#include <thread>

#include "gtv/crypto.hpp"

namespace gtv {

/// One request/response datagram exchange. nullopt means no reply arrived
/// before the timeout (a dropped packet); callers own the retry policy.
class DatagramTransport {
 public:
  virtual ~DatagramTransport() = default;
  virtual std::optional<Bytes> exchange(ByteView request, std::chrono::milliseconds timeout) = 0;
};

class UdpTransport final : public DatagramTransport {
 public:
  UdpTransport(std::string host, uint16_t port);
  std::optional<Bytes> exchange(ByteView request, std::chrono::milliseconds timeout) override;

 private:
  std::string host_;
  uint16_t port_;
};

/// Routes datagrams to an in-process handler; used by tests and the simulator.
class LoopbackTransport final : public DatagramTransport {
 public:
  using Handler = std::function<std::optional<Bytes>(ByteView)>;
  explicit LoopbackTransport(Handler h) : handler_(std::move(h)) {}
  std::optional<Bytes> exchange(ByteView request, std::chrono::milliseconds) override {
    return handler_(request);
  }

 private:
  Handler handler_;
};

/// Minimal UDP responder bound to 127.0.0.1 on an ephemeral port, serving a
/// handler from a background thread until destroyed.
class UdpServer {
 public:
  using Handler = std::function<std::optional<Bytes>(ByteView)>;
  explicit UdpServer(Handler h);
  ~UdpServer();
  UdpServer(const UdpServer&) = delete;
  UdpServer& operator=(const UdpServer&) = delete;

  uint16_t port() const { return port_; }

 private:
  void run();

  Handler handler_;
  int fd_ = -1;
  uint16_t port_ = 0;
  std::atomic<bool> stop_{false};
  std::thread thread_;
};

/// "host:port" split; the port defaults to `default_port` when absent.
std::pair<std::string, uint16_t> split_host_port(const std::string& address, uint16_t default_port);

}  // namespace gtv
