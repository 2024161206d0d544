// Copyright 2026 The Synthesis Harness Authors
// SPDX-License-Identifier: Apache-2.0

#include "synth/transport.h"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <mutex>

#include <httplib.h>

#include "synth/error.h"

namespace synth {

Endpoint parse_endpoint(std::string_view address) {
  Endpoint ep;
  ep.address = std::string(address);
  if (address.starts_with("exec:")) {
    ep.kind = Endpoint::Kind::kProcess;
    ep.command = std::string(address.substr(5));
    if (ep.command.empty()) throw ConfigError("empty command in endpoint '" + ep.address + "'");
    return ep;
  }
  if (address.starts_with("http://")) {
    ep.kind = Endpoint::Kind::kHttp;
    std::string_view rest = address.substr(7);
    const auto slash = rest.find('/');
    std::string_view hostport = rest.substr(0, slash);
    if (slash != std::string_view::npos) ep.path = std::string(rest.substr(slash));
    const auto colon = hostport.rfind(':');
    if (colon == std::string_view::npos) {
      ep.host = std::string(hostport);
    } else {
      ep.host = std::string(hostport.substr(0, colon));
      try {
        ep.port = std::stoi(std::string(hostport.substr(colon + 1)));
      } catch (const std::exception&) {
        throw ConfigError("bad port in endpoint '" + ep.address + "'");
      }
    }
    if (ep.host.empty()) throw ConfigError("missing host in endpoint '" + ep.address + "'");
    return ep;
  }
  throw ConfigError("unsupported endpoint '" + ep.address +
                    "' (expected exec:<command> or http://host:port/path)");
}

namespace {

void ignore_sigpipe() {
  static std::once_flag once;
  std::call_once(once, [] { ::signal(SIGPIPE, SIG_IGN); });
}

class ProcessChannel final : public LineChannel {
 public:
  ProcessChannel(Endpoint ep, std::chrono::milliseconds timeout)
      : endpoint_(std::move(ep)), timeout_(timeout) {
    ignore_sigpipe();
  }

  ~ProcessChannel() override { stop(); }

  void exchange(const std::vector<std::string>& requests, const ReplySink& sink) override {
    std::lock_guard lock(mutex_);
    if (pid_ <= 0) start();
    try {
      for (const std::string& req : requests) write_line(req);
      std::string line;
      while (true) {
        read_line(line);
        if (sink(line)) break;
      }
    } catch (...) {
      // The child may hold unread replies; a fresh process is the only way
      // to resynchronize the stream.
      stop();
      throw;
    }
  }

  const Endpoint& endpoint() const override { return endpoint_; }

 private:
  void start() {
    int to_child[2];
    int from_child[2];
    if (::pipe(to_child) != 0) fail("pipe failed");
    if (::pipe(from_child) != 0) {
      ::close(to_child[0]);
      ::close(to_child[1]);
      fail("pipe failed");
    }
    const pid_t pid = ::fork();
    if (pid < 0) fail("fork failed");
    if (pid == 0) {
      ::dup2(to_child[0], STDIN_FILENO);
      ::dup2(from_child[1], STDOUT_FILENO);
      ::close(to_child[0]);
      ::close(to_child[1]);
      ::close(from_child[0]);
      ::close(from_child[1]);
      ::execl("/bin/sh", "sh", "-c", endpoint_.command.c_str(), static_cast<char*>(nullptr));
      ::_exit(127);
    }
    ::close(to_child[0]);
    ::close(from_child[1]);
    write_fd_ = to_child[1];
    read_fd_ = from_child[0];
    ::fcntl(write_fd_, F_SETFD, FD_CLOEXEC);
    ::fcntl(read_fd_, F_SETFD, FD_CLOEXEC);
    pid_ = pid;
    buffer_.clear();
  }

  void stop() {
    if (write_fd_ >= 0) ::close(write_fd_);
    if (read_fd_ >= 0) ::close(read_fd_);
    write_fd_ = read_fd_ = -1;
    if (pid_ > 0) {
      int status = 0;
      // Closing stdin is the polite shutdown; escalate if the child lingers.
      for (int i = 0; i < 50; ++i) {
        if (::waitpid(pid_, &status, WNOHANG) == pid_) {
          pid_ = -1;
          return;
        }
        ::usleep(2000);
      }
      ::kill(pid_, SIGKILL);
      ::waitpid(pid_, &status, 0);
      pid_ = -1;
    }
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw RetryableError("endpoint " + endpoint_.address + ": " + what);
  }

  void write_line(const std::string& line) {
    std::string data = line;
    data += '\n';
    std::size_t off = 0;
    while (off < data.size()) {
      const ssize_t n = ::write(write_fd_, data.data() + off, data.size() - off);
      if (n < 0) {
        if (errno == EINTR) continue;
        fail(std::string("write failed: ") + std::strerror(errno));
      }
      off += static_cast<std::size_t>(n);
    }
  }

  void read_line(std::string& line) {
    while (true) {
      const auto nl = buffer_.find('\n');
      if (nl != std::string::npos) {
        line.assign(buffer_, 0, nl);
        buffer_.erase(0, nl + 1);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return;
      }
      pollfd pfd{read_fd_, POLLIN, 0};
      const int ready = ::poll(&pfd, 1, static_cast<int>(timeout_.count()));
      if (ready < 0) {
        if (errno == EINTR) continue;
        fail("poll failed");
      }
      if (ready == 0) fail("timed out waiting for reply");
      char chunk[4096];
      const ssize_t n = ::read(read_fd_, chunk, sizeof chunk);
      if (n < 0) {
        if (errno == EINTR) continue;
        fail(std::string("read failed: ") + std::strerror(errno));
      }
      if (n == 0) fail("process closed its output before the reply was complete");
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

  Endpoint endpoint_;
  std::chrono::milliseconds timeout_;
  std::mutex mutex_;
  pid_t pid_ = -1;
  int write_fd_ = -1;
  int read_fd_ = -1;
  std::string buffer_;
};

class HttpChannel final : public LineChannel {
 public:
  HttpChannel(Endpoint ep, std::chrono::milliseconds timeout)
      : endpoint_(std::move(ep)), timeout_(timeout) {}

  void exchange(const std::vector<std::string>& requests, const ReplySink& sink) override {
    std::lock_guard lock(mutex_);
    httplib::Client client(endpoint_.host, endpoint_.port);
    const auto secs = timeout_.count() / 1000;
    const auto usecs = (timeout_.count() % 1000) * 1000;
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);

    std::string body;
    for (const std::string& r : requests) {
      body += r;
      body += '\n';
    }
    auto res = client.Post(endpoint_.path, body, "application/x-ndjson");
    if (!res)
      throw RetryableError("endpoint " + endpoint_.address + ": " +
                           httplib::to_string(res.error()));
    if (res->status >= 500)
      throw RetryableError("endpoint " + endpoint_.address + ": HTTP " +
                           std::to_string(res->status));
    if (res->status != 200)
      throw ProtocolError("endpoint " + endpoint_.address + ": HTTP " +
                          std::to_string(res->status));

    std::string_view rest = res->body;
    while (!rest.empty()) {
      const auto nl = rest.find('\n');
      std::string_view line = rest.substr(0, nl);
      rest = nl == std::string_view::npos ? std::string_view{} : rest.substr(nl + 1);
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      if (line.empty()) continue;
      if (sink(line)) return;
    }
    throw RetryableError("endpoint " + endpoint_.address +
                         ": reply body ended before the reply was complete");
  }

  const Endpoint& endpoint() const override { return endpoint_; }

 private:
  Endpoint endpoint_;
  std::chrono::milliseconds timeout_;
  std::mutex mutex_;
};

}  // namespace

std::unique_ptr<LineChannel> open_channel(const Endpoint& endpoint,
                                          std::chrono::milliseconds timeout) {
  if (endpoint.kind == Endpoint::Kind::kHttp)
    return std::make_unique<HttpChannel>(endpoint, timeout);
  return std::make_unique<ProcessChannel>(endpoint, timeout);
}

}  // namespace synth
