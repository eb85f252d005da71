#pragma once

#include <atomic>
#include <functional>
#include <memory>
#include <optional>
#include <string>

namespace isbench {

/// Newline-delimited message channel.
class LineTransport {
public:
    virtual ~LineTransport() = default;
    /// Throws SegmenterCrash when the peer is gone.
    virtual void send_line(const std::string& line) = 0;
    /// nullopt on end of stream.
    virtual std::optional<std::string> recv_line() = 0;
};

/// Reads from one descriptor and writes to another. Owns both unless told
/// otherwise.
class FdTransport : public LineTransport {
public:
    FdTransport(int read_fd, int write_fd, bool owns = true);
    ~FdTransport() override;
    FdTransport(const FdTransport&) = delete;
    FdTransport& operator=(const FdTransport&) = delete;

    void send_line(const std::string& line) override;
    std::optional<std::string> recv_line() override;

protected:
    void close_write();
    void set_fds(int read_fd, int write_fd) {
        read_fd_ = read_fd;
        write_fd_ = write_fd;
    }

private:
    int read_fd_;
    int write_fd_;
    bool owns_;
    std::string buffer_;
};

/// Runs `command` under /bin/sh with its stdin/stdout attached. Closing
/// the transport closes the child's stdin and reaps it (SIGKILL after a
/// grace period).
class ChildProcessTransport : public FdTransport {
public:
    explicit ChildProcessTransport(const std::string& command);
    ~ChildProcessTransport() override;

private:
    static std::pair<int, int> spawn(const std::string& command, int& pid);
    int pid_ = -1;
};

/// Client side of a TCP connection to "host:port".
std::unique_ptr<LineTransport> connect_tcp(const std::string& address);

/// Two connected in-process endpoints (pipes), for tests and self-checks.
std::pair<std::unique_ptr<LineTransport>, std::unique_ptr<LineTransport>> make_pipe_pair();

/// Feeds each received line to `handle` and writes back its reply until the
/// stream ends.
void serve_lines(LineTransport& transport, const std::function<std::string(const std::string&)>& handle);

/// Accepts connections on `port` (0 picks one) one at a time; `on_bound`
/// receives the actual port. Each connection gets a fresh handler from
/// `make_handler`. Returns when `stop` becomes true.
void serve_tcp(int port, const std::function<std::function<std::string(const std::string&)>()>& make_handler,
               const std::function<void(int)>& on_bound, const std::atomic<bool>& stop);

}  // namespace isbench
