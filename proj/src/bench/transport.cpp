#include "isbench/transport.hpp"

#include <arpa/inet.h>
#include <csignal>
#include <cstring>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <thread>

#include "isbench/error.hpp"

namespace isbench {

namespace {

void ignore_sigpipe() {
    static const bool done = [] {
        std::signal(SIGPIPE, SIG_IGN);
        return true;
    }();
    (void)done;
}

std::string os_error(const char* what) { return std::string(what) + ": " + std::strerror(errno); }

}  // namespace

FdTransport::FdTransport(int read_fd, int write_fd, bool owns) : read_fd_(read_fd), write_fd_(write_fd), owns_(owns) {
    ignore_sigpipe();
}

FdTransport::~FdTransport() {
    if (!owns_) return;
    close_write();
    if (read_fd_ >= 0) ::close(read_fd_);
}

void FdTransport::close_write() {
    if (owns_ && write_fd_ >= 0 && write_fd_ != read_fd_) ::close(write_fd_);
    if (write_fd_ == read_fd_ && write_fd_ >= 0) ::shutdown(write_fd_, SHUT_WR);
    write_fd_ = -1;
}

void FdTransport::send_line(const std::string& line) {
    if (write_fd_ < 0) throw Error(Errc::SegmenterCrash, "transport closed");
    std::string data = line;
    data += '\n';
    std::size_t off = 0;
    while (off < data.size()) {
        const auto n = ::write(write_fd_, data.data() + off, data.size() - off);
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) throw Error(Errc::SegmenterCrash, os_error("write to segmenter failed"));
        off += static_cast<std::size_t>(n);
    }
}

std::optional<std::string> FdTransport::recv_line() {
    for (;;) {
        if (const auto nl = buffer_.find('\n'); nl != std::string::npos) {
            std::string line = buffer_.substr(0, nl);
            buffer_.erase(0, nl + 1);
            if (!line.empty() && line.back() == '\r') line.pop_back();
            return line;
        }
        char chunk[65536];
        const auto n = ::read(read_fd_, chunk, sizeof chunk);
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) {
            if (buffer_.empty()) return std::nullopt;
            std::string rest;
            rest.swap(buffer_);
            return rest;
        }
        buffer_.append(chunk, static_cast<std::size_t>(n));
    }
}

std::pair<int, int> ChildProcessTransport::spawn(const std::string& command, int& pid) {
    int to_child[2], from_child[2];
    if (::pipe2(to_child, O_CLOEXEC) != 0) throw Error(Errc::SegmenterCrash, os_error("pipe"));
    if (::pipe2(from_child, O_CLOEXEC) != 0) {
        ::close(to_child[0]);
        ::close(to_child[1]);
        throw Error(Errc::SegmenterCrash, os_error("pipe"));
    }
    pid = ::fork();
    if (pid < 0) throw Error(Errc::SegmenterCrash, os_error("fork"));
    if (pid == 0) {
        ::dup2(to_child[0], STDIN_FILENO);
        ::dup2(from_child[1], STDOUT_FILENO);
        ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
        ::_exit(127);
    }
    ::close(to_child[0]);
    ::close(from_child[1]);
    return {from_child[0], to_child[1]};
}

ChildProcessTransport::ChildProcessTransport(const std::string& command) : FdTransport(-1, -1) {
    const auto [r, w] = spawn(command, pid_);
    set_fds(r, w);
}

ChildProcessTransport::~ChildProcessTransport() {
    close_write();
    if (pid_ <= 0) return;
    int status = 0;
    for (int i = 0; i < 200; ++i) {
        if (::waitpid(pid_, &status, WNOHANG) == pid_) return;
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    ::kill(pid_, SIGKILL);
    ::waitpid(pid_, &status, 0);
}

std::unique_ptr<LineTransport> connect_tcp(const std::string& address) {
    const auto colon = address.rfind(':');
    if (colon == std::string::npos) throw Error(Errc::ConfigInvalid, "address must be host:port, got '" + address + "'");
    const auto host = address.substr(0, colon);
    const auto port = address.substr(colon + 1);
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    if (const int rc = ::getaddrinfo(host.c_str(), port.c_str(), &hints, &res); rc != 0)
        throw Error(Errc::SegmenterCrash, "cannot resolve " + address + ": " + ::gai_strerror(rc));
    int fd = -1;
    for (auto* a = res; a; a = a->ai_next) {
        fd = ::socket(a->ai_family, a->ai_socktype | SOCK_CLOEXEC, a->ai_protocol);
        if (fd < 0) continue;
        if (::connect(fd, a->ai_addr, a->ai_addrlen) == 0) break;
        ::close(fd);
        fd = -1;
    }
    ::freeaddrinfo(res);
    if (fd < 0) throw Error(Errc::SegmenterCrash, "cannot connect to " + address);
    return std::make_unique<FdTransport>(fd, fd);
}

std::pair<std::unique_ptr<LineTransport>, std::unique_ptr<LineTransport>> make_pipe_pair() {
    int ab[2], ba[2];
    if (::pipe2(ab, O_CLOEXEC) != 0 || ::pipe2(ba, O_CLOEXEC) != 0) throw Error(Errc::IoFailure, os_error("pipe"));
    return {std::make_unique<FdTransport>(ba[0], ab[1]), std::make_unique<FdTransport>(ab[0], ba[1])};
}

void serve_lines(LineTransport& transport, const std::function<std::string(const std::string&)>& handle) {
    while (const auto line = transport.recv_line()) {
        if (line->empty()) continue;
        transport.send_line(handle(*line));
    }
}

void serve_tcp(int port, const std::function<std::function<std::string(const std::string&)>()>& make_handler,
               const std::function<void(int)>& on_bound, const std::atomic<bool>& stop) {
    ignore_sigpipe();
    const int srv = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
    if (srv < 0) throw Error(Errc::IoFailure, os_error("socket"));
    const int one = 1;
    ::setsockopt(srv, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = htons(static_cast<std::uint16_t>(port));
    if (::bind(srv, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(srv, 8) != 0) {
        ::close(srv);
        throw Error(Errc::IoFailure, os_error("bind/listen"));
    }
    socklen_t len = sizeof addr;
    ::getsockname(srv, reinterpret_cast<sockaddr*>(&addr), &len);
    if (on_bound) on_bound(ntohs(addr.sin_port));
    while (!stop) {
        pollfd p{srv, POLLIN, 0};
        if (::poll(&p, 1, 100) <= 0) continue;
        const int fd = ::accept4(srv, nullptr, nullptr, SOCK_CLOEXEC);
        if (fd < 0) continue;
        FdTransport conn(fd, fd);
        try {
            serve_lines(conn, make_handler());
        } catch (const Error&) {
            // Peer went away mid-reply; wait for the next one.
        }
    }
    ::close(srv);
}

}  // namespace isbench
