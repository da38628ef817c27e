#ifndef POPSYNTH_ENDPOINT_HPP
#define POPSYNTH_ENDPOINT_HPP

#include <cerrno>
#include <csignal>
#include <cstring>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <fcntl.h>
#include <netdb.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

#include "popsynth/error.hpp"

namespace popsynth {

/// Bidirectional newline-delimited text stream.
class LineChannel {
public:
    virtual ~LineChannel() = default;
    virtual void write_line(std::string_view line) = 0;
    /// Next line without its newline; nullopt at end of stream.
    virtual std::optional<std::string> read_line() = 0;
};

namespace detail {

/// Buffered line reader/writer over a pair of file descriptors.
class FdLineIo {
public:
    FdLineIo() = default;
    FdLineIo(int read_fd, int write_fd, bool socket) : rfd_(read_fd), wfd_(write_fd), socket_(socket) {}

    void write_line(std::string_view line) {
        std::string buf(line);
        buf.push_back('\n');
        std::size_t off = 0;
        while (off < buf.size()) {
            ssize_t n = socket_ ? ::send(wfd_, buf.data() + off, buf.size() - off, MSG_NOSIGNAL)
                                : ::write(wfd_, buf.data() + off, buf.size() - off);
            if (n < 0) {
                if (errno == EINTR) continue;
                throw EndpointUnavailable(std::string("write to endpoint failed: ") + std::strerror(errno));
            }
            off += static_cast<std::size_t>(n);
        }
    }

    std::optional<std::string> read_line() {
        for (;;) {
            auto nl = buf_.find('\n', pos_);
            if (nl != std::string::npos) {
                std::string line = buf_.substr(pos_, nl - pos_);
                pos_ = nl + 1;
                if (pos_ > 65536) {
                    buf_.erase(0, pos_);
                    pos_ = 0;
                }
                if (!line.empty() && line.back() == '\r') line.pop_back();
                return line;
            }
            char tmp[65536];
            ssize_t n = ::read(rfd_, tmp, sizeof tmp);
            if (n < 0) {
                if (errno == EINTR) continue;
                throw EndpointUnavailable(std::string("read from endpoint failed: ") + std::strerror(errno));
            }
            if (n == 0) {
                if (pos_ < buf_.size()) {
                    std::string rest = buf_.substr(pos_);
                    buf_.clear();
                    pos_ = 0;
                    return rest;
                }
                return std::nullopt;
            }
            buf_.append(tmp, static_cast<std::size_t>(n));
        }
    }

private:
    int rfd_ = -1;
    int wfd_ = -1;
    bool socket_ = false;
    std::string buf_;
    std::size_t pos_ = 0;
};

}  // namespace detail

/// Spawns `/bin/sh -c command` and talks to it over its stdin/stdout.
class ProcessChannel final : public LineChannel {
public:
    explicit ProcessChannel(const std::string& command) {
        std::signal(SIGPIPE, SIG_IGN);
        int to_child[2];
        int from_child[2];
        if (::pipe(to_child) != 0) throw EndpointUnavailable("pipe() failed");
        if (::pipe(from_child) != 0) {
            ::close(to_child[0]);
            ::close(to_child[1]);
            throw EndpointUnavailable("pipe() failed");
        }
        pid_ = ::fork();
        if (pid_ < 0) throw EndpointUnavailable("fork() failed");
        if (pid_ == 0) {
            ::dup2(to_child[0], STDIN_FILENO);
            ::dup2(from_child[1], STDOUT_FILENO);
            ::close(to_child[0]);
            ::close(to_child[1]);
            ::close(from_child[0]);
            ::close(from_child[1]);
            ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
            ::_exit(127);
        }
        ::close(to_child[0]);
        ::close(from_child[1]);
        in_ = to_child[1];
        out_ = from_child[0];
        io_ = detail::FdLineIo(out_, in_, false);
    }

    ProcessChannel(const ProcessChannel&) = delete;
    ProcessChannel& operator=(const ProcessChannel&) = delete;

    ~ProcessChannel() override {
        if (in_ >= 0) ::close(in_);
        if (out_ >= 0) ::close(out_);
        if (pid_ > 0) {
            int status = 0;
            ::waitpid(pid_, &status, 0);
        }
    }

    void write_line(std::string_view line) override { io_.write_line(line); }
    std::optional<std::string> read_line() override { return io_.read_line(); }

private:
    pid_t pid_ = -1;
    int in_ = -1;
    int out_ = -1;
    detail::FdLineIo io_;
};

/// Client side of a TCP connection to host:port.
class TcpChannel final : public LineChannel {
public:
    TcpChannel(const std::string& host, const std::string& port) {
        addrinfo hints{};
        hints.ai_family = AF_UNSPEC;
        hints.ai_socktype = SOCK_STREAM;
        addrinfo* res = nullptr;
        if (::getaddrinfo(host.c_str(), port.c_str(), &hints, &res) != 0)
            throw EndpointUnavailable("cannot resolve " + host + ":" + port);
        for (auto* ai = res; ai; ai = ai->ai_next) {
            int fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
            if (fd < 0) continue;
            if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) {
                fd_ = fd;
                break;
            }
            ::close(fd);
        }
        ::freeaddrinfo(res);
        if (fd_ < 0) throw EndpointUnavailable("cannot connect to " + host + ":" + port);
        io_ = detail::FdLineIo(fd_, fd_, true);
    }

    TcpChannel(const TcpChannel&) = delete;
    TcpChannel& operator=(const TcpChannel&) = delete;
    ~TcpChannel() override {
        if (fd_ >= 0) ::close(fd_);
    }

    void write_line(std::string_view line) override { io_.write_line(line); }
    std::optional<std::string> read_line() override { return io_.read_line(); }

private:
    int fd_ = -1;
    detail::FdLineIo io_;
};

/// "tcp://host:port" connects a socket; anything else is run as a shell command.
inline std::unique_ptr<LineChannel> open_endpoint(const std::string& address) {
    constexpr std::string_view tcp = "tcp://";
    if (address.starts_with(tcp)) {
        auto hostport = address.substr(tcp.size());
        auto colon = hostport.rfind(':');
        if (colon == std::string::npos) throw EndpointUnavailable("endpoint address needs a port: " + address);
        return std::make_unique<TcpChannel>(hostport.substr(0, colon), hostport.substr(colon + 1));
    }
    if (address.empty()) throw EndpointUnavailable("empty endpoint address");
    return std::make_unique<ProcessChannel>(address);
}

struct GenerateRequest {
    std::size_t count = 0;
    double temperature = 1.0;
    std::string prompt;
    std::uint64_t seed = 0;
};

inline nlohmann::json to_json(const GenerateRequest& r) {
    return {{"op", "generate"}, {"count", r.count}, {"temperature", r.temperature}, {"prompt", r.prompt},
            {"seed", r.seed}};
}

/// Speaks the adapter protocol: one request frame out, then exactly `count`
/// {"text": ...} frames and a {"op":"done","generated":count} frame back.
/// An {"op":"error"} frame aborts the batch.
class TextGenerationClient {
public:
    explicit TextGenerationClient(LineChannel& channel) : channel_(channel) {}

    std::vector<std::string> generate(const GenerateRequest& req) {
        channel_.write_line(to_json(req).dump());
        std::vector<std::string> texts;
        texts.reserve(req.count);
        for (;;) {
            auto line = channel_.read_line();
            if (!line) throw EndpointUnavailable("endpoint closed the stream mid-batch");
            nlohmann::json frame;
            try {
                frame = nlohmann::json::parse(*line);
            } catch (const nlohmann::json::parse_error&) {
                throw ProtocolViolation("frame is not JSON: " + line->substr(0, 200));
            }
            if (!frame.is_object()) throw ProtocolViolation("frame is not a JSON object");
            if (auto it = frame.find("text"); it != frame.end()) {
                if (!it->is_string()) throw ProtocolViolation("text frame carries a non-string");
                if (texts.size() == req.count) throw ProtocolViolation("more text frames than requested");
                texts.push_back(it->get<std::string>());
                continue;
            }
            const auto op = frame.value("op", std::string{});
            if (op == "error")
                throw ProtocolViolation("endpoint reported an error: " + frame.value("message", std::string{}));
            if (op != "done") throw ProtocolViolation("unexpected frame: " + line->substr(0, 200));
            if (!frame.contains("generated") || !frame["generated"].is_number_integer() ||
                frame["generated"].get<long long>() != static_cast<long long>(texts.size()) ||
                texts.size() != req.count)
                throw ProtocolViolation("done frame does not match " + std::to_string(req.count) + " requested / " +
                                        std::to_string(texts.size()) + " received");
            return texts;
        }
    }

private:
    LineChannel& channel_;
};

}  // namespace popsynth

#endif  // POPSYNTH_ENDPOINT_HPP
