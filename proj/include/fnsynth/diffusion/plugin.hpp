#pragma once

// Host side of the external denoiser protocol (POSIX).

#include <cerrno>
#include <cstring>
#include <string>
#include <vector>

#include <spawn.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

#include "fnsynth/diffusion/protocol.hpp"
#include "fnsynth/diffusion/sampler.hpp"

extern char** environ;

namespace fnsynth::diffusion {

/// Runs `executable args...` with a socket as its stdin and stdout. The first
/// begin() sends HANDSHAKE; each predict() is one STEP_REQUEST/STEP_RESPONSE
/// exchange; destruction sends SHUTDOWN and reaps the child.
class PluginDenoiser final : public Denoiser {
public:
    explicit PluginDenoiser(std::string executable, std::vector<std::string> args = {})
        : executable_(std::move(executable)) {
        if (::access(executable_.c_str(), X_OK) != 0)
            throw PluginError("plugin '" + executable_ + "' is not an executable file");
        int sv[2];
        if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, sv) != 0)
            throw PluginError(std::string("socketpair: ") + std::strerror(errno));
        posix_spawn_file_actions_t fa;
        posix_spawn_file_actions_init(&fa);
        posix_spawn_file_actions_adddup2(&fa, sv[1], STDIN_FILENO);
        posix_spawn_file_actions_adddup2(&fa, sv[1], STDOUT_FILENO);
        std::vector<char*> argv;
        argv.push_back(executable_.data());
        for (auto& a : args) argv.push_back(a.data());
        argv.push_back(nullptr);
        const int rc = ::posix_spawn(&pid_, executable_.c_str(), &fa, nullptr, argv.data(), environ);
        posix_spawn_file_actions_destroy(&fa);
        ::close(sv[1]);
        if (rc != 0) {
            ::close(sv[0]);
            throw PluginError("cannot start plugin '" + executable_ + "': " + std::strerror(rc));
        }
        fd_ = sv[0];
    }

    PluginDenoiser(const PluginDenoiser&) = delete;
    PluginDenoiser& operator=(const PluginDenoiser&) = delete;

    ~PluginDenoiser() override {
        try {
            close();
        } catch (...) {
        }
    }

    /// Sends SHUTDOWN and waits for the plugin. Returns its exit status (-1 if signalled).
    int close() {
        if (pid_ <= 0) return exit_status_;
        if (fd_ >= 0) {
            try {
                send(protocol::encode_header(protocol::Kind::Shutdown, 0));
            } catch (const PluginError&) {
            }
            ::shutdown(fd_, SHUT_WR);
        }
        int status = 0;
        while (::waitpid(pid_, &status, 0) < 0 && errno == EINTR) {
        }
        pid_ = -1;
        if (fd_ >= 0) ::close(fd_), fd_ = -1;
        exit_status_ = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
        return exit_status_;
    }

    void begin(const VolumeGeometry& g, const NoiseSchedule& sched) override {
        if (handshaken_) {
            if (g.dims != dims_ || sched.T() != T_)
                throw PluginError("plugin session already bound to other dims / T");
            return;
        }
        const nlohmann::json hs = {{"dims", g.dims},
                                   {"channels", kInputChannels},
                                   {"T", sched.T()},
                                   {"beta_start", sched.beta_start()},
                                   {"beta_end", sched.beta_end()}};
        send(protocol::encode_text(protocol::Kind::Handshake, hs.dump()));
        dims_ = g.dims;
        T_ = sched.T();
        handshaken_ = true;
    }

    IntensityVolume predict(const IntensityVolume& x_t, const Condition& condition, int t) override {
        if (!handshaken_) throw PluginError("plugin: predict before handshake");
        send(protocol::encode_step_request(static_cast<std::uint32_t>(t), x_t.voxels(), condition.channels));
        std::vector<std::uint8_t> head(protocol::kHeaderSize);
        recv(head);
        const auto h = protocol::decode_header(head);
        std::vector<std::uint8_t> payload(h.length);
        recv(payload);
        if (h.kind == protocol::Kind::Error)
            throw PluginError("plugin reported: " + std::string(payload.begin(), payload.end()));
        if (h.kind != protocol::Kind::StepResponse)
            throw PluginError("plugin: expected STEP_RESPONSE, got " + protocol::kind_name(h.kind));
        if (h.length != 4 * x_t.size()) throw PluginError("plugin: response voxel count differs from request");
        const auto floats = protocol::decode_floats(payload);
        IntensityVolume eps(x_t.geometry(), 0.0);
        for (std::size_t i = 0; i < eps.size(); ++i) eps[i] = floats[i];
        return eps;
    }

private:
    void send(const std::vector<std::uint8_t>& bytes) {
        std::size_t off = 0;
        while (off < bytes.size()) {
            const ssize_t n = ::send(fd_, bytes.data() + off, bytes.size() - off, MSG_NOSIGNAL);
            if (n < 0 && errno == EINTR) continue;
            if (n <= 0) throw PluginError(std::string("plugin: write failed: ") + std::strerror(errno));
            off += static_cast<std::size_t>(n);
        }
    }

    void recv(std::vector<std::uint8_t>& buf) {
        std::size_t off = 0;
        while (off < buf.size()) {
            const ssize_t n = ::read(fd_, buf.data() + off, buf.size() - off);
            if (n < 0 && errno == EINTR) continue;
            if (n == 0) throw PluginError("plugin closed its output");
            if (n < 0) throw PluginError(std::string("plugin: read failed: ") + std::strerror(errno));
            off += static_cast<std::size_t>(n);
        }
    }

    std::string executable_;
    pid_t pid_ = -1;
    int fd_ = -1;
    int exit_status_ = 0;
    bool handshaken_ = false;
    Dims dims_{0, 0, 0};
    int T_ = 0;
};

} // namespace fnsynth::diffusion
