#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>

#include "headway/predictor.hpp"
#include "headway/whatif.hpp"

namespace httplib {
class Server;
}

namespace headway::service {

/// Immutable snapshot served to every request.
struct SessionState {
    predict::TrainedModel model;
    std::string params_digest;
    int best_epoch = 0;
    std::map<int, grid::HeadwayGrid> grids;  // seconds, by replication id
    double min_safe_headway = whatif::kDefaultMinSafeHeadway;
    std::string version;
};

/// Loads a checkpoint and every grid file in `data_dir`. Grids must match
/// the checkpoint's grid spec.
std::shared_ptr<const SessionState> load_session(const std::filesystem::path& checkpoint,
                                                 const std::filesystem::path& data_dir,
                                                 double min_safe_headway = whatif::kDefaultMinSafeHeadway);

struct Response {
    int status = 200;
    std::string body;  // JSON
};

/// Routing without the network layer; `query` holds URL parameters.
Response handle(const SessionState& state, const std::string& method, const std::string& path,
                const std::multimap<std::string, std::string>& query, const std::string& body);

class Server {
public:
    explicit Server(std::shared_ptr<const SessionState> state);
    ~Server();
    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    /// Blocks until stop(). Returns false if the port cannot be bound.
    bool listen(const std::string& host, int port);
    /// Binds an ephemeral port and returns it; follow with listen_after_bind().
    int bind_any_port(const std::string& host);
    bool listen_after_bind();
    void stop();
    bool is_running() const;
    void wait_until_ready() const;

    /// Replaces the snapshot; in-flight requests keep the one they started with.
    void swap(std::shared_ptr<const SessionState> next);
    std::shared_ptr<const SessionState> snapshot() const;

private:
    mutable std::mutex mutex_;
    std::shared_ptr<const SessionState> state_;
    std::unique_ptr<httplib::Server> http_;
};

}  // namespace headway::service
