#pragma once

#include "ctour/cache.hpp"
#include "ctour/json_io.hpp"
#include "ctour/session.hpp"

#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

namespace ctour {

inline constexpr std::string_view kApiPrefix = "/api/v1";

struct ApiRequest {
    std::string method;  // GET, POST, PUT, DELETE
    std::string path;    // including the /api/v1 prefix
    std::map<std::string, std::string> query;
    std::string body;
};

struct ApiResponse {
    int status = 200;
    Json body;
};

// Transport-free request handler. Each uploaded dataset gets a session whose
// id doubles as the dataset id ("d1", "d2", ...). Instances are views of a
// session ("d1-v2") and tours live there too ("d1-t1"); every mutating call is
// an operation in that session's log.
class Api {
public:
    explicit Api(std::size_t cache_capacity = kCacheCapacity, Session::Clock clock = nullptr);

    ApiResponse handle(const ApiRequest& req);
    PrecomputeCache& cache() { return *cache_; }

private:
    struct Entry {
        std::mutex mutex;  // one writer per session
        std::unique_ptr<Session> session;
    };
    std::shared_ptr<Entry> find(const std::string& id);
    std::string create(std::unique_ptr<Session> s, const std::string& id = {});
    ApiResponse route(const ApiRequest& req);

    std::shared_ptr<PrecomputeCache> cache_;
    Session::Clock clock_;
    std::mutex mutex_;
    std::map<std::string, std::shared_ptr<Entry>> sessions_;
    std::uint64_t next_id_ = 1;
};

// HTTP front end for an Api. Binding happens in the constructor so a busy
// port fails fast with PortInUse; port 0 picks a free port.
class HttpServer {
public:
    HttpServer(Api& api, const std::string& host, int port);
    ~HttpServer();
    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    int port() const { return port_; }
    void start();  // serve on a background thread
    void run();    // serve on the calling thread until stop()
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    int port_ = 0;
    std::thread thread_;
};

}  // namespace ctour
