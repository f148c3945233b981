#pragma once

#include "reviver/runtime.hpp"

#include <filesystem>
#include <memory>
#include <string>

namespace reviver {

struct ServiceConfig {
    std::filesystem::path store_dir = "reviver-store";
    RuntimeSettings settings;
    int build_workers = 2;
};

// JSON-over-HTTP session service. Manifests, trees and sessions live under
// store_dir, so a restarted service resumes existing sessions. Image bytes
// are never copied into the store.
class ReviverService {
public:
    explicit ReviverService(ServiceConfig config);
    ~ReviverService();
    ReviverService(const ReviverService&) = delete;
    ReviverService& operator=(const ReviverService&) = delete;

    // port 0 picks a free port. Returns the bound port, or -1.
    int bind(const std::string& host, int port);
    // Blocks until stop().
    bool run();
    void stop();
    bool wait_until_ready() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace reviver
