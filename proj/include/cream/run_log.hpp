#pragma once

#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "cream/time.hpp"
#include "cream/transport.hpp"

namespace cream {

enum class RunStatus { Running, Succeeded, Failed };
std::string_view to_string(RunStatus status);
RunStatus parse_run_status(std::string_view name);

struct RunRecord {
    std::string run_id;
    std::string kind;
    std::string config_digest;
    std::string inputs_digest;
    std::string outputs_location;
    std::string outputs_digest;
    Instant started_at{};
    std::optional<Instant> finished_at;
    RunStatus status = RunStatus::Running;
    std::string error;
    /// Set when a failed run left some outputs behind.
    bool partial_outputs = false;

    json to_json() const;
    static RunRecord from_json(const json& j);
};

/// Append-only `runs.jsonl` under the state directory. A run is appended once
/// when it starts and once when it finishes; list() folds by run_id, keeping
/// the latest line.
class RunLog {
public:
    explicit RunLog(std::filesystem::path state_dir);

    RunRecord begin(std::string kind, std::string config_digest, std::string inputs_digest);
    void finish(RunRecord& record);
    std::vector<RunRecord> list() const;
    const std::filesystem::path& path() const { return path_; }

private:
    void append(const RunRecord& record);

    std::filesystem::path path_;
    mutable std::mutex mutex_;
};

/// Stores `content` at `<dir>/<sha256>.<ext>` (write-once) and returns the digest.
std::string store_artifact(const std::filesystem::path& dir, const std::string& content, const std::string& ext = "json");

/// SHA-256 over the sorted (relative path, file digest) listing of a directory.
std::string directory_digest(const std::filesystem::path& dir);

/// Exclusive lock file created with O_EXCL; a second holder gets Conflict.
class LockFile {
public:
    explicit LockFile(std::filesystem::path path, const std::string& owner = {});
    ~LockFile();
    LockFile(const LockFile&) = delete;
    LockFile& operator=(const LockFile&) = delete;

private:
    std::filesystem::path path_;
};

}  // namespace cream
