#include "cream/run_log.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <fstream>
#include <map>
#include <sstream>

#include "cream/error.hpp"
#include "cream/hashing.hpp"

namespace cream {

namespace fs = std::filesystem;

std::string_view to_string(RunStatus status) {
    switch (status) {
        case RunStatus::Running: return "running";
        case RunStatus::Succeeded: return "succeeded";
        case RunStatus::Failed: return "failed";
    }
    return "failed";
}

RunStatus parse_run_status(std::string_view name) {
    if (name == "running") return RunStatus::Running;
    if (name == "succeeded") return RunStatus::Succeeded;
    if (name == "failed") return RunStatus::Failed;
    throw Error(ErrorCode::ValidationError, "unknown run status '" + std::string(name) + "'");
}

json RunRecord::to_json() const {
    json j{{"run_id", run_id},
           {"kind", kind},
           {"config_digest", config_digest},
           {"inputs_digest", inputs_digest},
           {"outputs_location", outputs_location},
           {"outputs_digest", outputs_digest},
           {"started_at", format_rfc3339_utc(started_at)},
           {"finished_at", finished_at ? json(format_rfc3339_utc(*finished_at)) : json(nullptr)},
           {"status", std::string(to_string(status))},
           {"partial_outputs", partial_outputs}};
    if (!error.empty()) j["error"] = error;
    return j;
}

namespace {

Instant require_instant(const json& v) {
    auto t = parse_rfc3339(v.get<std::string>());
    if (!t) throw Error(ErrorCode::MalformedTimestamp, "bad run timestamp");
    return *t;
}

}  // namespace

RunRecord RunRecord::from_json(const json& j) {
    RunRecord r;
    r.run_id = j.at("run_id").get<std::string>();
    r.kind = j.at("kind").get<std::string>();
    r.config_digest = j.value("config_digest", "");
    r.inputs_digest = j.value("inputs_digest", "");
    r.outputs_location = j.value("outputs_location", "");
    r.outputs_digest = j.value("outputs_digest", "");
    r.started_at = require_instant(j.at("started_at"));
    if (j.contains("finished_at") && j["finished_at"].is_string()) {
        r.finished_at = require_instant(j["finished_at"]);
    }
    r.status = parse_run_status(j.at("status").get<std::string>());
    r.error = j.value("error", "");
    r.partial_outputs = j.value("partial_outputs", false);
    return r;
}

RunLog::RunLog(fs::path state_dir) : path_(std::move(state_dir) / "runs.jsonl") {}

RunRecord RunLog::begin(std::string kind, std::string config_digest, std::string inputs_digest) {
    static std::atomic<std::uint64_t> counter{0};
    RunRecord r;
    r.kind = std::move(kind);
    r.config_digest = std::move(config_digest);
    r.inputs_digest = std::move(inputs_digest);
    r.started_at = now_instant();
    const auto ticks = r.started_at.time_since_epoch().count();
    r.run_id = r.kind + "-" + sha256_hex(std::to_string(ticks) + ":" + std::to_string(::getpid()) + ":" +
                                          std::to_string(counter.fetch_add(1)) + ":" + r.inputs_digest)
                                   .substr(0, 16);
    append(r);
    return r;
}

void RunLog::finish(RunRecord& record) {
    record.finished_at = now_instant();
    append(record);
}

void RunLog::append(const RunRecord& record) {
    std::lock_guard lock(mutex_);
    if (!path_.parent_path().empty()) fs::create_directories(path_.parent_path());
    std::ofstream out(path_, std::ios::app);
    if (!out) throw Error(ErrorCode::Io, "cannot append to run log " + path_.string());
    out << record.to_json().dump() << '\n';
}

std::vector<RunRecord> RunLog::list() const {
    std::lock_guard lock(mutex_);
    std::vector<RunRecord> order;
    std::map<std::string, std::size_t> index;
    std::ifstream in(path_);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        RunRecord r;
        try {
            r = RunRecord::from_json(json::parse(line));
        } catch (const std::exception&) {
            continue;  // torn trailing line from a crashed writer
        }
        auto it = index.find(r.run_id);
        if (it == index.end()) {
            index.emplace(r.run_id, order.size());
            order.push_back(std::move(r));
        } else {
            order[it->second] = std::move(r);
        }
    }
    return order;
}

std::string store_artifact(const fs::path& dir, const std::string& content, const std::string& ext) {
    const std::string digest = sha256_hex(content);
    fs::create_directories(dir);
    const fs::path target = dir / (digest + "." + ext);
    if (fs::exists(target)) return digest;
    const fs::path tmp = dir / (digest + ".tmp" + std::to_string(::getpid()));
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw Error(ErrorCode::Io, "cannot write artifact " + tmp.string());
        out << content;
    }
    fs::rename(tmp, target);
    return digest;
}

std::string directory_digest(const fs::path& dir) {
    std::vector<std::pair<std::string, std::string>> entries;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        entries.emplace_back(fs::relative(e.path(), dir).generic_string(), sha256_file(e.path()));
    }
    std::sort(entries.begin(), entries.end());
    std::ostringstream listing;
    for (const auto& [name, digest] : entries) listing << name << '\t' << digest << '\n';
    return sha256_hex(listing.str());
}

LockFile::LockFile(fs::path path, const std::string& owner) : path_(std::move(path)) {
    if (!path_.parent_path().empty()) fs::create_directories(path_.parent_path());
    const int fd = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_EXCL, 0644);
    if (fd < 0) {
        throw Error(ErrorCode::Conflict, "another run holds " + path_.string());
    }
    const std::string body = owner + "\n";
    [[maybe_unused]] auto n = ::write(fd, body.data(), body.size());
    ::close(fd);
}

LockFile::~LockFile() {
    std::error_code ec;
    fs::remove(path_, ec);
}

}  // namespace cream
