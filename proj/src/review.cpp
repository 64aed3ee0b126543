#include "destigma/review.hpp"

#include "destigma/error.hpp"
#include "destigma/hashing.hpp"
#include "destigma/stage_store.hpp"
#include "destigma/text.hpp"

#include <httplib.h>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <numeric>

namespace destigma {

namespace fs = std::filesystem;
using nlohmann::json;

std::size_t TaskSet::candidate_count() const {
    std::size_t n = 0;
    for (const auto& t : tasks) {
        n += t.candidates.size();
    }
    return n;
}

BlindingMap TaskSet::blinding() const {
    BlindingMap m;
    for (const auto& t : tasks) {
        m[t.task_id] = t.blinding;
    }
    return m;
}

void to_json(json& j, const TaskSet& t) {
    auto tasks = json::array();
    for (const auto& task : t.tasks) {
        auto candidates = json::array();
        for (const auto& c : task.candidates) {
            candidates.push_back({{"blinded_id", c.blinded_id}, {"text", c.text}});
        }
        tasks.push_back({{"task_id", task.task_id},
                         {"post_id", task.post_id},
                         {"original", task.original},
                         {"candidates", candidates},
                         {"blinding", task.blinding}});
    }
    j = json{{"seed", t.seed}, {"systems", t.systems}, {"tasks", tasks}};
}

void from_json(const json& j, TaskSet& t) {
    j.at("seed").get_to(t.seed);
    j.at("systems").get_to(t.systems);
    t.tasks.clear();
    for (const auto& jt : j.at("tasks")) {
        EvalTask task;
        jt.at("task_id").get_to(task.task_id);
        task.post_id = jt.value("post_id", "");
        jt.at("original").get_to(task.original);
        for (const auto& c : jt.at("candidates")) {
            task.candidates.push_back({c.at("blinded_id").get<std::string>(), c.at("text").get<std::string>()});
        }
        jt.at("blinding").get_to(task.blinding);
        t.tasks.push_back(std::move(task));
    }
}

json task_payload(const EvalTask& task) {
    auto candidates = json::array();
    for (const auto& c : task.candidates) {
        candidates.push_back({{"blinded_id", c.blinded_id}, {"text", c.text}});
    }
    return json{{"task_id", task.task_id}, {"original", task.original}, {"candidates", candidates}};
}

std::string blinded_id(std::uint64_t seed, const std::string& task_id, const std::string& system) {
    return "c-" + sha256_hex(fmt::format("{}\x1f{}\x1f{}", seed, task_id, system)).substr(0, 10);
}

TaskSet sample_eval_tasks(const std::vector<PairRecord>& pairs, std::size_t n, std::uint64_t seed,
                          std::vector<std::string> systems) {
    std::vector<std::size_t> complete;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        if (pairs[i].complete()) {
            complete.push_back(i);
        }
    }
    if (complete.size() < n) {
        throw Error(Errc::InsufficientPairs, fmt::format("{} complete pair(s), {} requested", complete.size(), n));
    }
    if (systems.empty() && !complete.empty()) {
        for (const auto& [system, text] : pairs[complete.front()].rewrites) {
            systems.push_back(system);
        }
    }
    std::mt19937_64 rng(seed);
    seeded_shuffle(complete, rng);
    complete.resize(n);
    std::sort(complete.begin(), complete.end());

    TaskSet set;
    set.seed = seed;
    set.systems = systems;
    const int width = std::max<int>(3, static_cast<int>(std::to_string(n).size()));
    for (std::size_t k = 0; k < complete.size(); ++k) {
        const auto& pair = pairs[complete[k]];
        EvalTask task;
        task.task_id = fmt::format("t-{:0{}}", k + 1, width);
        task.post_id = pair.post_id;
        task.original = pair.original;
        auto order = systems;
        seeded_shuffle(order, rng);
        for (const auto& system : order) {
            const auto it = pair.rewrites.find(system);
            if (it == pair.rewrites.end()) {
                throw Error(Errc::InsufficientPairs, "pair " + pair.post_id + " lacks system " + system);
            }
            const auto id = blinded_id(seed, task.task_id, system);
            task.candidates.push_back({id, it->second});
            task.blinding[id] = system;
        }
        set.tasks.push_back(std::move(task));
    }
    return set;
}

std::optional<Assignment> parse_assignment(std::string_view name) {
    const auto key = text::to_lower_ascii(name);
    if (key == "exclusive") return Assignment::Exclusive;
    if (key == "overlapping" || key == "overlap") return Assignment::Overlapping;
    return std::nullopt;
}

ReviewStore::ReviewStore(TaskSet tasks, fs::path judgment_log, Assignment assignment)
    : tasks_(std::move(tasks)), log_path_(std::move(judgment_log)), assignment_(assignment) {
    for (std::size_t i = 0; i < tasks_.tasks.size(); ++i) {
        index_[tasks_.tasks[i].task_id] = i;
    }
    if (std::ifstream in(log_path_); in) {
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (text::trim(line).empty()) {
                continue;
            }
            const auto j = json::parse(line, nullptr, false);
            if (j.is_discarded()) {
                spdlog::warn("{}:{}: unreadable judgment skipped", log_path_.string(), line_no);
                continue;
            }
            try {
                const auto judgment = j.get<Judgment>();
                validate(judgment);
                record(judgment);
            } catch (const std::exception& e) {
                spdlog::warn("{}:{}: judgment skipped on replay: {}", log_path_.string(), line_no, e.what());
            }
        }
    }
    if (!log_path_.parent_path().empty()) {
        fs::create_directories(log_path_.parent_path());
    }
    log_.open(log_path_, std::ios::app | std::ios::binary);
    if (!log_) {
        throw Error(Errc::Io, "cannot append to " + log_path_.string());
    }
}

ReviewStore ReviewStore::open(const fs::path& tasks_file, const fs::path& judgment_log, Assignment assignment) {
    std::ifstream in(tasks_file);
    if (!in) {
        throw Error(Errc::Io, "cannot read task file " + tasks_file.string());
    }
    const auto j = json::parse(in, nullptr, false);
    if (j.is_discarded()) {
        throw Error(Errc::MalformedInput, tasks_file.string() + " is not valid JSON");
    }
    return ReviewStore(j.get<TaskSet>(), judgment_log, assignment);
}

void ReviewStore::validate(const Judgment& j) const {
    const auto it = index_.find(j.task_id);
    if (it == index_.end()) {
        throw Error(Errc::UnknownTask, j.task_id);
    }
    if (text::trim(j.reviewer_id).empty()) {
        throw Error(Errc::InvalidCandidate, "judgment without reviewer id");
    }
    const auto& blinding = tasks_.tasks[it->second].blinding;
    for (const auto* pick : {&j.best_quality, &j.most_destigmatized, &j.most_faithful}) {
        if (!pick->empty() && blinding.count(*pick) == 0) {
            throw Error(Errc::InvalidCandidate, "'" + *pick + "' is not a candidate of " + j.task_id);
        }
    }
    if (judged_.count({j.task_id, j.reviewer_id}) > 0) {
        throw Error(Errc::DuplicateJudgment, j.reviewer_id + " already judged " + j.task_id);
    }
}

void ReviewStore::record(const Judgment& j) {
    judgments_.push_back(j);
    judged_.insert({j.task_id, j.reviewer_id});
    assigned_.emplace(j.task_id, j.reviewer_id);
}

std::optional<json> ReviewStore::next_task(const std::string& reviewer) {
    std::lock_guard lock(mu_);
    for (const auto& task : tasks_.tasks) {
        if (judged_.count({task.task_id, reviewer}) > 0) {
            continue;
        }
        if (assignment_ == Assignment::Exclusive) {
            const auto it = assigned_.find(task.task_id);
            if (it != assigned_.end() && it->second != reviewer) {
                continue;
            }
            assigned_.emplace(task.task_id, reviewer);
        }
        return task_payload(task);
    }
    return std::nullopt;
}

Judgment ReviewStore::submit(Judgment judgment) {
    std::lock_guard lock(mu_);
    validate(judgment);
    if (judgment.submitted_at.empty()) {
        judgment.submitted_at = utc_timestamp();
    }
    log_ << json(judgment).dump() << '\n';
    log_.flush();
    if (!log_) {
        throw Error(Errc::Io, "failed to append judgment to " + log_path_.string());
    }
    record(judgment);
    return judgment;
}

RankingTally ReviewStore::results() const {
    std::lock_guard lock(mu_);
    return tally_rankings(judgments_, tasks_.blinding(), tasks_.systems);
}

json ReviewStore::progress() const {
    std::lock_guard lock(mu_);
    std::map<std::string, std::size_t> per_reviewer;
    std::set<std::string> judged_tasks;
    for (const auto& j : judgments_) {
        ++per_reviewer[j.reviewer_id];
        judged_tasks.insert(j.task_id);
    }
    return json{{"total", tasks_.tasks.size()},
                {"judged_tasks", judged_tasks.size()},
                {"judgments", judgments_.size()},
                {"judged_by_reviewer", per_reviewer}};
}

std::vector<Judgment> ReviewStore::judgments() const {
    std::lock_guard lock(mu_);
    return judgments_;
}

namespace {

constexpr const char* kPlaceholderPage =
    "<!doctype html><html><head><meta charset=\"utf-8\"><title>Review</title></head>"
    "<body><p>The review UI bundle is not installed. The JSON API is available under /api/.</p></body></html>";

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

std::string reviewer_of(const httplib::Request& req) {
    if (req.has_param("reviewer")) {
        return req.get_param_value("reviewer");
    }
    return req.get_header_value("X-Reviewer");
}

}  // namespace

ReviewServer::ReviewServer(ReviewStore& store, std::optional<fs::path> static_dir)
    : store_(store), server_(std::make_unique<httplib::Server>()) {
    auto& srv = *server_;
    srv.Get("/api/tasks/next", [this](const httplib::Request& req, httplib::Response& res) {
        const auto reviewer = text::trim(reviewer_of(req));
        if (reviewer.empty()) {
            send_json(res, 400, {{"error", "reviewer is required"}});
            return;
        }
        if (auto task = store_.next_task(reviewer)) {
            send_json(res, 200, *task);
        } else {
            send_json(res, 200, {{"done", true}});
        }
    });
    srv.Post("/api/judgments", [this](const httplib::Request& req, httplib::Response& res) {
        const auto body = json::parse(req.body, nullptr, false);
        if (body.is_discarded() || !body.is_object()) {
            send_json(res, 422, {{"error", "MalformedInput"}, {"detail", "body must be a JSON object"}});
            return;
        }
        Judgment j;
        try {
            auto with_reviewer = body;
            if (!with_reviewer.contains("reviewer_id")) {
                with_reviewer["reviewer_id"] = reviewer_of(req);
            }
            j = with_reviewer.get<Judgment>();
        } catch (const json::exception& e) {
            send_json(res, 422, {{"error", "MalformedInput"}, {"detail", e.what()}});
            return;
        }
        j.submitted_at.clear();
        try {
            const auto stored = store_.submit(std::move(j));
            send_json(res, 201, {{"status", "stored"}, {"task_id", stored.task_id}});
        } catch (const Error& e) {
            const int status = e.code() == Errc::DuplicateJudgment ? 409 : e.code() == Errc::Io ? 500 : 422;
            send_json(res, status, {{"error", std::string(errc_name(e.code()))}, {"detail", e.detail()}});
        }
    });
    srv.Get("/api/results", [this](const httplib::Request&, httplib::Response& res) {
        send_json(res, 200, store_.results().to_json());
    });
    srv.Get("/api/progress", [this](const httplib::Request&, httplib::Response& res) {
        send_json(res, 200, store_.progress());
    });
    if (static_dir && fs::is_directory(*static_dir)) {
        srv.set_mount_point("/", static_dir->string());
    } else {
        srv.Get("/", [](const httplib::Request&, httplib::Response& res) {
            res.set_content(kPlaceholderPage, "text/html");
        });
    }
}

ReviewServer::~ReviewServer() { stop(); }

int ReviewServer::bind(const std::string& host, int port) {
    if (port == 0) {
        return server_->bind_to_any_port(host);
    }
    return server_->bind_to_port(host, port) ? port : -1;
}

bool ReviewServer::serve() { return server_->listen_after_bind(); }

void ReviewServer::stop() {
    if (server_ && server_->is_running()) {
        server_->stop();
    }
}

void ReviewServer::wait_until_ready() const { server_->wait_until_ready(); }

}  // namespace destigma
