#pragma once

#include "destigma/evaluation.hpp"
#include "destigma/rewrite.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

namespace httplib {
class Server;
}

namespace destigma {

struct Candidate {
    std::string blinded_id;
    std::string text;
};

struct EvalTask {
    std::string task_id;
    std::string post_id;
    std::string original;
    std::vector<Candidate> candidates;           // presentation order
    std::map<std::string, std::string> blinding;  // blinded id -> system id; server side only
};

struct TaskSet {
    std::uint64_t seed{0};
    std::vector<std::string> systems;
    std::vector<EvalTask> tasks;

    std::size_t candidate_count() const;
    BlindingMap blinding() const;
};

// Full form including blinding maps, for the server-side task file.
void to_json(nlohmann::json& j, const TaskSet& t);
void from_json(const nlohmann::json& j, TaskSet& t);

// Reviewer-facing form: task id, original text and candidates only.
nlohmann::json task_payload(const EvalTask& task);

// Opaque candidate id derived from (seed, task, system).
std::string blinded_id(std::uint64_t seed, const std::string& task_id, const std::string& system);

// Fisher-Yates driven by the generator; identical seeds give identical orders.
template <class T>
void seeded_shuffle(std::vector<T>& items, std::mt19937_64& rng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        std::uniform_int_distribution<std::size_t> pick(0, i - 1);
        std::swap(items[i - 1], items[pick(rng)]);
    }
}

// Samples `n` complete pair records and builds one task per record with
// candidates in a seeded random order. `systems` defaults to the systems of
// the first complete record. Throws Error(InsufficientPairs) when fewer than
// `n` complete records exist.
TaskSet sample_eval_tasks(const std::vector<PairRecord>& pairs, std::size_t n, std::uint64_t seed,
                          std::vector<std::string> systems = {});

enum class Assignment { Exclusive, Overlapping };

std::optional<Assignment> parse_assignment(std::string_view name);

// Task queue and append-only judgment log. Thread safe.
class ReviewStore {
public:
    // Replays `judgment_log` if it exists; new judgments are appended to it.
    ReviewStore(TaskSet tasks, std::filesystem::path judgment_log, Assignment assignment = Assignment::Exclusive);

    static ReviewStore open(const std::filesystem::path& tasks_file, const std::filesystem::path& judgment_log,
                            Assignment assignment = Assignment::Exclusive);

    // Lowest-index task this reviewer may judge next, or nullopt when done.
    // Under exclusive assignment a task handed to one reviewer is not handed
    // to another.
    std::optional<nlohmann::json> next_task(const std::string& reviewer);

    // Throws Error(UnknownTask), Error(InvalidCandidate) or
    // Error(DuplicateJudgment). Fills submitted_at when empty.
    Judgment submit(Judgment judgment);

    RankingTally results() const;
    nlohmann::json progress() const;
    std::vector<Judgment> judgments() const;

    const TaskSet& tasks() const noexcept { return tasks_; }

private:
    void validate(const Judgment& j) const;
    void record(const Judgment& j);

    TaskSet tasks_;
    std::map<std::string, std::size_t> index_;
    std::filesystem::path log_path_;
    Assignment assignment_;
    mutable std::mutex mu_;
    std::vector<Judgment> judgments_;
    std::set<std::pair<std::string, std::string>> judged_;  // (task, reviewer)
    std::map<std::string, std::string> assigned_;            // task -> reviewer
    std::ofstream log_;
};

// HTTP front end over a ReviewStore.
//   GET  /api/tasks/next?reviewer=R  -> task payload or {"done": true}
//   POST /api/judgments              -> 201, 409 duplicate, 422 invalid
//   GET  /api/results                -> unblinded tally
//   GET  /api/progress               -> {total, judged_by_reviewer}
//   GET  /                           -> static review UI, if a directory is given
class ReviewServer {
public:
    ReviewServer(ReviewStore& store, std::optional<std::filesystem::path> static_dir = std::nullopt);
    ~ReviewServer();

    ReviewServer(const ReviewServer&) = delete;
    ReviewServer& operator=(const ReviewServer&) = delete;

    // Binds; port 0 picks a free port. Returns the bound port or -1.
    int bind(const std::string& host, int port);
    // Blocks serving requests until stop().
    bool serve();
    void stop();
    void wait_until_ready() const;

private:
    ReviewStore& store_;
    std::unique_ptr<httplib::Server> server_;
};

}  // namespace destigma
