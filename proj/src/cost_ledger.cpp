#include "destigma/cost_ledger.hpp"

#include "destigma/error.hpp"
#include "destigma/gateway.hpp"

namespace destigma {

using nlohmann::json;

const TokenRate& RateTable::rate_for(const std::string& model_id) const {
    if (const auto it = per_model.find(model_id); it != per_model.end()) {
        return it->second;
    }
    if (fallback) {
        return *fallback;
    }
    throw Error(Errc::UnknownModelRate, model_id);
}

void from_json(const json& j, RateTable& t) {
    for (const auto& [model, rate] : j.items()) {
        TokenRate r{rate.value("input_per_1k", 0.0), rate.value("output_per_1k", 0.0)};
        if (model == "default") {
            t.fallback = r;
        } else {
            t.per_model[model] = r;
        }
    }
}

CostLedger::CostLedger(const CostLedger& other) {
    std::lock_guard lock(other.mu_);
    usage_ = other.usage_;
}

CostLedger& CostLedger::operator=(const CostLedger& other) {
    if (this != &other) {
        std::scoped_lock lock(mu_, other.mu_);
        usage_ = other.usage_;
    }
    return *this;
}

void CostLedger::add(const std::string& model_id, const ModelUsage& delta) {
    std::lock_guard lock(mu_);
    auto& u = usage_[model_id];
    u.request_count += delta.request_count;
    u.prompt_tokens += delta.prompt_tokens;
    u.completion_tokens += delta.completion_tokens;
    u.usd_estimate += delta.usd_estimate;
}

ModelUsage CostLedger::usage(const std::string& model_id) const {
    std::lock_guard lock(mu_);
    const auto it = usage_.find(model_id);
    return it == usage_.end() ? ModelUsage{} : it->second;
}

ModelUsage CostLedger::total() const {
    std::lock_guard lock(mu_);
    ModelUsage t;
    for (const auto& [_, u] : usage_) {
        t.request_count += u.request_count;
        t.prompt_tokens += u.prompt_tokens;
        t.completion_tokens += u.completion_tokens;
        t.usd_estimate += u.usd_estimate;
    }
    return t;
}

std::map<std::string, ModelUsage> CostLedger::snapshot() const {
    std::lock_guard lock(mu_);
    return usage_;
}

json CostLedger::to_json() const {
    json out = json::object();
    for (const auto& [model, u] : snapshot()) {
        out[model] = {{"request_count", u.request_count},
                      {"prompt_tokens", u.prompt_tokens},
                      {"completion_tokens", u.completion_tokens},
                      {"usd_estimate", u.usd_estimate}};
    }
    return out;
}

void record_cost(CostLedger& ledger, const Completion& completion, const RateTable& rates) {
    const auto& rate = rates.rate_for(completion.model_id);
    ModelUsage delta;
    delta.request_count = 1;
    delta.prompt_tokens = static_cast<std::uint64_t>(std::max<std::int64_t>(0, completion.prompt_tokens));
    delta.completion_tokens = static_cast<std::uint64_t>(std::max<std::int64_t>(0, completion.completion_tokens));
    delta.usd_estimate = static_cast<double>(delta.prompt_tokens) / 1000.0 * rate.input_per_1k +
                         static_cast<double>(delta.completion_tokens) / 1000.0 * rate.output_per_1k;
    ledger.add(completion.model_id, delta);
}

}  // namespace destigma
