#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <string>

#include <json.hpp>

namespace destigma {

struct Completion;

// USD per 1,000 tokens.
struct TokenRate {
    double input_per_1k{0.0};
    double output_per_1k{0.0};
};

struct RateTable {
    std::map<std::string, TokenRate> per_model;
    std::optional<TokenRate> fallback;

    // Throws Error(UnknownModelRate) when neither the model nor a fallback is known.
    const TokenRate& rate_for(const std::string& model_id) const;
};

void from_json(const nlohmann::json& j, RateTable& t);

struct ModelUsage {
    std::uint64_t request_count{0};
    std::uint64_t prompt_tokens{0};
    std::uint64_t completion_tokens{0};
    double usd_estimate{0.0};
};

// Per-model usage counters. Only successful completions are recorded.
// Internally synchronized; counters never decrease.
class CostLedger {
public:
    CostLedger() = default;
    CostLedger(const CostLedger& other);
    CostLedger& operator=(const CostLedger& other);

    void add(const std::string& model_id, const ModelUsage& delta);

    ModelUsage usage(const std::string& model_id) const;
    ModelUsage total() const;
    std::map<std::string, ModelUsage> snapshot() const;

    nlohmann::json to_json() const;

private:
    mutable std::mutex mu_;
    std::map<std::string, ModelUsage> usage_;
};

void record_cost(CostLedger& ledger, const Completion& completion, const RateTable& rates);

}  // namespace destigma
