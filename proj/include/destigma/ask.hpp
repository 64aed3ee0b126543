#pragma once

#include "destigma/gateway.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace destigma {

// A classification prompt answered through the gateway, with the raw text of
// every attempt kept for auditing.
template <class T>
struct Answer {
    std::optional<T> value;
    std::vector<std::string> raw_responses;
    std::string model_id;
};

// Sends `request`; when `parse` cannot read the completion, asks once more
// with `reask_suffix` appended to the rendered prompt. `value` stays empty
// if the second answer is unreadable as well.
template <class T, class Parse>
Answer<T> ask_with_reask(Gateway& gateway, const PromptRequest& request, const std::string& provider,
                         std::string_view reask_suffix, Parse&& parse) {
    Answer<T> answer;
    ChatRequest chat;
    chat.template_id = request.template_id;
    chat.prompt = gateway.render(request.template_id, request.slots);
    chat.model_id = request.model_id;
    chat.temperature = request.temperature;
    chat.max_tokens = request.max_tokens;
    for (int ask = 0; ask < 2; ++ask) {
        if (ask == 1) {
            chat.prompt += "\n\n";
            chat.prompt += reask_suffix;
        }
        const Completion c = gateway.complete_rendered(chat, provider);
        answer.raw_responses.push_back(c.text);
        answer.model_id = c.model_id;
        if (auto v = parse(c.text)) {
            answer.value = std::move(v);
            break;
        }
    }
    return answer;
}

}  // namespace destigma
