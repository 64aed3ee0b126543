#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>

namespace destigma {

using SlotMap = std::map<std::string, std::string>;

// A prompt body with `{{slot}}` placeholders. Two section forms are
// supported for optional blocks:
//   {{#slot}} ... {{/slot}}   kept only when `slot` is bound and non-empty
//   {{^slot}} ... {{/slot}}   kept only when `slot` is unbound or empty
// Placeholders outside any section are required; those inside a section are
// required only when the section is rendered.
class PromptTemplate {
public:
    PromptTemplate() = default;
    PromptTemplate(std::string template_id, std::string body);

    const std::string& id() const noexcept { return id_; }
    const std::string& body() const noexcept { return body_; }
    const std::set<std::string>& required_slots() const noexcept { return required_; }

    // sha256 of the body; recorded with every output the template produced.
    const std::string& hash() const noexcept { return hash_; }

private:
    std::string id_;
    std::string body_;
    std::set<std::string> required_;
    std::string hash_;
};

// Substitutes every placeholder. Extra slots are ignored. Any "{{" inside a
// slot value is broken up so the rendered text never contains a live
// placeholder. Throws Error(MissingSlot) naming the first unbound slot.
std::string render_prompt(const PromptTemplate& tpl, const SlotMap& slots);

class TemplateLibrary {
public:
    // Loads every `*.txt` file in `dir`; the file stem becomes the template id.
    // Files already registered under the same id are replaced.
    void load_dir(const std::filesystem::path& dir);
    void add(PromptTemplate tpl);

    bool contains(const std::string& id) const { return templates_.count(id) > 0; }
    const PromptTemplate& get(const std::string& id) const;

private:
    std::map<std::string, PromptTemplate> templates_;
};

}  // namespace destigma
