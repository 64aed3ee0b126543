#include "destigma/prompt.hpp"

#include "destigma/error.hpp"
#include "destigma/hashing.hpp"

#include <fstream>
#include <sstream>
#include <string_view>
#include <vector>

namespace destigma {

namespace {

enum class TagKind { Slot, Open, OpenInverted, Close };

struct Tag {
    TagKind kind;
    std::string name;
    std::size_t begin;  // offset of "{{"
    std::size_t end;    // offset just past "}}"
};

std::vector<Tag> scan_tags(const std::string& body, const std::string& id) {
    std::vector<Tag> tags;
    std::size_t pos = 0;
    while ((pos = body.find("{{", pos)) != std::string::npos) {
        const auto close = body.find("}}", pos + 2);
        if (close == std::string::npos) {
            throw Error(Errc::Config, "unterminated placeholder in template " + id);
        }
        std::string inner = body.substr(pos + 2, close - pos - 2);
        TagKind kind = TagKind::Slot;
        if (!inner.empty() && (inner[0] == '#' || inner[0] == '^' || inner[0] == '/')) {
            kind = inner[0] == '#' ? TagKind::Open : inner[0] == '^' ? TagKind::OpenInverted : TagKind::Close;
            inner.erase(0, 1);
        }
        if (inner.empty()) {
            throw Error(Errc::Config, "empty placeholder in template " + id);
        }
        tags.push_back({kind, inner, pos, close + 2});
        pos = close + 2;
    }
    return tags;
}

bool bound_nonempty(const SlotMap& slots, const std::string& name) {
    const auto it = slots.find(name);
    return it != slots.end() && !it->second.empty();
}

// Appends `piece`, separating any pair of adjacent '{' so no new "{{" forms,
// including across the boundary with what is already in `out`.
void append_defanged(std::string& out, std::string_view piece) {
    for (const char ch : piece) {
        if (ch == '{' && !out.empty() && out.back() == '{') {
            out.push_back(' ');
        }
        out.push_back(ch);
    }
}

}  // namespace

PromptTemplate::PromptTemplate(std::string template_id, std::string body)
    : id_(std::move(template_id)), body_(std::move(body)), hash_(sha256_hex(body_)) {
    std::vector<std::string> open;
    for (const auto& tag : scan_tags(body_, id_)) {
        switch (tag.kind) {
        case TagKind::Slot:
            if (open.empty()) {
                required_.insert(tag.name);
            }
            break;
        case TagKind::Open:
        case TagKind::OpenInverted:
            open.push_back(tag.name);
            break;
        case TagKind::Close:
            if (open.empty() || open.back() != tag.name) {
                throw Error(Errc::Config, "mismatched section {{/" + tag.name + "}} in template " + id_);
            }
            open.pop_back();
            break;
        }
    }
    if (!open.empty()) {
        throw Error(Errc::Config, "unclosed section " + open.back() + " in template " + id_);
    }
}

std::string render_prompt(const PromptTemplate& tpl, const SlotMap& slots) {
    const auto& body = tpl.body();
    const auto tags = scan_tags(body, tpl.id());
    std::string out;
    out.reserve(body.size() * 2);

    // Depth of sections currently suppressed; text is emitted only at zero.
    std::size_t skip_depth = 0;
    std::size_t cursor = 0;
    for (const auto& tag : tags) {
        if (skip_depth == 0) {
            append_defanged(out, std::string_view(body).substr(cursor, tag.begin - cursor));
        }
        cursor = tag.end;
        switch (tag.kind) {
        case TagKind::Slot:
            if (skip_depth == 0) {
                const auto it = slots.find(tag.name);
                if (it == slots.end()) {
                    throw Error(Errc::MissingSlot, tag.name);
                }
                append_defanged(out, it->second);
            }
            break;
        case TagKind::Open:
        case TagKind::OpenInverted: {
            const bool keep = (tag.kind == TagKind::Open) == bound_nonempty(slots, tag.name);
            if (skip_depth > 0 || !keep) {
                ++skip_depth;
            }
            break;
        }
        case TagKind::Close:
            if (skip_depth > 0) {
                --skip_depth;
            }
            break;
        }
    }
    if (skip_depth == 0) {
        append_defanged(out, std::string_view(body).substr(cursor));
    }
    return out;
}

void TemplateLibrary::load_dir(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) {
        throw Error(Errc::Config, "template directory not found: " + dir.string());
    }
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".txt") {
            continue;
        }
        std::ifstream in(entry.path(), std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        add(PromptTemplate(entry.path().stem().string(), ss.str()));
    }
}

void TemplateLibrary::add(PromptTemplate tpl) {
    const auto id = tpl.id();
    templates_.insert_or_assign(id, std::move(tpl));
}

const PromptTemplate& TemplateLibrary::get(const std::string& id) const {
    const auto it = templates_.find(id);
    if (it == templates_.end()) {
        throw Error(Errc::UnknownTemplate, id);
    }
    return it->second;
}

}  // namespace destigma
