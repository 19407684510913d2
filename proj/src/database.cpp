#include "promptdag/database.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "promptdag/errors.hpp"

namespace promptdag {

std::string render_value_text(const Json& value) {
    switch (value.type()) {
        case Json::value_t::string:
            return value.get<std::string>();
        case Json::value_t::boolean:
            return value.get<bool>() ? "true" : "false";
        case Json::value_t::number_integer:
        case Json::value_t::number_unsigned:
            return value.dump();
        case Json::value_t::number_float: {
            double d = value.get<double>();
            if (std::floor(d) == d && std::abs(d) < 1e15) {
                // integral value stored as float: no trailing ".0"
                return std::to_string(static_cast<long long>(d));
            }
            std::ostringstream os;
            os << d;
            return os.str();
        }
        case Json::value_t::null:
            return "";
        default:
            // maps and lists: compact canonical JSON (sorted keys)
            return value.dump();
    }
}

std::vector<std::string> split_db_path(const std::string& path) {
    if (path.empty()) throw Error("empty database path");
    std::vector<std::string> segments;
    std::string current;
    for (char c : path) {
        if (c == '.') {
            if (current.empty()) throw Error("empty segment in database path: " + path);
            segments.push_back(current);
            current.clear();
        } else {
            current += c;
        }
    }
    if (current.empty()) throw Error("empty segment in database path: " + path);
    segments.push_back(current);
    return segments;
}

Json StepSummary::to_json() const {
    return Json{{"step", step}, {"s_obs", s_obs}, {"s_plan", s_plan},
                {"s_action", s_action}, {"skill", skill}};
}

StepSummary StepSummary::from_json(const Json& j) {
    StepSummary s;
    s.step = j.at("step").get<std::int64_t>();
    s.s_obs = j.at("s_obs").get<std::string>();
    s.s_plan = j.at("s_plan").get<std::string>();
    s.s_action = j.at("s_action");
    s.skill = j.at("skill").get<std::string>();
    return s;
}

const Json* Database::get(const std::string& path) const {
    const Json* cursor = &root_;
    for (const auto& segment : split_db_path(path)) {
        if (!cursor->is_object()) return nullptr;
        auto it = cursor->find(segment);
        if (it == cursor->end()) return nullptr;
        cursor = &*it;
    }
    return cursor;
}

void Database::set(const std::string& path, Json value) {
    auto segments = split_db_path(path);
    Json* cursor = &root_;
    for (std::size_t i = 0; i + 1 < segments.size(); ++i) {
        Json& slot = (*cursor)[segments[i]];
        if (slot.is_null()) slot = Json::object();
        if (!slot.is_object()) {
            throw Error("database path '" + path + "' collides with non-map value at '" +
                        segments[i] + "'");
        }
        cursor = &slot;
    }
    (*cursor)[segments.back()] = std::move(value);
}

void Database::erase(const std::string& path) {
    auto segments = split_db_path(path);
    Json* cursor = &root_;
    for (std::size_t i = 0; i + 1 < segments.size(); ++i) {
        if (!cursor->is_object()) return;
        auto it = cursor->find(segments[i]);
        if (it == cursor->end()) return;
        cursor = &*it;
    }
    if (cursor->is_object()) cursor->erase(segments.back());
}

// Placeholder grammar: '$db.' path '$' with path made of non-empty
// dot-separated segments of [A-Za-z0-9_-].
std::optional<std::pair<std::string, std::size_t>> match_db_placeholder(const std::string& text,
                                                                        std::size_t pos) {
    static const std::string prefix = "$db.";
    if (text.compare(pos, prefix.size(), prefix) != 0) return std::nullopt;
    std::size_t i = pos + prefix.size();
    std::string path;
    bool segment_open = false;
    while (i < text.size()) {
        char c = text[i];
        if (c == '$') {
            if (path.empty() || !segment_open) return std::nullopt;
            return std::make_pair(path, i + 1 - pos);
        }
        bool word = std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
        if (word) {
            path += c;
            segment_open = true;
        } else if (c == '.') {
            if (!segment_open) return std::nullopt;
            path += c;
            segment_open = false;
        } else {
            return std::nullopt;
        }
        ++i;
    }
    return std::nullopt;
}

std::string Database::resolve_template(const std::string& text, TemplateMode mode,
                                       std::vector<std::string>* warnings) const {
    std::string out;
    out.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size()) {
        char c = text[i];
        if (c != '$') {
            out += c;
            ++i;
            continue;
        }
        if (i + 1 < text.size() && text[i + 1] == '$') {
            out += '$';
            i += 2;
            continue;
        }
        if (auto m = match_db_placeholder(text, i)) {
            const auto& [path, consumed] = *m;
            if (const Json* value = get(path)) {
                out += render_value_text(*value);
            } else if (mode == TemplateMode::Strict) {
                throw UnresolvedTemplateKeyError(path);
            } else {
                if (warnings) warnings->push_back(path);
            }
            i += consumed;
            continue;
        }
        // bare '$' that is not a placeholder passes through
        out += '$';
        ++i;
    }
    return out;
}

std::vector<std::string> extract_template_keys(const std::string& text) {
    std::vector<std::string> keys;
    std::size_t i = 0;
    while (i < text.size()) {
        if (text[i] != '$') {
            ++i;
            continue;
        }
        if (i + 1 < text.size() && text[i + 1] == '$') {
            i += 2;
            continue;
        }
        if (auto m = match_db_placeholder(text, i)) {
            keys.push_back(m->first);
            i += m->second;
        } else {
            ++i;
        }
    }
    return keys;
}

void Database::push_step(const StepSummary& summary) {
    Json& history = root_["history"];
    if (history.is_null()) history = Json::array();
    if (!history.is_array()) throw Error("reserved subtree 'history' is not a list");
    if (!history.empty()) {
        auto last = StepSummary::from_json(history.back());
        if (summary.step <= last.step) {
            throw Error("history steps must be strictly increasing: " +
                        std::to_string(summary.step) + " after " + std::to_string(last.step));
        }
    }
    history.push_back(summary.to_json());
    while (history.size() > history_cap_) history.erase(history.begin());
}

std::vector<StepSummary> Database::window_history(std::int64_t window) const {
    std::vector<StepSummary> out;
    const Json* history = get("history");
    if (!history || !history->is_array() || window < 1) return out;
    std::size_t n = history->size();
    std::size_t take = std::min<std::size_t>(n, static_cast<std::size_t>(window));
    for (std::size_t i = n - take; i < n; ++i) out.push_back(StepSummary::from_json((*history)[i]));
    return out;
}

bool Database::skill_known(const std::string& skill) const {
    const Json* library = get("skills.library");
    return library && library->is_object() && library->contains(skill);
}

std::vector<StepSummary> Database::skill_history(const std::string& skill) const {
    if (!skill_known(skill)) throw UnknownSkillError(skill);
    std::vector<StepSummary> out;
    const Json* history = get("history");
    if (!history || !history->is_array()) return out;
    for (const auto& entry : *history) {
        auto s = StepSummary::from_json(entry);
        if (s.skill == skill) out.push_back(std::move(s));
    }
    return out;
}

void Database::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw StorageError("cannot open for writing: " + path);
    out << root_.dump(2) << '\n';
    if (!out) throw StorageError("failed writing: " + path);
}

Database Database::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw StorageError("cannot open for reading: " + path);
    Json root;
    try {
        in >> root;
    } catch (const Json::exception& e) {
        throw StorageError("database snapshot '" + path + "' is not valid JSON: " + e.what());
    }
    if (!root.is_object()) throw StorageError("database snapshot must be a JSON object");
    return Database(std::move(root));
}

std::optional<Json> DbStage::get(const std::string& path) const {
    for (auto it = writes_.rbegin(); it != writes_.rend(); ++it) {
        if (it->path == path) return it->value;
    }
    if (const Json* v = db_->get(path)) return *v;
    return std::nullopt;
}

void DbStage::commit(Database& db) const {
    for (const auto& w : writes_) db.set(w.path, w.value);
    for (const auto& s : steps_) db.push_step(s);
}

}  // namespace promptdag
