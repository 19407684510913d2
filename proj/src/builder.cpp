#include "promptdag/builder.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <istream>
#include <ostream>
#include <sstream>

namespace promptdag {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_words(const std::string& s) {
    std::istringstream in(s);
    std::vector<std::string> words;
    std::string word;
    while (in >> word) words.push_back(word);
    return words;
}

}  // namespace

BuilderSession::BuilderSession(std::istream& in, std::ostream& out,
                               std::vector<std::string> known_hooks,
                               std::vector<std::string> known_compose_tags)
    : in_(in),
      out_(out),
      known_hooks_(std::move(known_hooks)),
      known_compose_tags_(std::move(known_compose_tags)) {}

std::string BuilderSession::ask(const std::string& prompt) {
    out_ << prompt;
    out_.flush();
    std::string line;
    if (!std::getline(in_, line)) {
        eof_ = true;
        return "";
    }
    return trim(line);
}

std::string BuilderSession::read_multiline(const std::string& prompt) {
    out_ << prompt << " (finish with a line containing only '.'):\n";
    std::string text;
    std::string line;
    while (std::getline(in_, line)) {
        if (trim(line) == ".") return text;
        if (!text.empty()) text += "\n";
        text += line;
    }
    eof_ = true;
    return text;
}

NodeDef* BuilderSession::find_node(const std::string& id) {
    for (auto& def : spec_.nodes)
        if (def.id == id) return &def;
    return nullptr;
}

void BuilderSession::snapshot() {
    undo_.push_back(spec_);
    dirty_ = true;
}

void BuilderSession::cmd_add() {
    std::string id;
    while (!eof_) {
        id = ask("node id: ");
        if (id.empty()) {
            out_ << "  a node needs a non-empty id.\n";
            continue;
        }
        if (find_node(id)) {
            out_ << "  '" << id << "' already exists; pick another id.\n";
            continue;
        }
        break;
    }
    if (eof_) return;

    NodeDef def;
    def.id = id;
    def.prompt = read_multiline("prompt");
    if (eof_) return;

    while (!eof_) {
        std::string deps = ask("dependencies (space-separated ids, empty for none): ");
        std::vector<std::string> list = split_words(deps);
        bool ok = true;
        std::vector<std::string> accepted;
        for (const std::string& dep : list) {
            if (dep == id) {
                out_ << "  '" << id << "' cannot depend on itself.\n";
                ok = false;
                break;
            }
            if (!find_node(dep)) {
                out_ << "  no node named '" << dep << "' yet; add it first.\n";
                ok = false;
                break;
            }
            if (std::find(accepted.begin(), accepted.end(), dep) != accepted.end()) {
                out_ << "  '" << dep << "' listed twice.\n";
                ok = false;
                break;
            }
            accepted.push_back(dep);
        }
        if (ok) {
            def.deps = std::move(accepted);
            break;
        }
    }
    if (eof_) return;

    while (!eof_) {
        std::string hook = ask("after-query hook (empty for none): ");
        if (hook.empty() ||
            std::find(known_hooks_.begin(), known_hooks_.end(), hook) != known_hooks_.end()) {
            def.after_query = hook;
            break;
        }
        out_ << "  unknown hook '" << hook << "'. known:";
        for (const auto& h : known_hooks_) out_ << " " << h;
        out_ << "\n";
    }
    if (eof_) return;

    std::string model = ask("model profile (empty for default): ");
    if (eof_) return;
    if (!model.empty()) def.model = model;

    snapshot();
    spec_.nodes.push_back(std::move(def));
    out_ << "added '" << id << "'.\n";
}

void BuilderSession::cmd_edit() {
    std::string id = ask("node id: ");
    NodeDef* def = find_node(id);
    if (!def) {
        out_ << "  no node named '" << id << "'.\n";
        return;
    }
    std::string prompt = read_multiline("new prompt");
    if (eof_) return;
    snapshot();
    find_node(id)->prompt = prompt;
    out_ << "updated prompt of '" << id << "'.\n";
}

void BuilderSession::cmd_deps() {
    std::string id = ask("node id: ");
    NodeDef* def = find_node(id);
    if (!def) {
        out_ << "  no node named '" << id << "'.\n";
        return;
    }
    while (!eof_) {
        std::string deps = ask("dependencies (space-separated ids, empty for none): ");
        std::vector<std::string> list = split_words(deps);
        bool ok = true;
        std::vector<std::string> accepted;
        for (const std::string& dep : list) {
            if (dep == id || !find_node(dep) ||
                std::find(accepted.begin(), accepted.end(), dep) != accepted.end()) {
                out_ << "  '" << dep << "' is not a valid dependency here.\n";
                ok = false;
                break;
            }
            accepted.push_back(dep);
        }
        if (!ok) continue;
        snapshot();
        find_node(id)->deps = std::move(accepted);
        out_ << "updated dependencies of '" << id << "'.\n";
        return;
    }
}

void BuilderSession::cmd_hook() {
    std::string id = ask("node id: ");
    NodeDef* def = find_node(id);
    if (!def) {
        out_ << "  no node named '" << id << "'.\n";
        return;
    }
    while (!eof_) {
        std::string hook = ask("after-query hook (empty for none): ");
        if (!hook.empty() &&
            std::find(known_hooks_.begin(), known_hooks_.end(), hook) == known_hooks_.end()) {
            out_ << "  unknown hook '" << hook << "'.\n";
            continue;
        }
        snapshot();
        find_node(id)->after_query = hook;
        out_ << "updated hook of '" << id << "'.\n";
        return;
    }
}

void BuilderSession::cmd_model() {
    std::string id = ask("node id: ");
    NodeDef* def = find_node(id);
    if (!def) {
        out_ << "  no node named '" << id << "'.\n";
        return;
    }
    std::string model = ask("model profile (empty for default): ");
    if (eof_) return;
    snapshot();
    find_node(id)->model = model.empty() ? "default" : model;
    out_ << "updated model of '" << id << "'.\n";
}

void BuilderSession::cmd_remove() {
    std::string id = ask("node id: ");
    if (!find_node(id)) {
        out_ << "  no node named '" << id << "'.\n";
        return;
    }
    snapshot();
    std::erase_if(spec_.nodes, [&](const NodeDef& def) { return def.id == id; });
    int detached = 0;
    for (auto& def : spec_.nodes) {
        auto before = def.deps.size();
        std::erase(def.deps, id);
        detached += static_cast<int>(before - def.deps.size());
    }
    out_ << "removed '" << id << "'";
    if (detached > 0) out_ << " and detached it from " << detached << " dependency list(s)";
    out_ << ".\n";
}

void BuilderSession::cmd_list() const {
    if (spec_.nodes.empty()) {
        out_ << "no nodes yet.\n";
        return;
    }
    for (const auto& def : spec_.nodes) {
        out_ << "- " << def.id;
        if (!def.deps.empty()) {
            out_ << " <-";
            for (const auto& dep : def.deps) out_ << " " << dep;
        }
        if (!def.after_query.empty()) out_ << " [hook " << def.after_query << "]";
        if (def.model != "default") out_ << " [model " << def.model << "]";
        out_ << "\n";
    }
}

void BuilderSession::cmd_show() {
    std::string id = ask("node id: ");
    NodeDef* def = find_node(id);
    if (!def) {
        out_ << "  no node named '" << id << "'.\n";
        return;
    }
    out_ << "id: " << def->id << "\nprompt:\n" << def->prompt << "\ndeps:";
    for (const auto& dep : def->deps) out_ << " " << dep;
    out_ << "\nhook: " << (def->after_query.empty() ? "(none)" : def->after_query)
         << "\nmodel: " << def->model << "\n";
}

void BuilderSession::cmd_undo() {
    if (undo_.empty()) {
        out_ << "nothing to undo.\n";
        return;
    }
    spec_ = std::move(undo_.back());
    undo_.pop_back();
    out_ << "undone.\n";
    if (undo_.empty()) dirty_ = false;
}

bool BuilderSession::cmd_check(bool print_clean) const {
    std::vector<Finding> findings =
        validate_spec(spec_, known_hooks_, known_compose_tags_, standard_schema_roots());
    bool blocking = false;
    for (const Finding& f : findings) {
        bool warning = f.code == "UnresolvedDbKey";
        out_ << (warning ? "warning: " : "error: ") << f.message() << "\n";
        if (!warning) blocking = true;
    }
    if (findings.empty() && print_clean) out_ << "graph is valid.\n";
    return !blocking;
}

bool BuilderSession::cmd_save(const std::string& path) {
    if (!cmd_check(false)) {
        out_ << "not saved: fix the errors above first.\n";
        return false;
    }
    std::string tmp = path + ".tmp";
    spec_.save(tmp);
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::remove(tmp.c_str());
        throw StorageError("cannot replace " + path + ": " + ec.message());
    }
    dirty_ = false;
    out_ << "saved " << spec_.nodes.size() << " node(s) to " << path << ".\n";
    return true;
}

bool BuilderSession::dispatch(const std::string& command, const std::string& path) {
    if (command == "add")
        cmd_add();
    else if (command == "edit")
        cmd_edit();
    else if (command == "deps")
        cmd_deps();
    else if (command == "hook")
        cmd_hook();
    else if (command == "model")
        cmd_model();
    else if (command == "remove")
        cmd_remove();
    else if (command == "list")
        cmd_list();
    else if (command == "show")
        cmd_show();
    else if (command == "undo")
        cmd_undo();
    else if (command == "check")
        cmd_check(true);
    else if (command == "save")
        cmd_save(path);
    else if (command == "quit")
        return false;
    else if (command == "help" || command.empty())
        out_ << "commands: add edit deps hook model remove list show undo check save quit\n";
    else
        out_ << "unknown command '" << command << "' (try 'help').\n";
    return true;
}

int BuilderSession::run(const std::string& path) {
    if (std::filesystem::exists(path)) {
        spec_ = GraphSpec::load(path);
        out_ << "loaded " << spec_.nodes.size() << " node(s) from " << path << ".\n";
    } else {
        out_ << "starting a new graph at " << path << ".\n";
    }
    out_ << "type 'help' for commands.\n";

    bool warned_dirty = false;
    while (!eof_) {
        std::string command = ask("> ");
        if (eof_) break;
        if (command == "quit" && dirty_ && !warned_dirty) {
            out_ << "unsaved changes; 'save' first or type 'quit' again to discard them.\n";
            warned_dirty = true;
            continue;
        }
        if (command != "quit") warned_dirty = false;
        if (!dispatch(command, path)) break;
    }
    return dirty_ ? 1 : 0;
}

}  // namespace promptdag
