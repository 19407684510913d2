#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "promptdag/graph.hpp"

namespace promptdag {

// Interactive no-code graph builder: a line-oriented wizard that edits a
// graph spec in memory and saves it atomically (temp file + rename), so an
// aborted session never clobbers the previous file. Drive it with any
// istream/ostream pair — tests use string streams.
class BuilderSession {
public:
    BuilderSession(std::istream& in, std::ostream& out,
                   std::vector<std::string> known_hooks,
                   std::vector<std::string> known_compose_tags = {"default"});

    // Loads `path` if it exists, then runs the command loop until quit/EOF.
    // Returns 0 when the session ends with no unsaved work lost, 1 on an
    // aborted save.
    int run(const std::string& path);

    const GraphSpec& spec() const { return spec_; }
    bool dirty() const { return dirty_; }

private:
    // One wizard command; returns false when the session should end.
    bool dispatch(const std::string& command, const std::string& path);

    void cmd_add();
    void cmd_edit();
    void cmd_deps();
    void cmd_hook();
    void cmd_model();
    void cmd_remove();
    void cmd_list() const;
    void cmd_show();
    void cmd_undo();
    bool cmd_check(bool print_clean) const;  // true when no blocking findings
    bool cmd_save(const std::string& path);

    std::string ask(const std::string& prompt);
    std::string read_multiline(const std::string& prompt);
    NodeDef* find_node(const std::string& id);
    void snapshot();  // push the current spec onto the undo stack

    std::istream& in_;
    std::ostream& out_;
    std::vector<std::string> known_hooks_;
    std::vector<std::string> known_compose_tags_;
    GraphSpec spec_;
    std::vector<GraphSpec> undo_;
    bool dirty_ = false;
    bool eof_ = false;
};

}  // namespace promptdag
