#include "promptdag/miniforage.hpp"

#include <algorithm>
#include <cstdlib>
#include <random>
#include <tuple>

namespace promptdag {

namespace {

const char* cell_name(MiniForage::Cell cell) {
    switch (cell) {
        case MiniForage::Cell::Grass: return "grass";
        case MiniForage::Cell::Tree: return "tree";
        case MiniForage::Cell::Water: return "water";
        case MiniForage::Cell::Stone: return "stone";
        case MiniForage::Cell::Table: return "table";
        case MiniForage::Cell::Furnace: return "furnace";
    }
    return "unknown";
}

// Compass phrase for an offset from the agent, e.g. "2 steps west".
std::string direction_phrase(int dx, int dy) {
    std::string dir;
    if (dy < 0) dir += "north";
    if (dy > 0) dir += "south";
    if (dx < 0) dir += (dir.empty() ? "west" : "-west");
    if (dx > 0) dir += (dir.empty() ? "east" : "-east");
    int distance = std::max(std::abs(dx), std::abs(dy));
    return std::to_string(distance) + (distance == 1 ? " step " : " steps ") + dir;
}

}  // namespace

MiniForage::MiniForage(std::uint64_t seed) : seed_(seed) { generate(); }

void MiniForage::generate() {
    grid_.fill(Cell::Grass);
    agent_x_ = 4;
    agent_y_ = 4;
    facing_ = Facing::South;
    wood_ = stone_ = sapling_ = 0;
    health_ = food_ = drink_ = energy_ = 9;
    steps_ = 0;
    unlocked_.clear();

    auto put = [&](int x, int y, Cell c) { grid_[y * kWidth + x] = c; };
    if (seed_ == 0) {
        // Authored demo field: a tree two steps west of the agent, a second
        // tree, a pond, and a stone outcrop.
        put(2, 4, Cell::Tree);
        put(6, 2, Cell::Tree);
        put(7, 1, Cell::Water);
        put(8, 1, Cell::Water);
        put(7, 2, Cell::Water);
        put(8, 2, Cell::Water);
        put(6, 6, Cell::Stone);
        put(7, 6, Cell::Stone);
        put(6, 7, Cell::Stone);
        return;
    }
    // Procedural fields. Raw engine draws (not distributions) keep the
    // layout identical across standard-library implementations.
    std::mt19937 rng(static_cast<std::uint32_t>(seed_));
    for (int y = 0; y < kHeight; ++y) {
        for (int x = 0; x < kWidth; ++x) {
            if (x == agent_x_ && y == agent_y_) continue;
            std::uint32_t r = rng() % 100;
            if (r < 12)
                put(x, y, Cell::Tree);
            else if (r < 20)
                put(x, y, Cell::Stone);
            else if (r < 26)
                put(x, y, Cell::Water);
        }
    }
}

MiniForage::Cell MiniForage::cell(int x, int y) const { return grid_[y * kWidth + x]; }

bool MiniForage::in_bounds(int x, int y) const {
    return x >= 0 && x < kWidth && y >= 0 && y < kHeight;
}

bool MiniForage::walkable(int x, int y) const {
    return in_bounds(x, y) && cell(x, y) == Cell::Grass;
}

std::pair<int, int> MiniForage::facing_cell() const {
    switch (facing_) {
        case Facing::North: return {agent_x_, agent_y_ - 1};
        case Facing::South: return {agent_x_, agent_y_ + 1};
        case Facing::East: return {agent_x_ + 1, agent_y_};
        case Facing::West: return {agent_x_ - 1, agent_y_};
    }
    return {agent_x_, agent_y_};
}

std::string MiniForage::reset() {
    generate();
    return render_observation();
}

std::vector<std::string> MiniForage::actions() const {
    return {"move_north", "move_south", "move_east", "move_west", "do",
            "place_table", "place_furnace", "sleep", "noop"};
}

std::string MiniForage::manual() const {
    // The crafting quantities and the per-harvest wood yield are deliberately
    // omitted; discovering them is the point of the exercise.
    return "MiniForage survival manual\n"
           "You are alone in a small bounded field.\n"
           "- Move with move_north, move_south, move_east, move_west. Trees, water, stone,\n"
           "  tables, and furnaces block your way.\n"
           "- Use 'do' while facing a tree to collect wood.\n"
           "- Use 'do' while facing stone to mine stone.\n"
           "- 'place_table' crafts a table from wood on the space you are facing.\n"
           "- 'place_furnace' builds a furnace from stone on the space you are facing.\n"
           "- 'sleep' passes time; 'noop' does nothing.\n"
           "Every action can carry a repeat count; it is applied until something blocks it.\n";
}

void MiniForage::unlock(const std::string& achievement,
                        std::vector<std::string>& new_achievements) {
    if (std::find(unlocked_.begin(), unlocked_.end(), achievement) != unlocked_.end()) return;
    unlocked_.push_back(achievement);
    new_achievements.push_back(achievement);
}

bool MiniForage::apply_once(const std::string& action, std::string& result,
                            std::vector<std::string>& new_achievements) {
    if (action == "noop") {
        result = "waited";
        return true;
    }
    if (action == "sleep") {
        result = "slept";
        return true;
    }
    if (action.rfind("move_", 0) == 0) {
        std::string dir = action.substr(5);
        if (dir == "north")
            facing_ = Facing::North;
        else if (dir == "south")
            facing_ = Facing::South;
        else if (dir == "east")
            facing_ = Facing::East;
        else if (dir == "west")
            facing_ = Facing::West;
        else
            throw UnknownActionError(action);
        auto [tx, ty] = facing_cell();
        if (!in_bounds(tx, ty)) {
            result = "blocked by the world edge";
            return false;
        }
        if (!walkable(tx, ty)) {
            result = std::string("blocked by ") + cell_name(cell(tx, ty));
            return false;
        }
        agent_x_ = tx;
        agent_y_ = ty;
        result = "moved " + dir;
        return true;
    }
    if (action == "do") {
        auto [tx, ty] = facing_cell();
        if (!in_bounds(tx, ty)) {
            result = "nothing to collect at the world edge";
            return false;
        }
        Cell target = cell(tx, ty);
        if (target == Cell::Tree) {
            wood_ += rules_.wood_per_do;
            unlock("collect_wood", new_achievements);
            result = "collected wood from the tree";
            return true;
        }
        if (target == Cell::Stone) {
            stone_ += rules_.stone_per_do;
            unlock("collect_stone", new_achievements);
            result = "mined stone";
            return true;
        }
        result = std::string("nothing to collect from ") + cell_name(target);
        return false;
    }
    if (action == "place_table" || action == "place_furnace") {
        bool table = action == "place_table";
        const char* thing = table ? "table" : "furnace";
        int& stock = table ? wood_ : stone_;
        int cost = table ? rules_.table_wood_cost : rules_.furnace_stone_cost;
        const char* material = table ? "wood" : "stone";
        if (stock < cost) {
            result = std::string("placement failed: not enough ") + material + " for a " + thing;
            return false;
        }
        auto [tx, ty] = facing_cell();
        if (!walkable(tx, ty)) {
            result = std::string("placement failed: the space ahead is not clear");
            return false;
        }
        stock -= cost;
        grid_[ty * kWidth + tx] = table ? Cell::Table : Cell::Furnace;
        unlock(table ? "place_table" : "place_furnace", new_achievements);
        result = std::string("placed a ") + thing;
        return true;
    }
    throw UnknownActionError(action);
}

StepOutcome MiniForage::step(const std::string& action, int repeats) {
    if (repeats < 1) throw EnvironmentError("repeats must be >= 1, got " +
                                            std::to_string(repeats));
    auto declared = actions();
    if (std::find(declared.begin(), declared.end(), action) == declared.end())
        throw UnknownActionError(action);

    ++steps_;
    std::vector<std::string> new_achievements;
    std::string result;
    int applied = 0;
    bool blocked = false;
    for (int i = 0; i < repeats; ++i) {
        if (!apply_once(action, result, new_achievements)) {
            blocked = true;
            break;
        }
        ++applied;
    }

    StepOutcome out;
    out.observation = render_observation();
    out.reward = static_cast<double>(new_achievements.size());
    out.done = false;
    out.info = Json{{"action", action},
                    {"requested", repeats},
                    {"applied", applied},
                    {"blocked", blocked},
                    {"result", result},
                    {"new_achievements", new_achievements}};
    return out;
}

std::string MiniForage::render_observation() const {
    std::string text = "You see (1 step around you):\n";
    const std::pair<const char*, std::pair<int, int>> around[] = {
        {"north", {0, -1}}, {"south", {0, 1}}, {"east", {1, 0}}, {"west", {-1, 0}}};
    for (const auto& [dir, delta] : around) {
        int x = agent_x_ + delta.first;
        int y = agent_y_ + delta.second;
        text += "- ";
        text += in_bounds(x, y) ? cell_name(cell(x, y)) : "the world edge";
        text += " to the ";
        text += dir;
        text += "\n";
    }

    text += "\nNearby objects:\n";
    bool any = false;
    struct Entry {
        int distance, y, x;
        std::string line;
    };
    std::vector<Entry> entries;
    for (int y = 0; y < kHeight; ++y) {
        for (int x = 0; x < kWidth; ++x) {
            if (x == agent_x_ && y == agent_y_) continue;
            Cell c = cell(x, y);
            if (c == Cell::Grass) continue;
            int dx = x - agent_x_;
            int dy = y - agent_y_;
            entries.push_back({std::max(std::abs(dx), std::abs(dy)), y, x,
                               std::string("- ") + cell_name(c) + " " +
                                   direction_phrase(dx, dy)});
        }
    }
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
        return std::tie(a.distance, a.y, a.x) < std::tie(b.distance, b.y, b.x);
    });
    for (const Entry& e : entries) {
        text += e.line + "\n";
        any = true;
    }
    if (!any) text += "- none\n";

    text += "\nYour status:\n";
    text += "- health: " + std::to_string(health_) + "/9\n";
    text += "- food: " + std::to_string(food_) + "/9\n";
    text += "- drink: " + std::to_string(drink_) + "/9\n";
    text += "- energy: " + std::to_string(energy_) + "/9\n";

    text += "\nYour inventory:\n";
    bool has_item = false;
    if (wood_ > 0) {
        text += "- wood: " + std::to_string(wood_) + "\n";
        has_item = true;
    }
    if (stone_ > 0) {
        text += "- stone: " + std::to_string(stone_) + "\n";
        has_item = true;
    }
    if (sapling_ > 0) {
        text += "- sapling: " + std::to_string(sapling_) + "\n";
        has_item = true;
    }
    if (!has_item) text += "- empty\n";
    return text;
}

}  // namespace promptdag
