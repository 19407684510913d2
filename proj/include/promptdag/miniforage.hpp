#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "promptdag/episode.hpp"

namespace promptdag {

// MiniForage: a deterministic 9x9 grid-survival environment. Trees give
// wood, stone can be mined, and tables/furnaces are craftable — but the
// manual deliberately omits the crafting quantities so an agent has to
// discover them by failing.
class MiniForage : public EnvAdapter {
public:
    static constexpr int kWidth = 9;
    static constexpr int kHeight = 9;

    enum class Cell : std::uint8_t { Grass, Tree, Water, Stone, Table, Furnace };

    struct Ruleset {
        int table_wood_cost = 2;
        int furnace_stone_cost = 4;
        int wood_per_do = 1;
        int stone_per_do = 1;
    };

    explicit MiniForage(std::uint64_t seed = 0);

    std::string reset() override;
    StepOutcome step(const std::string& action, int repeats) override;
    std::vector<std::string> actions() const override;
    std::string manual() const override;

    // Inspection for tests and the trace viewer.
    std::string render_observation() const;
    Cell cell(int x, int y) const;
    int agent_x() const { return agent_x_; }
    int agent_y() const { return agent_y_; }
    int wood() const { return wood_; }
    int stone() const { return stone_; }
    std::int64_t steps_taken() const { return steps_; }
    const std::vector<std::string>& unlocked() const { return unlocked_; }
    const Ruleset& ruleset() const { return rules_; }

private:
    enum class Facing : std::uint8_t { North, South, East, West };

    void generate();
    bool in_bounds(int x, int y) const;
    bool walkable(int x, int y) const;
    std::pair<int, int> facing_cell() const;
    // One application of the action. Returns false when blocked (no effect);
    // fills `result` with a short outcome line.
    bool apply_once(const std::string& action, std::string& result,
                    std::vector<std::string>& new_achievements);
    void unlock(const std::string& achievement, std::vector<std::string>& new_achievements);

    std::uint64_t seed_;
    Ruleset rules_;
    std::array<Cell, kWidth * kHeight> grid_{};
    int agent_x_ = 4;
    int agent_y_ = 4;
    Facing facing_ = Facing::South;
    int wood_ = 0;
    int stone_ = 0;
    int sapling_ = 0;
    int health_ = 9, food_ = 9, drink_ = 9, energy_ = 9;
    std::int64_t steps_ = 0;
    std::vector<std::string> unlocked_;
};

}  // namespace promptdag
