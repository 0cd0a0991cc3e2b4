#pragma once

#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "rost/disorder.hpp"
#include "rost/gibbs/ensemble.hpp"
#include "rost/overlap.hpp"

namespace rost {

// Intermediate objects an experiment produced, for persistence by the
// harness. Names are relative file stems such as "L=8/draw-0003".
struct Artifacts {
    struct CouplingSet {
        std::string name;
        std::vector<CouplingField> fields;  // one per disorder draw, draw order
    };
    std::vector<CouplingSet> couplings;
    std::vector<std::pair<std::string, ReplicaEnsemble>> ensembles;
    std::vector<std::pair<std::string, OverlapMatrix>> matrices;
    std::vector<std::pair<std::string, nlohmann::json>> documents;
};

inline std::string draw_name(std::size_t i) {
    std::string n = std::to_string(i);
    return "draw-" + std::string(n.size() < 4 ? 4 - n.size() : 0, '0') + n;
}

}  // namespace rost
