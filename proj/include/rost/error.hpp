#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace rost {

// Every failure carries a short machine-readable code ("degenerate-torus",
// "not-psd", ...) next to the human-readable message.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& detail)
        : std::runtime_error(code + ": " + detail), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

inline void require(bool ok, const char* code, const std::string& detail) {
    if (!ok) throw Error(code, detail);
}

}  // namespace rost
