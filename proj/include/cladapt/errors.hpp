#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace cladapt {

// Runtime failure carrying a stable machine-readable code ("bad_magic",
// "too_short", "unknown_key", ...). Codes are part of the CLI contract:
// they end up in the error JSON printed on stderr.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(message), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

}  // namespace cladapt
