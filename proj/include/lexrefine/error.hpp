#pragma once

#include <stdexcept>
#include <string>

namespace lexrefine {

enum class Errc {
    invalid_argument,
    parse,
    not_found,
    conflict,
    io,
    convergence,
    unavailable,
};

inline const char* errc_name(Errc c) {
    switch (c) {
        case Errc::invalid_argument: return "invalid_argument";
        case Errc::parse: return "parse_error";
        case Errc::not_found: return "not_found";
        case Errc::conflict: return "conflict";
        case Errc::io: return "io_error";
        case Errc::convergence: return "no_convergence";
        case Errc::unavailable: return "unavailable";
    }
    return "error";
}

// Every data-level failure in the library is reported through this type.
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

}  // namespace lexrefine
