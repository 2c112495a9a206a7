#pragma once

#include <stdexcept>
#include <string>

namespace scoreuq {

// Error categories map 1:1 to CLI exit codes.
enum class ErrorKind { Config = 1, Numeric = 2, Io = 3 };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }
    int exit_code() const noexcept { return static_cast<int>(kind_); }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void throw_config(const std::string& msg) { throw Error(ErrorKind::Config, msg); }
[[noreturn]] inline void throw_numeric(const std::string& msg) { throw Error(ErrorKind::Numeric, msg); }
[[noreturn]] inline void throw_io(const std::string& msg) { throw Error(ErrorKind::Io, msg); }

inline void require_config(bool cond, const std::string& msg) {
    if (!cond) throw_config(msg);
}

}  // namespace scoreuq
