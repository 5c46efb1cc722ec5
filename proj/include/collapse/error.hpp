#pragma once

#include <stdexcept>
#include <string>

namespace collapse {

// Every failure carries a short machine-readable code ("dim-mismatch", ...)
// next to the human message.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message, std::string detail = "")
        : std::runtime_error(message), code_(std::move(code)), detail_(std::move(detail)) {}

    const std::string& code() const { return code_; }
    // Message without the leading code.
    const std::string& detail() const { return detail_; }

private:
    std::string code_;
    std::string detail_;
};

[[noreturn]] inline void fail(const std::string& code, const std::string& message)
{
    throw Error(code, code + ": " + message, message);
}

// Prints each distinct message to stderr once per process.
void warn_once(const std::string& message);

}  // namespace collapse
