#pragma once

#include <string>
#include <vector>

namespace corast {

// Warnings go to stderr unless silenced. A WarningCapture installed on the
// current thread additionally collects them, which is how tests observe
// recoverable conditions (clamped schedule steps, degenerate columns, ...).

void warn(const std::string& message);

/// Globally silence stderr output of warnings (captures still see them).
void set_warnings_quiet(bool quiet);

class WarningCapture {
public:
    WarningCapture();
    ~WarningCapture();
    WarningCapture(const WarningCapture&) = delete;
    WarningCapture& operator=(const WarningCapture&) = delete;

    const std::vector<std::string>& messages() const { return messages_; }
    bool contains(const std::string& needle) const;

private:
    friend void warn(const std::string& message);
    std::vector<std::string> messages_;
    WarningCapture* previous_;
};

}  // namespace corast
