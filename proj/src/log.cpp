#include "corast/log.hpp"

#include <atomic>
#include <iostream>

namespace corast {

namespace {
thread_local WarningCapture* current_capture = nullptr;
std::atomic<bool> quiet{false};
}  // namespace

void warn(const std::string& message) {
    if (current_capture != nullptr) current_capture->messages_.push_back(message);
    if (!quiet.load()) std::cerr << "warning: " << message << '\n';
}

void set_warnings_quiet(bool q) { quiet.store(q); }

WarningCapture::WarningCapture() : previous_(current_capture) { current_capture = this; }

WarningCapture::~WarningCapture() { current_capture = previous_; }

bool WarningCapture::contains(const std::string& needle) const {
    for (const auto& m : messages_)
        if (m.find(needle) != std::string::npos) return true;
    return false;
}

}  // namespace corast
