#pragma once

#include <string>
#include <string_view>

// True when f() throws E and the message contains `needle`.
template <typename E, typename F>
bool throws_with(F&& f, std::string_view needle) {
    try {
        f();
    } catch (const E& e) {
        return std::string_view(e.what()).find(needle) != std::string_view::npos;
    } catch (...) {
        return false;
    }
    return false;
}
