#pragma once

#include <stdexcept>
#include <string>

namespace chimera {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline void require(bool ok, const std::string& msg) {
    if (!ok) throw Error(msg);
}

}  // namespace chimera
