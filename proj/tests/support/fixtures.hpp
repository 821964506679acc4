#pragma once

#include <fstream>
#include <stdexcept>
#include <string>

#include "swarmwatch/bytes.hpp"

namespace testutil {

inline swarmwatch::Bytes read_file(const std::string& relative) {
    std::string path = std::string(SWARMWATCH_TEST_DATA) + "/" + relative;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("missing fixture: " + path);
    return swarmwatch::Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

} // namespace testutil
