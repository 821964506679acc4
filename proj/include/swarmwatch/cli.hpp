#pragma once

namespace swarmwatch::cli {

/// Entry point. 0 success, 1 usage error, 2 runtime failure.
int run(int argc, char** argv);

} // namespace swarmwatch::cli
