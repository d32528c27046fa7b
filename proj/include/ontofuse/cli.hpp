#pragma once

namespace ontofuse {

int run_cli(int argc, char** argv);

}  // namespace ontofuse
