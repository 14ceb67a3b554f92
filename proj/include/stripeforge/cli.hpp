#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace sf {

// Full command line without the program name.  Returns 0 on success, 1 when
// a check fails, 2 on usage or configuration errors.
int execute(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sf
