#pragma once

namespace plap {

inline const char* version_string() { return "0.1.0"; }

} // namespace plap
