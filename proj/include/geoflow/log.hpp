#pragma once

#include <iostream>
#include <sstream>
#include <string>

namespace geoflow::log {

enum class Level { error = 0, info = 1, debug = 2 };

// Reads GEOFLOW_LOG ({error,info,debug}) once; defaults to error.
Level threshold();

void emit(Level lvl, const std::string& msg);

inline void error(const std::string& msg) { emit(Level::error, msg); }
inline void info(const std::string& msg) { emit(Level::info, msg); }
inline void debug(const std::string& msg) { emit(Level::debug, msg); }

}  // namespace geoflow::log
