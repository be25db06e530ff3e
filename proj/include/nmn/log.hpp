#pragma once

#include <functional>
#include <sstream>
#include <string>

namespace nmn::logging {

enum class Level { Error = 0, Info = 1, Debug = 2 };

using Sink = std::function<void(Level, const std::string&)>;

Level level();
void set_level(Level lvl);
// Reads NMN_LOG={error,info,debug}; unknown values keep the default.
void init_from_env();

// Replaces the output sink (default writes to stderr). Returns the old sink.
Sink set_sink(Sink sink);

void log(Level lvl, const std::string& msg);

inline void error(const std::string& msg) { log(Level::Error, msg); }
inline void info(const std::string& msg) { log(Level::Info, msg); }
inline void debug(const std::string& msg) { log(Level::Debug, msg); }

}  // namespace nmn::logging
