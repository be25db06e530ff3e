#include "nmn/log.hpp"

#include <cstdio>
#include <cstdlib>
#include <mutex>

namespace nmn::logging {

namespace {

Level g_level = Level::Error;
std::mutex g_mutex;

void default_sink(Level lvl, const std::string& msg) {
  const char* tag = lvl == Level::Error ? "error" : lvl == Level::Info ? "info" : "debug";
  std::fprintf(stderr, "[%s] %s\n", tag, msg.c_str());
}

Sink g_sink = default_sink;

}  // namespace

Level level() { return g_level; }

void set_level(Level lvl) { g_level = lvl; }

void init_from_env() {
  const char* raw = std::getenv("NMN_LOG");
  if (raw == nullptr) return;
  std::string v(raw);
  if (v == "error") {
    g_level = Level::Error;
  } else if (v == "info") {
    g_level = Level::Info;
  } else if (v == "debug") {
    g_level = Level::Debug;
  }
}

Sink set_sink(Sink sink) {
  std::lock_guard<std::mutex> lock(g_mutex);
  Sink old = g_sink;
  g_sink = sink ? std::move(sink) : Sink(default_sink);
  return old;
}

void log(Level lvl, const std::string& msg) {
  if (static_cast<int>(lvl) > static_cast<int>(g_level)) return;
  std::lock_guard<std::mutex> lock(g_mutex);
  g_sink(lvl, msg);
}

}  // namespace nmn::logging
