#include "provmon/textgen.hpp"

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "provmon/error.hpp"

namespace provmon {

std::string CommandGenerator::complete(const std::string& prompt) {
  namespace fs = std::filesystem;
  auto path = fs::temp_directory_path() / ("provmon-prompt-" + std::to_string(::getpid()) + ".txt");
  {
    std::ofstream f(path, std::ios::binary);
    f << prompt;
  }
  const std::string cmd = command_ + " < '" + path.string() + "'";
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) {
    fs::remove(path);
    throw Error("cannot start generator command: " + command_);
  }
  std::string out;
  std::array<char, 4096> buf{};
  std::size_t n;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) out.append(buf.data(), n);
  int status = ::pclose(pipe);
  fs::remove(path);
  if (status == -1 || !WIFEXITED(status) || WEXITSTATUS(status) != 0)
    throw Error("generator command failed: " + command_);
  return out;
}

std::string ScriptedGenerator::complete(const std::string& prompt) {
  prompts_.push_back(prompt);
  if (responses_.empty()) return {};
  std::size_t i = std::min(prompts_.size() - 1, responses_.size() - 1);
  return responses_[i];
}

}  // namespace provmon
