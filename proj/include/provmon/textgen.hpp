#pragma once

#include <string>
#include <vector>

namespace provmon {

// Client for an external text-generation service. Implementations return
// the raw response text; callers own parsing and schema validation.
class TextGenerator {
 public:
  virtual ~TextGenerator() = default;
  virtual std::string complete(const std::string& prompt) = 0;
};

// Runs a shell command with the prompt on stdin and returns its stdout.
// A non-zero exit status throws Error.
class CommandGenerator final : public TextGenerator {
 public:
  explicit CommandGenerator(std::string command) : command_(std::move(command)) {}
  std::string complete(const std::string& prompt) override;

 private:
  std::string command_;
};

// Replays canned responses in order, then repeats the last one. Records
// every prompt it receives.
class ScriptedGenerator final : public TextGenerator {
 public:
  explicit ScriptedGenerator(std::vector<std::string> responses) : responses_(std::move(responses)) {}
  std::string complete(const std::string& prompt) override;
  const std::vector<std::string>& prompts() const noexcept { return prompts_; }

 private:
  std::vector<std::string> responses_;
  std::vector<std::string> prompts_;
};

}  // namespace provmon
