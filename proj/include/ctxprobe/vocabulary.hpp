#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ctxprobe {

// The unified candidate vocabulary. Token order is significant: it is the
// tie-break order for every argmax and top-k in the project.
class Vocabulary {
 public:
  Vocabulary() = default;
  // Throws InvalidArgument on duplicate tokens.
  explicit Vocabulary(std::vector<std::string> tokens);

  // One token per line, UTF-8. Blank lines are skipped.
  static Vocabulary load(const std::filesystem::path& path);

  std::size_t size() const noexcept { return tokens_.size(); }
  bool empty() const noexcept { return tokens_.empty(); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }
  const std::string& operator[](std::size_t i) const { return tokens_[i]; }

  std::optional<std::size_t> find(std::string_view token) const;
  bool contains(std::string_view token) const { return find(token).has_value(); }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace ctxprobe
