#ifndef PHONOLID_TESTS_TEST_UTIL_H_
#define PHONOLID_TESTS_TEST_UTIL_H_

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "phonolid/alphabet.h"
#include "phonolid/random.h"

namespace phonolid::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("phonolid-test-" + std::to_string(::getpid()) + "-" +
             std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const {
    return path_ / name;
  }

 private:
  std::filesystem::path path_;
};

inline void WriteText(const std::filesystem::path& path,
                      const std::string& text) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  out << text;
}

inline std::string ReadText(const std::filesystem::path& path) {
  std::ifstream in(path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline Utterance Utt(const PhoneAlphabet& alphabet, const std::string& text,
                     const std::string& id = "u") {
  return EncodeUtterance(alphabet, text, id);
}

inline std::vector<Utterance> Utts(const PhoneAlphabet& alphabet,
                                   const std::vector<std::string>& lines) {
  std::vector<Utterance> out;
  for (size_t i = 0; i < lines.size(); ++i)
    out.push_back(Utt(alphabet, lines[i], "u" + std::to_string(i)));
  return out;
}

inline PhoneAlphabet LetterAlphabet(size_t n) {
  std::vector<std::string> tokens;
  for (size_t i = 0; i < n; ++i) tokens.push_back(std::string(1, char('a' + i)));
  return PhoneAlphabet(tokens);
}

// Random non-empty utterances of at most `max_len` phones.
inline std::vector<Utterance> RandomUtterances(const PhoneAlphabet& alphabet,
                                               Rng& rng, size_t count,
                                               size_t max_len) {
  std::vector<Utterance> out;
  for (size_t i = 0; i < count; ++i) {
    Utterance u;
    u.source_id = "r" + std::to_string(i);
    const size_t len = 1 + rng.Below(max_len);
    for (size_t j = 0; j < len; ++j)
      u.phones.push_back(static_cast<TokenId>(rng.Below(alphabet.size())));
    out.push_back(std::move(u));
  }
  return out;
}

}  // namespace phonolid::testing

#endif  // PHONOLID_TESTS_TEST_UTIL_H_
