#ifndef PHONOLID_ERROR_H_
#define PHONOLID_ERROR_H_

#include <stdexcept>
#include <string>

namespace phonolid {

// All library failures (bad input, malformed files, violated preconditions
// on user-supplied data) are reported by throwing Error.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Malformed model or corpus file; `line` is 1-based, 0 when unknown.
class ParseError : public Error {
 public:
  ParseError(const std::string& path, size_t line, const std::string& msg)
      : Error(path + (line > 0 ? ":" + std::to_string(line) : std::string()) +
              ": " + msg),
        line_(line) {}
  size_t line() const { return line_; }

 private:
  size_t line_;
};

}  // namespace phonolid

#endif  // PHONOLID_ERROR_H_
