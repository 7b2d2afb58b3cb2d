#ifndef TOFNER_UTIL_HPP
#define TOFNER_UTIL_HPP

#include <cstdint>
#include <stdexcept>
#include <string>

namespace tof {

enum class ErrorKind {
  kUsage,       // malformed call or arguments
  kValidation,  // config or data failed validation
  kParse,       // malformed input file
  kContract,    // caller broke an operation precondition
  kTraining,    // training diverged or could not proceed
  kIo,          // filesystem failure
};

const char* error_kind_name(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

// 64-bit FNV-1a, used for vocabulary and checkpoint consistency checks.
std::uint64_t fnv1a64(const void* data, std::size_t size);
std::uint64_t fnv1a64(const std::string& text);
std::string to_hex(std::uint64_t value);

std::string read_file(const std::string& path);
// Writes to a sibling temp file, then renames over the destination.
void write_file_atomic(const std::string& path, const std::string& content);
std::uint64_t file_hash(const std::string& path);

}  // namespace tof

#endif  // TOFNER_UTIL_HPP
