#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace erclaims::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitInternal = 4;

// Runs one subcommand. `args` excludes the program name. Errors are reported
// as a single line "error: <Kind>: <message>" on `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Flat key=value lines; blank lines and lines starting with '#' are skipped.
// Throws BadConfig on a malformed or repeated key.
std::vector<std::pair<std::string, std::string>> parse_config(std::istream& in);

// Output files of one run. Each file is written to a hidden temp file next to
// its destination and renamed into place by commit(); files of a run that
// never commits are removed.
class OutputSet {
 public:
  explicit OutputSet(std::filesystem::path dir);
  ~OutputSet();
  OutputSet(const OutputSet&) = delete;
  OutputSet& operator=(const OutputSet&) = delete;

  std::ostream& open(const std::string& name);
  // Throws Io if a file could not be written.
  std::vector<std::filesystem::path> commit();

 private:
  struct Entry;
  std::filesystem::path dir_;
  std::vector<std::unique_ptr<Entry>> entries_;
  bool committed_ = false;
};

}  // namespace erclaims::cli
