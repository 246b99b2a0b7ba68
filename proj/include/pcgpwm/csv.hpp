#pragma once

#include "pcgpwm/types.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace pcgpwm {

/// Malformed CSV content. `line()` is 1-based.
class ParseError : public InputError {
public:
  ParseError(const std::string& file, std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

private:
  std::size_t line_;
};

struct CsvOptions {
  bool allow_missing = true;
  /// Number of columns expected; -1 accepts whatever the first data row has.
  Index expected_cols = -1;
};

/// Reads a numeric CSV into a dense matrix. Empty fields and case-insensitive
/// "nan"/"na" become kMissing. A leading row with non-numeric tokens is
/// treated as a header and skipped. Blank lines are ignored.
Matrix read_csv_matrix(const std::filesystem::path& path, const CsvOptions& opts = {});
Matrix parse_csv_matrix(std::istream& in, const std::string& name, const CsvOptions& opts = {});

/// Writes a matrix with an optional header. Missing entries are written as "nan".
void write_csv_matrix(const std::filesystem::path& path, const Matrix& m,
                      const std::vector<std::string>& header = {});

}  // namespace pcgpwm
