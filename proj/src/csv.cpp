#include "pcgpwm/csv.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>

namespace pcgpwm {

ParseError::ParseError(const std::string& file, std::size_t line, const std::string& what)
    : InputError(file + ":" + std::to_string(line) + ": " + what), line_(line) {}

namespace {

std::string trim(std::string_view s) {
  auto b = s.begin();
  auto e = s.end();
  while (b != e && std::isspace(static_cast<unsigned char>(*b))) ++b;
  while (e != b && std::isspace(static_cast<unsigned char>(*(e - 1)))) --e;
  return std::string(b, e);
}

bool is_missing_token(const std::string& tok) {
  if (tok.empty()) return true;
  std::string lower(tok);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return lower == "nan" || lower == "na";
}

std::optional<double> parse_number(const std::string& tok) {
  double value = 0.0;
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) return std::nullopt;
  return value;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

Matrix parse_csv_matrix(std::istream& in, const std::string& name, const CsvOptions& opts) {
  std::vector<std::vector<double>> rows;
  Index cols = opts.expected_cols;
  std::string line;
  std::size_t line_no = 0;
  bool first_content = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);

    std::vector<double> values;
    values.reserve(fields.size());
    bool header_like = false;
    for (const auto& tok : fields) {
      if (is_missing_token(tok)) {
        values.push_back(kMissing);
      } else if (auto v = parse_number(tok)) {
        values.push_back(*v);
      } else {
        header_like = true;
        break;
      }
    }
    if (header_like) {
      if (first_content) {
        first_content = false;
        continue;
      }
      throw ParseError(name, line_no, "non-numeric field in data row");
    }
    first_content = false;

    if (cols < 0) cols = static_cast<Index>(values.size());
    if (static_cast<Index>(values.size()) != cols) {
      throw ParseError(name, line_no,
                       "row has " + std::to_string(values.size()) + " fields, expected " +
                           std::to_string(cols));
    }
    if (!opts.allow_missing &&
        std::any_of(values.begin(), values.end(), [](double v) { return is_missing(v); })) {
      throw ParseError(name, line_no, "missing value not allowed in this file");
    }
    rows.push_back(std::move(values));
  }

  Matrix out(static_cast<Index>(rows.size()), std::max<Index>(cols, 0));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (Index j = 0; j < out.cols(); ++j) out(static_cast<Index>(i), j) = rows[i][static_cast<std::size_t>(j)];
  return out;
}

Matrix read_csv_matrix(const std::filesystem::path& path, const CsvOptions& opts) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open file: " + path.string());
  return parse_csv_matrix(in, path.string(), opts);
}

void write_csv_matrix(const std::filesystem::path& path, const Matrix& m,
                      const std::vector<std::string>& header) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write file: " + path.string());
  out << std::setprecision(17);
  if (!header.empty()) {
    for (std::size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << header[j];
    out << '\n';
  }
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      if (is_missing(m(i, j)))
        out << "nan";
      else
        out << m(i, j);
    }
    out << '\n';
  }
}

}  // namespace pcgpwm
