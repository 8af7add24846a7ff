#pragma once

// RFC 4180 output: CRLF line ends, fields quoted only when they contain a
// comma, quote, CR or LF.

#include <initializer_list>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace teamspace::csv {

std::string quote(std::string_view field);

/// Shortest decimal text that reads back to the same double.
std::string number(double v);

/// `number(*v)` or an empty field.
std::string number(const std::optional<double>& v);

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  void row(const std::vector<std::string>& fields);
  void row(std::initializer_list<std::string_view> fields);

 private:
  std::ostream& out_;
};

}  // namespace teamspace::csv
