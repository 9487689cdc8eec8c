#pragma once

#include <cstdio>
#include <initializer_list>
#include <ostream>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

namespace fpp {

// Round-trip text for a double; same bytes for the same value.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class CsvWriter {
public:
  explicit CsvWriter(std::ostream& out) : out_(out) {}

  void header(const std::vector<std::string>& names) { line(names); }

  template <class... Cells>
  void row(const Cells&... cells) {
    bool first = true;
    ((emit(cells, first)), ...);
    out_ << '\n';
  }

  void line(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << cells[i];
    }
    out_ << '\n';
  }

  void values(const std::vector<double>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << format_double(cells[i]);
    }
    out_ << '\n';
  }

private:
  void sep(bool& first) {
    if (!first) out_ << ',';
    first = false;
  }
  void emit(double v, bool& first) {
    sep(first);
    out_ << format_double(v);
  }
  void emit(std::string_view s, bool& first) {
    sep(first);
    out_ << s;
  }
  void emit(const char* s, bool& first) { emit(std::string_view(s), first); }
  void emit(const std::string& s, bool& first) { emit(std::string_view(s), first); }
  template <class Int>
    requires std::is_integral_v<Int>
  void emit(Int v, bool& first) {
    sep(first);
    out_ << v;
  }

  std::ostream& out_;
};

}  // namespace fpp
