#pragma once

#include <cstddef>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace srl {

namespace detail {
inline void strf_cat(std::ostringstream&) {}
template <typename T, typename... Rest>
void strf_cat(std::ostringstream& os, const T& v, const Rest&... rest) {
  os << v;
  strf_cat(os, rest...);
}
}  // namespace detail

template <typename... Args>
std::string strf(const Args&... args) {
  std::ostringstream os;
  detail::strf_cat(os, args...);
  return os.str();
}

template <typename... Args>
[[noreturn]] void fail(const Args&... args) {
  throw std::runtime_error(strf(args...));
}

template <typename... Args>
void require(bool cond, const Args&... args) {
  if (!cond) fail(args...);
}

inline std::string shape_str(const std::vector<std::size_t>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace srl
