#include <regex>
#include <string>
#include <string_view>

#include "claimcheck/corpus.hpp"

namespace claimcheck {

namespace {

// Replacement rules run in this order so that a URL containing '@' or digits
// is consumed whole before the email, mention and phone rules see it.
// Phone numbers must be bounded by non-digits and may only use '.', '-' or
// parentheses as separators; whitespace-separated digit groups are left as
// is, which keeps the function idempotent after punctuation stripping.
const std::regex& url_re() {
  static const std::regex re(R"((https?://|www\.)[^\s]+)",
                             std::regex::ECMAScript | std::regex::optimize);
  return re;
}

const std::regex& email_re() {
  static const std::regex re(
      R"([a-z0-9._%+\-]+@[a-z0-9\-]+(\.[a-z0-9\-]+)*\.[a-z]{2,})",
      std::regex::ECMAScript | std::regex::optimize);
  return re;
}

const std::regex& mention_re() {
  static const std::regex re(R"(@[a-z0-9_]+)",
                             std::regex::ECMAScript | std::regex::optimize);
  return re;
}

const std::regex& phone_re() {
  static const std::regex re(
      R"((^|[^0-9])(\(?[0-9]{3}\)?[.\-]?[0-9]{3}[.\-]?[0-9]{4})(?=[^0-9]|$))",
      std::regex::ECMAScript | std::regex::optimize);
  return re;
}

const std::regex& sentinel_re() {
  static const std::regex re(R"(<(url|email|phone|user)>)",
                             std::regex::ECMAScript | std::regex::optimize);
  return re;
}

bool is_ascii_punct(unsigned char c) {
  return (c >= 33 && c <= 47) || (c >= 58 && c <= 64) ||
         (c >= 91 && c <= 96) || (c >= 123 && c <= 126);
}

bool is_ascii_space(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

// Replaces punctuation with spaces and collapses whitespace.
void append_stripped(std::string_view piece, std::string& out) {
  for (unsigned char c : piece) {
    if (is_ascii_punct(c) || is_ascii_space(c) || c < 32 || c == 127) {
      if (!out.empty() && out.back() != ' ') out.push_back(' ');
    } else {
      out.push_back(static_cast<char>(c));
    }
  }
}

void append_sentinel(std::string_view token, std::string& out) {
  if (!out.empty() && out.back() != ' ') out.push_back(' ');
  out.append(token);
  out.push_back(' ');
}

}  // namespace

std::string normalize_text(std::string_view raw) {
  std::string s(raw);
  for (char& c : s) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  s = std::regex_replace(s, url_re(), " <url> ");
  s = std::regex_replace(s, email_re(), " <email> ");
  s = std::regex_replace(s, mention_re(), " <user> ");
  s = std::regex_replace(s, phone_re(), "$1 <phone> ");

  std::string out;
  out.reserve(s.size());
  auto begin = std::sregex_iterator(s.begin(), s.end(), sentinel_re());
  std::size_t pos = 0;
  for (auto it = begin; it != std::sregex_iterator(); ++it) {
    const auto& m = *it;
    append_stripped(std::string_view(s).substr(pos, m.position() - pos), out);
    append_sentinel(m.str(), out);
    pos = static_cast<std::size_t>(m.position() + m.length());
  }
  append_stripped(std::string_view(s).substr(pos), out);

  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

}  // namespace claimcheck
