#include "teamspace/clock.hpp"

#include <charconv>
#include <cstdio>
#include <stdexcept>

namespace teamspace {

std::string to_iso8601(Timestamp t) {
  using namespace std::chrono;
  const auto day = floor<days>(t);
  const year_month_day ymd{day};
  const hh_mm_ss<Millis> tod{t - day};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d.%03dZ", int(ymd.year()),
                unsigned(ymd.month()), unsigned(ymd.day()), int(tod.hours().count()),
                int(tod.minutes().count()), int(tod.seconds().count()),
                int(tod.subseconds().count()));
  return buf;
}

Timestamp parse_iso8601(std::string_view text) {
  using namespace std::chrono;
  // YYYY-MM-DDTHH:MM:SS.mmmZ
  if (text.size() != 24 || text[4] != '-' || text[7] != '-' || text[10] != 'T' ||
      text[13] != ':' || text[16] != ':' || text[19] != '.' || text[23] != 'Z') {
    throw std::invalid_argument("malformed timestamp: " + std::string(text));
  }
  auto field = [&](std::size_t pos, std::size_t len) {
    int v = 0;
    auto [p, ec] = std::from_chars(text.data() + pos, text.data() + pos + len, v);
    if (ec != std::errc{} || p != text.data() + pos + len) {
      throw std::invalid_argument("malformed timestamp: " + std::string(text));
    }
    return v;
  };
  const year_month_day ymd{year{field(0, 4)}, month{unsigned(field(5, 2))},
                           day{unsigned(field(8, 2))}};
  if (!ymd.ok()) throw std::invalid_argument("invalid date: " + std::string(text));
  const int h = field(11, 2), m = field(14, 2), s = field(17, 2), ms = field(20, 3);
  if (h > 23 || m > 59 || s > 59) throw std::invalid_argument("invalid time: " + std::string(text));
  return sys_days{ymd} + hours{h} + minutes{m} + seconds{s} + Millis{ms};
}

}  // namespace teamspace
