#include "ceval/culture.hpp"

#include "ceval/common.hpp"

#include <algorithm>

namespace ceval {

bool is_valid_culture_code(std::string_view code) {
  return code.size() == 3 &&
         std::all_of(code.begin(), code.end(), [](char c) { return c >= 'a' && c <= 'z'; });
}

CultureRegistry CultureRegistry::defaults() {
  CultureRegistry r;
  r.add({"ara", {"Iraq", "Jordan"}, "Arabic"});
  r.add({"ben", {"Bangladesh"}, "Bengali"});
  r.add({"zho", {"China"}, "Chinese"});
  r.add({"eng", {"United States"}, "English"});
  r.add({"deu", {"Germany"}, "German"});
  r.add({"ell", {"Greece"}, "Greek"});
  r.add({"kor", {"South Korea"}, "Korean"});
  r.add({"por", {"Brazil"}, "Portuguese"});
  r.add({"spa", {"Argentina", "Mexico"}, "Spanish"});
  r.add({"tur", {"Turkey"}, "Turkish"});
  return r;
}

void CultureRegistry::add(CultureId culture) {
  if (!is_valid_culture_code(culture.code)) {
    throw ValidationError("culture code '" + culture.code + "' is not three lowercase ASCII letters");
  }
  if (contains(culture.code)) throw ValidationError("duplicate culture code '" + culture.code + "'");
  if (culture.display_name.empty()) culture.display_name = culture.code;
  cultures_.push_back(std::move(culture));
}

const CultureId* CultureRegistry::find(std::string_view code) const {
  auto it = std::find_if(cultures_.begin(), cultures_.end(),
                         [&](const CultureId& c) { return c.code == code; });
  return it == cultures_.end() ? nullptr : &*it;
}

const CultureId& CultureRegistry::at(std::string_view code) const {
  if (const auto* c = find(code)) return *c;
  throw ValidationError("unknown culture '" + std::string(code) + "'");
}

std::size_t CultureRegistry::index_of(std::string_view code) const {
  for (std::size_t i = 0; i < cultures_.size(); ++i) {
    if (cultures_[i].code == code) return i;
  }
  throw ValidationError("unknown culture '" + std::string(code) + "'");
}

}  // namespace ceval
