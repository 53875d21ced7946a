#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ceval {

struct CultureId {
  std::string code;  // three lowercase ASCII letters, e.g. "kor"
  std::vector<std::string> countries;
  std::string display_name;

  friend bool operator==(const CultureId& a, const CultureId& b) { return a.code == b.code; }
};

bool is_valid_culture_code(std::string_view code);

/// Ordered set of cultures. Registry order drives matrix axes and corpus ordering.
class CultureRegistry {
 public:
  CultureRegistry() = default;

  /// The ten linguistic-cultural settings: ara, ben, zho, eng, deu, ell, kor, por, spa, tur.
  static CultureRegistry defaults();

  /// Throws ValidationError on a malformed or duplicate code.
  void add(CultureId culture);

  const CultureId* find(std::string_view code) const;
  const CultureId& at(std::string_view code) const;
  bool contains(std::string_view code) const { return find(code) != nullptr; }
  /// Position in registry order; throws ValidationError for unknown codes.
  std::size_t index_of(std::string_view code) const;

  const std::vector<CultureId>& cultures() const { return cultures_; }
  std::size_t size() const { return cultures_.size(); }
  bool empty() const { return cultures_.empty(); }

 private:
  std::vector<CultureId> cultures_;
};

}  // namespace ceval
