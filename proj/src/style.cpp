#include "ste/style.hpp"

#include <algorithm>

#include "ste/errors.hpp"

namespace ste {

int StyleSpace::max_choices() const {
  int m = 0;
  for (const auto& e : elements) m = std::max(m, e.choices);
  return m;
}

double StyleSpace::combinations() const {
  double p = 1;
  for (const auto& e : elements) p *= e.choices;
  return p;
}

void StyleSpace::validate() const {
  for (int i = 0; i < size(); ++i) {
    const auto& e = elements[i];
    if (e.choices < 2 || e.choices > 12)
      throw InvalidArgument("style element " + e.name + ": choice count must be in [2,12]");
    if (e.parent >= i) throw InvalidArgument("style element " + e.name + ": parent must come earlier");
    if (e.parent >= 0) {
      if (e.parent_allows.empty())
        throw InvalidArgument("style element " + e.name + ": empty parent condition");
      for (int c : e.parent_allows)
        if (c < 0 || c >= elements[e.parent].choices)
          throw InvalidArgument("style element " + e.name + ": parent choice out of range");
    }
  }
}

int StyleSpace::index_of(const std::string& name) const {
  for (int i = 0; i < size(); ++i)
    if (elements[i].name == name) return i;
  throw InvalidArgument("unknown style element " + name);
}

StyleSpace default_space() {
  const std::vector<int> custom{kCustomize};
  const std::vector<int> on{1};
  StyleSpace s;
  s.elements = {
      {"mechanism", 2, -1, {}},
      {"font", 6, kMechanism, custom},
      {"size", 8, -1, {}},
      {"color", 8, kMechanism, custom},
      {"blur", 4, -1, {}},
      {"alpha", 4, -1, {}},
      {"poisson", 2, -1, {}},
      {"italic", 2, -1, {}},
      {"curve", 4, -1, {}},
      {"tilt", 4, -1, {}},
      {"rotation", 5, -1, {}},
      {"shadow", 2, kMechanism, custom},
      {"shadow_offset", 4, kShadow, on},
      {"shadow_color", 4, kShadow, on},
      {"border", 2, kMechanism, custom},
      {"border_width", 4, kBorder, on},
      {"border_color", 4, kBorder, on},
      {"letter_spacing", 3, kMechanism, custom},
      {"opacity", 4, -1, {}},
      {"jitter", 4, -1, {}},
  };
  return s;
}

void validate_style(const StyleSpace& space, const StyleVector& s) {
  if (static_cast<int>(s.choices.size()) != space.size())
    throw InvalidArgument("style vector length does not match the style space");
  for (int i = 0; i < space.size(); ++i)
    if (s.choices[i] < 0 || s.choices[i] >= space.elements[i].choices)
      throw InvalidArgument("style choice out of range for " + space.elements[i].name);
}

std::vector<std::uint8_t> hierarchy_mask(const StyleSpace& space, const StyleVector& s) {
  validate_style(space, s);
  std::vector<std::uint8_t> h(space.size(), 1);
  for (int i = 0; i < space.size(); ++i) {
    const auto& e = space.elements[i];
    if (e.parent < 0) continue;
    const auto& ok = e.parent_allows;
    h[i] = h[e.parent] && std::find(ok.begin(), ok.end(), s.choices[e.parent]) != ok.end();
  }
  return h;
}

StyleVector sample_uniform(const StyleSpace& space, Rng& rng) {
  StyleVector s;
  s.choices.resize(space.size());
  for (int i = 0; i < space.size(); ++i) s.choices[i] = rng.below(space.elements[i].choices);
  s.seed = rng.next_u64();
  return s;
}

}  // namespace ste
