#pragma once

#include <string>

#include "ste/image.hpp"

namespace ste {

// Bundled TrueType faces, in a fixed order.
int font_count();
const std::string& font_name(int font);

// Anti-aliased ink coverage of `text` (one channel, values in [0,1]) cropped
// to its ink bounds. `letter_spacing` adds pixels between consecutive glyphs.
// Returns an empty image when the text has no visible ink.
RasterImage render_text(const std::string& text, int font, int px_height, int letter_spacing = 0);

}  // namespace ste
