#pragma once

#include <string>

#include "maskd/pipeline.hpp"

namespace maskd {

// Plain structured-text experiment config: `key = value` pairs with one
// level of `section { ... }` nesting, `#` comments. Unknown keys are
// rejected with the offending line number; see docs/config.md for the
// schema. Values already present in `into` are the defaults.
void apply_config_file(const std::string& path, DistillConfig& into);

// Same, from an in-memory buffer (name is used in error messages).
void apply_config_text(const std::string& text, const std::string& name, DistillConfig& into);

}  // namespace maskd
