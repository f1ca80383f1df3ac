#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace htc {

enum class TextMode { kClassical, kPretrainedAdapter };

// Porter suffix stripping with the NLTK default extensions (irregular-form
// table, short-word passthrough and the revised step 1c/2 rules). Input is
// expected in lower case.
std::string porter_stem(std::string_view word);

// Classical: lowercase, drop ASCII punctuation, split on whitespace, stem.
// Pretrained adapter: lowercase, split on whitespace with every ASCII
// punctuation character as its own word; subword splitting is left to the
// adapter.
std::vector<std::string> preprocess(std::string_view text, TextMode mode);

std::string to_lower_ascii(std::string_view text);
bool is_ascii_punct(char c);

}  // namespace htc
