#include "htc/text.hpp"

#include <array>
#include <cctype>
#include <functional>
#include <unordered_map>

namespace htc {
namespace {

bool is_vowel_letter(char c) { return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u'; }

// y is a consonant at the start of a word or after a vowel.
std::vector<bool> consonant_flags(std::string_view w) {
  std::vector<bool> flags(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (is_vowel_letter(w[i]))
      flags[i] = false;
    else if (w[i] == 'y')
      flags[i] = i == 0 ? true : !flags[i - 1];
    else
      flags[i] = true;
  }
  return flags;
}

bool is_consonant(std::string_view w, std::size_t i) { return consonant_flags(w.substr(0, i + 1))[i]; }

int measure(std::string_view stem) {
  auto flags = consonant_flags(stem);
  int m = 0;
  for (std::size_t i = 1; i < flags.size(); ++i)
    if (!flags[i - 1] && flags[i]) ++m;
  return m;
}

bool contains_vowel(std::string_view stem) {
  for (bool c : consonant_flags(stem))
    if (!c) return true;
  return false;
}

bool ends_double_consonant(std::string_view w) {
  return w.size() >= 2 && w[w.size() - 1] == w[w.size() - 2] && is_consonant(w, w.size() - 1);
}

bool ends_cvc(std::string_view w) {
  const std::size_t n = w.size();
  if (n >= 3 && is_consonant(w, n - 3) && !is_consonant(w, n - 2) && is_consonant(w, n - 1) && w[n - 1] != 'w' &&
      w[n - 1] != 'x' && w[n - 1] != 'y')
    return true;
  return n == 2 && !is_consonant(w, 0) && is_consonant(w, 1);
}

bool ends_with(std::string_view w, std::string_view suffix) {
  return w.size() >= suffix.size() && w.substr(w.size() - suffix.size()) == suffix;
}

using Condition = std::function<bool(std::string_view)>;

struct Rule {
  std::string_view suffix;
  std::string_view replacement;
  Condition condition;  // empty = unconditional
};

// First rule whose suffix matches decides; a failed condition leaves the word as is.
std::string apply_rules(const std::string& word, const std::vector<Rule>& rules) {
  for (const auto& r : rules) {
    if (ends_with(word, r.suffix)) {
      std::string_view stem(word.data(), word.size() - r.suffix.size());
      if (!r.condition || r.condition(stem)) return std::string(stem) + std::string(r.replacement);
      return word;
    }
  }
  return word;
}

bool positive_measure(std::string_view s) { return measure(s) > 0; }
bool measure_gt1(std::string_view s) { return measure(s) > 1; }

std::string step1a(const std::string& w) {
  if (ends_with(w, "ies") && w.size() == 4) return w.substr(0, 1) + "ie";
  return apply_rules(w, {{"sses", "ss", {}}, {"ies", "i", {}}, {"ss", "ss", {}}, {"s", "", {}}});
}

std::string step1b(const std::string& w) {
  if (ends_with(w, "ied")) return w.substr(0, w.size() - 3) + (w.size() == 4 ? "ie" : "i");
  if (ends_with(w, "eed")) {
    std::string_view stem(w.data(), w.size() - 3);
    return measure(stem) > 0 ? std::string(stem) + "ee" : w;
  }
  std::string inter;
  bool stripped = false;
  for (std::string_view suffix : {std::string_view("ed"), std::string_view("ing")}) {
    if (ends_with(w, suffix)) {
      std::string_view stem(w.data(), w.size() - suffix.size());
      if (contains_vowel(stem)) {
        inter = std::string(stem);
        stripped = true;
        break;
      }
    }
  }
  if (!stripped) return w;
  if (ends_with(inter, "at")) return inter + "e";
  if (ends_with(inter, "bl")) return inter + "e";
  if (ends_with(inter, "iz")) return inter + "e";
  if (ends_double_consonant(inter)) {
    const char last = inter.back();
    if (last != 'l' && last != 's' && last != 'z') return inter.substr(0, inter.size() - 1);
    return inter;
  }
  if (measure(inter) == 1 && ends_cvc(inter)) return inter + "e";
  return inter;
}

std::string step1c(const std::string& w) {
  return apply_rules(w, {{"y", "i", [](std::string_view s) { return s.size() > 1 && is_consonant(s, s.size() - 1); }}});
}

std::string step2(const std::string& w) {
  if (ends_with(w, "alli") && positive_measure(std::string_view(w.data(), w.size() - 4)))
    return step2(w.substr(0, w.size() - 4) + "al");
  const std::string_view full(w);
  return apply_rules(w, {
                            {"ational", "ate", positive_measure},
                            {"tional", "tion", positive_measure},
                            {"enci", "ence", positive_measure},
                            {"anci", "ance", positive_measure},
                            {"izer", "ize", positive_measure},
                            {"bli", "ble", positive_measure},
                            {"alli", "al", positive_measure},
                            {"entli", "ent", positive_measure},
                            {"eli", "e", positive_measure},
                            {"ousli", "ous", positive_measure},
                            {"ization", "ize", positive_measure},
                            {"ation", "ate", positive_measure},
                            {"ator", "ate", positive_measure},
                            {"alism", "al", positive_measure},
                            {"iveness", "ive", positive_measure},
                            {"fulness", "ful", positive_measure},
                            {"ousness", "ous", positive_measure},
                            {"aliti", "al", positive_measure},
                            {"iviti", "ive", positive_measure},
                            {"biliti", "ble", positive_measure},
                            {"fulli", "ful", positive_measure},
                            // measured on the word minus "ogi", as NLTK does
                            {"logi", "log", [full](std::string_view) { return positive_measure(full.substr(0, full.size() - 3)); }},
                        });
}

std::string step3(const std::string& w) {
  return apply_rules(w, {{"icate", "ic", positive_measure},
                         {"ative", "", positive_measure},
                         {"alize", "al", positive_measure},
                         {"iciti", "ic", positive_measure},
                         {"ical", "ic", positive_measure},
                         {"ful", "", positive_measure},
                         {"ness", "", positive_measure}});
}

std::string step4(const std::string& w) {
  return apply_rules(w, {{"al", "", measure_gt1},
                         {"ance", "", measure_gt1},
                         {"ence", "", measure_gt1},
                         {"er", "", measure_gt1},
                         {"ic", "", measure_gt1},
                         {"able", "", measure_gt1},
                         {"ible", "", measure_gt1},
                         {"ant", "", measure_gt1},
                         {"ement", "", measure_gt1},
                         {"ment", "", measure_gt1},
                         {"ent", "", measure_gt1},
                         {"ion", "", [](std::string_view s) { return measure(s) > 1 && !s.empty() && (s.back() == 's' || s.back() == 't'); }},
                         {"ou", "", measure_gt1},
                         {"ism", "", measure_gt1},
                         {"ate", "", measure_gt1},
                         {"iti", "", measure_gt1},
                         {"ous", "", measure_gt1},
                         {"ive", "", measure_gt1},
                         {"ize", "", measure_gt1}});
}

std::string step5a(const std::string& w) {
  if (!ends_with(w, "e")) return w;
  std::string_view stem(w.data(), w.size() - 1);
  const int m = measure(stem);
  if (m > 1 || (m == 1 && !ends_cvc(stem))) return std::string(stem);
  return w;
}

std::string step5b(const std::string& w) {
  if (ends_with(w, "ll") && measure(std::string_view(w.data(), w.size() - 1)) > 1) return w.substr(0, w.size() - 1);
  return w;
}

const std::unordered_map<std::string_view, std::string_view>& irregular_forms() {
  static const std::unordered_map<std::string_view, std::string_view> table = {
      {"sky", "sky"},         {"skies", "sky"},     {"dying", "die"},       {"lying", "lie"},       {"tying", "tie"},
      {"news", "news"},       {"innings", "inning"}, {"inning", "inning"},  {"outings", "outing"},  {"outing", "outing"},
      {"cannings", "canning"}, {"canning", "canning"}, {"howe", "howe"},    {"proceed", "proceed"}, {"exceed", "exceed"},
      {"succeed", "succeed"},
  };
  return table;
}

}  // namespace

bool is_ascii_punct(char c) {
  const auto u = static_cast<unsigned char>(c);
  return u < 0x80 && std::ispunct(u) != 0;
}

std::string to_lower_ascii(std::string_view text) {
  std::string out(text);
  for (auto& c : out)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return out;
}

std::string porter_stem(std::string_view word) {
  const auto& pool = irregular_forms();
  if (auto it = pool.find(word); it != pool.end()) return std::string(it->second);
  if (word.size() <= 2) return std::string(word);
  std::string w(word);
  w = step1a(w);
  w = step1b(w);
  w = step1c(w);
  w = step2(w);
  w = step3(w);
  w = step4(w);
  w = step5a(w);
  w = step5b(w);
  return w;
}

std::vector<std::string> preprocess(std::string_view text, TextMode mode) {
  const std::string lower = to_lower_ascii(text);
  std::vector<std::string> tokens;
  std::string cur;
  auto flush = [&] {
    if (cur.empty()) return;
    tokens.push_back(mode == TextMode::kClassical ? porter_stem(cur) : cur);
    cur.clear();
  };
  for (char c : lower) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      flush();
    } else if (is_ascii_punct(c)) {
      if (mode == TextMode::kPretrainedAdapter) {
        flush();
        tokens.emplace_back(1, c);
      }
    } else {
      cur.push_back(c);
    }
  }
  flush();
  return tokens;
}

}  // namespace htc
