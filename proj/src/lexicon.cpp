// Copyright 2026 The Synthesis Harness Authors
// SPDX-License-Identifier: Apache-2.0

#include <cctype>
#include <fstream>

#include "synth/error.h"
#include "synth/measure.h"

namespace synth {

namespace {

// Small general-purpose polarity lexicon, skewed toward critic vocabulary.
constexpr const char* kPositiveWords[] = {
    "admirable", "amazing", "appealing", "beautiful", "best", "breathtaking",
    "brilliant", "captivating", "charming", "clever", "compelling", "delight",
    "delightful", "effective", "elegant", "engaging", "enjoyable", "entertaining",
    "excellent", "exceptional", "exciting", "exquisite", "fantastic", "fascinating",
    "fine", "fresh", "fun", "funny", "gem", "generous", "genuine", "good",
    "gorgeous", "gripping", "great", "heartfelt", "hilarious", "impressive",
    "insightful", "inspired", "intelligent", "lovely", "magnificent", "marvelous",
    "masterful", "masterpiece", "memorable", "moving", "outstanding", "pleasant",
    "polished", "powerful", "remarkable", "rewarding", "rich", "satisfying",
    "sharp", "smart", "solid", "spectacular", "splendid", "strong", "stunning",
    "superb", "sweet", "terrific", "thoughtful", "thrilling", "touching",
    "triumph", "warm", "winning", "witty", "wonderful", "worthwhile",
};

constexpr const char* kNegativeWords[] = {
    "annoying", "awful", "awkward", "bad", "bland", "boring", "clumsy",
    "confused", "crass", "crude", "disappointing", "disaster", "dreadful", "dull",
    "embarrassing", "empty", "failure", "flat", "flawed", "forgettable",
    "frustrating", "generic", "hollow", "horrible", "inconsistent", "incoherent",
    "lackluster", "lame", "lazy", "lifeless", "mediocre", "mess", "messy",
    "muddled", "pointless", "poor", "predictable", "pretentious", "ridiculous",
    "sloppy", "slow", "stale", "stupid", "tedious", "terrible", "tiresome",
    "tired", "unfunny", "uninspired", "unpleasant", "waste", "weak", "worst",
    "worse", "aimless", "obvious", "overlong", "shallow", "silly", "trite",
};

}  // namespace

const Lexicon& Lexicon::builtin() {
  static const Lexicon lexicon = [] {
    Lexicon lx;
    for (const char* w : kPositiveWords) lx.positive.insert(w);
    for (const char* w : kNegativeWords) lx.negative.insert(w);
    return lx;
  }();
  return lexicon;
}

Lexicon Lexicon::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read lexicon " + path.string());
  Lexicon lx;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto sep = line.find_first_of("\t ");
    if (sep == std::string::npos)
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": expected '<word> <polarity>'");
    std::string word = line.substr(0, sep);
    std::string polarity = line.substr(line.find_first_not_of("\t ", sep));
    while (!polarity.empty() && std::isspace(static_cast<unsigned char>(polarity.back())))
      polarity.pop_back();
    for (char& c : word) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (polarity == "positive" || polarity == "+1" || polarity == "1") {
      lx.positive.insert(word);
    } else if (polarity == "negative" || polarity == "-1") {
      lx.negative.insert(word);
    } else {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": unknown polarity '" +
                        polarity + "'");
    }
  }
  return lx;
}

}  // namespace synth
