// Copyright 2026 The stex Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Synthetic review corpus for desk-scale runs. Every line is about one topic
// and uses that topic's nouns, adjectives and verbs, so embeddings trained on
// it cluster by topic. Sentiment words are shared across topics and the star
// rating always agrees with them. The matching POS and sentiment lexicons
// are generated from the same word lists.

#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "stex/common.hpp"
#include "stex/text.hpp"

namespace stex::desk {

struct Topic {
  std::string_view head;
  std::array<std::string_view, 6> nouns;
  std::array<std::string_view, 5> adjectives;
  std::array<std::string_view, 4> verbs;  // past tense
  std::string_view compound;              // two-word noun phrase
};

inline constexpr std::array<Topic, 8> kTopics = {{
    {"pizza", {"crust", "cheese", "sauce", "oven", "toppings", "slice"}, {"cheesy", "crispy", "thin", "saucy", "doughy"},
     {"ordered", "baked", "shared", "devoured"}, "pepperoni pizza"},
    {"hotel", {"room", "bed", "lobby", "pool", "suite", "balcony"}, {"spacious", "quiet", "modern", "cozy", "tidy"},
     {"booked", "stayed", "checked", "reserved"}, "front desk"},
    {"coffee", {"latte", "espresso", "beans", "mug", "barista", "foam"}, {"strong", "creamy", "roasted", "frothy", "iced"},
     {"brewed", "sipped", "drank", "poured"}, "cold brew"},
    {"car", {"engine", "tires", "brakes", "dashboard", "seats", "trunk"}, {"fast", "smooth", "roomy", "sporty", "quieter"},
     {"drove", "leased", "parked", "rented"}, "gas mileage"},
    {"sushi", {"rice", "salmon", "tuna", "roll", "wasabi", "nigiri"}, {"fresh", "raw", "tender", "seared", "chewy"},
     {"tasted", "dipped", "rolled", "sampled"}, "spicy tuna"},
    {"phone", {"screen", "battery", "camera", "charger", "case", "apps"}, {"sleek", "bright", "slim", "wireless", "sturdy"},
     {"bought", "charged", "unlocked", "upgraded"}, "battery life"},
    {"movie", {"plot", "actors", "ending", "soundtrack", "scenes", "director"}, {"dramatic", "funny", "scary", "long", "animated"},
     {"watched", "streamed", "rewatched", "filmed"}, "special effects"},
    {"bakery", {"bread", "croissant", "muffin", "cake", "pastry", "cookies"}, {"sweet", "flaky", "buttery", "warm", "crumbly"},
     {"baked", "frosted", "tried", "picked"}, "chocolate cake"},
}};

struct Valenced {
  std::string_view word;
  double valence;
};

inline constexpr std::array<Valenced, 14> kPositive = {{{"great", 3.1},
                                                        {"good", 1.9},
                                                        {"excellent", 2.7},
                                                        {"amazing", 2.8},
                                                        {"wonderful", 2.7},
                                                        {"fantastic", 2.6},
                                                        {"perfect", 2.7},
                                                        {"lovely", 2.8},
                                                        {"awesome", 3.1},
                                                        {"nice", 1.8},
                                                        {"superb", 3.1},
                                                        {"delightful", 2.8},
                                                        {"impressive", 2.3},
                                                        {"outstanding", 3.0}}};

inline constexpr std::array<Valenced, 14> kNegative = {{{"terrible", -2.1},
                                                        {"awful", -2.0},
                                                        {"bad", -2.5},
                                                        {"horrible", -2.5},
                                                        {"disappointing", -2.2},
                                                        {"mediocre", -1.1},
                                                        {"poor", -2.1},
                                                        {"dreadful", -2.7},
                                                        {"nasty", -2.6},
                                                        {"lousy", -2.5},
                                                        {"pathetic", -2.2},
                                                        {"unpleasant", -2.1},
                                                        {"miserable", -2.9},
                                                        {"lame", -1.8}}};

inline constexpr std::array<Valenced, 6> kOtherValenced = {
    {{"recommend", 1.5}, {"love", 3.2}, {"enjoyed", 2.0}, {"waste", -1.8}, {"regret", -1.9}, {"okay", 0.9}}};

inline constexpr std::array<std::string_view, 6> kNegators = {"not", "never", "no", "don't", "didn't", "wasn't"};
inline constexpr std::array<std::pair<std::string_view, double>, 4> kIntensifiers = {
    {{"very", 1.3}, {"really", 1.25}, {"extremely", 1.5}, {"quite", 1.1}}};

// Generic frame words that the default POS rules would mis-tag.
inline constexpr std::array<std::pair<std::string_view, std::string_view>, 8> kFrameTags = {{{"place", "NOUN"},
                                                                                              {"money", "NOUN"},
                                                                                              {"said", "VERB"},
                                                                                              {"come", "VERB"},
                                                                                              {"back", "OTHER"},
                                                                                              {"overall", "OTHER"},
                                                                                              {"again", "OTHER"},
                                                                                              {"last", "ADJ"}}};

// Frame nouns rotate so none of them outranks the topic heads.
inline constexpr std::array<std::string_view, 6> kPeople = {"friend", "sister", "brother", "cousin", "coworker",
                                                            "neighbor"};
inline constexpr std::array<std::string_view, 6> kTimes = {"night", "week", "weekend", "month", "summer", "friday"};

struct DeskConfig {
  std::size_t lines = 4000;
  double neutral_fraction = 0.1;
  std::uint64_t seed = 1;
};

struct DeskLine {
  int stars = 0;
  std::size_t topic = 0;
  std::string text;
};

namespace detail {

template <std::size_t N, class T>
const T& pick(const std::array<T, N>& a, Rng& rng) {
  return a[rng.below(N)];
}

inline std::string two_distinct(const Topic& t, Rng& rng, std::string* second) {
  const std::size_t a = rng.below(t.nouns.size());
  std::size_t b = rng.below(t.nouns.size() - 1);
  if (b >= a) ++b;
  *second = std::string(t.nouns[b]);
  return std::string(t.nouns[a]);
}

}  // namespace detail

// One review line. Polarity: +1 positive, -1 negative, 0 neutral.
inline std::string make_review(const Topic& t, int polarity, Rng& rng) {
  using detail::pick;
  auto sent = [&]() -> std::string {
    if (polarity > 0) return std::string(pick(kPositive, rng).word);
    if (polarity < 0) return std::string(pick(kNegative, rng).word);
    return "okay";
  };
  auto closing = [&]() -> std::string {
    static constexpr std::array<std::string_view, 3> kPos = {"i would recommend it.", "i will come back again!",
                                                             "i really enjoyed it."};
    static constexpr std::array<std::string_view, 3> kNeg = {"i would not recommend it.", "what a waste of money.",
                                                             "i regret it."};
    static constexpr std::array<std::string_view, 2> kNeu = {"it was fine.", "nothing special."};
    if (polarity > 0) return std::string(pick(kPos, rng));
    if (polarity < 0) return std::string(pick(kNeg, rng));
    return std::string(pick(kNeu, rng));
  };
  const std::string h(t.head);
  const std::string adj(pick(t.adjectives, rng));
  const std::string verb(pick(t.verbs, rng));
  std::string n2;
  const std::string n1 = detail::two_distinct(t, rng, &n2);
  switch (rng.below(7)) {
    case 0: return "the " + h + " here was " + sent() + " and the " + n1 + " was " + adj + ".";
    case 1: return "i " + verb + " the " + adj + " " + h + " and it was " + sent() + ". " + closing();
    case 2:
      return "we " + verb + " a " + h + " last " + std::string(pick(kTimes, rng)) + ", the " + n1 + " was " + sent() +
             ".";
    case 3:
      return "this " + h + " is " + sent() + ", the " + n1 + " is " + adj + " and the " + n2 + " is " + sent() + ".";
    case 4: return "the " + n1 + " of this " + h + " was " + adj + " but " + sent() + " overall.";
    case 5:
      return "my " + std::string(pick(kPeople, rng)) + " " + verb + " the " + std::string(t.compound) +
             " and said the " + n1 + " was " + sent() + ".";
    default:
      return "the " + std::string(t.compound) + " was " + sent() + " and the " + adj + " " + n1 + " was " + sent() +
             ". " + closing();
  }
}

inline std::vector<DeskLine> generate(const DeskConfig& cfg) {
  if (cfg.lines == 0) throw Error(Errc::kInvalidArgument, "desk corpus: lines must be positive");
  if (cfg.neutral_fraction < 0.0 || cfg.neutral_fraction >= 1.0) {
    throw Error(Errc::kInvalidArgument, "desk corpus: neutral_fraction must be in [0,1)");
  }
  Rng rng(cfg.seed);
  std::vector<DeskLine> out;
  out.reserve(cfg.lines);
  for (std::size_t i = 0; i < cfg.lines; ++i) {
    DeskLine line;
    line.topic = rng.below(kTopics.size());
    int polarity = 0;
    if (rng.uniform() >= cfg.neutral_fraction) polarity = rng.below(2) == 0 ? 1 : -1;
    line.stars = polarity > 0 ? 4 + static_cast<int>(rng.below(2)) : polarity < 0 ? 1 + static_cast<int>(rng.below(2)) : 3;
    line.text = make_review(kTopics[line.topic], polarity, rng);
    line.text[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(line.text[0])));
    out.push_back(std::move(line));
  }
  return out;
}

// "stars<TAB>text" lines.
inline std::string format_reviews(const std::vector<DeskLine>& lines) {
  std::string out;
  for (const auto& l : lines) out += std::to_string(l.stars) + '\t' + l.text + '\n';
  return out;
}

inline std::string pos_lexicon_text() {
  std::string out;
  for (const auto& t : kTopics) {
    out += std::string(t.head) + "\tNOUN\n";
    for (auto w : t.nouns) out += std::string(w) + "\tNOUN\n";
    for (auto w : t.adjectives) out += std::string(w) + "\tADJ\n";
    for (auto w : t.verbs) out += std::string(w) + "\tVERB\n";
    out += split_ws(t.compound).back() + "\tNOUN\n";
  }
  for (const auto& v : kPositive) out += std::string(v.word) + "\tADJ\n";
  for (const auto& v : kNegative) out += std::string(v.word) + "\tADJ\n";
  out += "recommend\tVERB\nlove\tVERB\nenjoyed\tVERB\nwaste\tNOUN\nregret\tVERB\nokay\tADJ\nfine\tADJ\n";
  out += "special\tADJ\nnothing\tOTHER\n";
  for (const auto& [w, tag] : kFrameTags) out += std::string(w) + '\t' + std::string(tag) + '\n';
  return out;
}

inline std::string sentiment_lexicon_text() {
  std::string out;
  auto add = [&](const Valenced& v) { out += std::string(v.word) + '\t' + format_double(v.valence) + '\n'; };
  for (const auto& v : kPositive) add(v);
  for (const auto& v : kNegative) add(v);
  for (const auto& v : kOtherValenced) add(v);
  return out;
}

inline std::string sentiment_modifiers_text() {
  std::string out;
  for (auto w : kNegators) out += std::string(w) + "\tnegator\n";
  for (const auto& [w, m] : kIntensifiers) out += std::string(w) + '\t' + format_double(m) + '\n';
  return out;
}

}  // namespace stex::desk
