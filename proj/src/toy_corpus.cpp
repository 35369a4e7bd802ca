#include "advtext/toy_corpus.hpp"

#include <algorithm>
#include <array>
#include <random>
#include <string>
#include <string_view>

namespace advtext {
namespace {

using Words = std::vector<std::string_view>;

const Words kPositiveAdj = {
    "brilliant", "wonderful", "superb", "delightful", "charming", "moving", "gripping",
    "excellent", "beautiful", "clever", "fantastic", "engaging", "touching", "stunning",
    "memorable", "hilarious", "masterful", "sublime", "terrific", "inspired", "heartfelt",
    "riveting", "splendid", "graceful", "powerful", "joyful", "smart", "lovely", "fresh",
    "uplifting", "magnificent", "thoughtful", "elegant", "vivid", "marvelous", "enchanting"};

const Words kNegativeAdj = {
    "awful", "terrible", "boring", "dreadful", "clumsy", "tedious", "bland", "painful",
    "horrible", "dull", "lifeless", "pointless", "weak", "stupid", "lazy", "annoying",
    "forgettable", "messy", "shallow", "pathetic", "sloppy", "ridiculous", "tiresome",
    "predictable", "confusing", "incoherent", "wooden", "cheap", "hollow", "grating",
    "uninspired", "unbearable", "disappointing", "mediocre", "flat", "irritating"};

const Words kPositiveVerb = {"loved", "enjoyed", "adored", "admired", "treasured",
                             "relished", "savored", "cherished"};
const Words kNegativeVerb = {"hated", "disliked", "loathed", "regretted", "endured",
                             "resented", "despised", "detested"};
const Words kPositiveNoun = {"masterpiece", "gem", "triumph", "delight", "treat", "joy", "classic"};
const Words kNegativeNoun = {"disaster", "mess", "failure", "letdown", "bore", "waste", "dud"};

const Words kAspect = {
    "acting", "plot", "script", "ending", "score", "soundtrack", "cinematography", "dialogue",
    "pacing", "cast", "story", "direction", "editing", "finale", "premise", "cameo",
    "screenplay", "performance", "lighting", "photography", "villain", "hero", "romance",
    "humor", "climax", "opening", "sequel", "effects", "costumes", "music", "camera", "twist"};

const Words kGenre = {"film", "movie", "thriller", "comedy", "drama", "western", "musical",
                      "documentary", "romance", "picture", "feature", "horror", "mystery",
                      "adventure", "satire", "fantasy", "cartoon", "biopic", "epic", "noir"};

const Words kRole = {"detective", "teacher", "soldier", "farmer", "doctor", "pilot", "singer",
                     "lawyer", "thief", "sailor", "nurse", "priest", "painter", "miner", "boxer",
                     "journalist", "scientist", "widow", "orphan", "king", "queen", "prince",
                     "spy", "clerk", "cowboy", "waitress", "student", "gambler", "writer",
                     "banker", "hunter", "dancer"};

const Words kAction = {"returns home", "travels north", "hides a secret", "loses a bet",
                       "finds a letter", "meets a stranger", "opens a shop", "joins a band",
                       "leaves town", "solves a case", "builds a boat", "writes a book",
                       "plans a wedding", "sells the farm", "buys a house", "crosses the river",
                       "chases a ghost", "climbs the tower", "starts a war", "steals a car",
                       "visits the island", "guards the gate", "calls the police",
                       "misses the train", "fixes the clock", "wins the race"};

const Words kPlace = {"Paris", "London", "Chicago", "Texas", "Rome", "Berlin", "Tokyo",
                      "Boston", "Vienna", "Cairo", "Lisbon", "Dublin", "Madrid", "Oslo",
                      "Prague", "Seattle", "Denver", "Naples", "Havana", "Sydney"};

const Words kTime = {"winter", "summer", "autumn", "spring", "wartime", "the fifties",
                     "the sixties", "the eighties", "the future", "the past"};

const Words kIntensifier = {"very ", "really ", "truly ", "quite ", "so ", "rather ",
                            "", "", "", "", ""};

const Words kNeutralAdj = {"long", "short", "old", "new", "quiet", "loud", "dark", "bright",
                           "small", "large", "slow", "fast", "cold", "warm", "early", "late",
                           "strange", "simple", "familiar", "foreign"};

const Words kWatchContext = {"on a Sunday", "with my brother", "at the cinema", "on television",
                             "last night", "with friends", "on a plane", "after work",
                             "with my wife", "at a festival", "on video", "in college"};

constexpr std::array<std::string_view, 24> kSyllables = {
    "ka", "lo", "mi", "ra", "to", "ne", "sa", "vi", "do", "re", "an", "el",
    "mar", "ben", "tis", "cor", "lin", "dus", "fel", "gar", "hal", "jon", "pet", "ros"};

class Generator {
 public:
  explicit Generator(std::uint64_t seed) : rng_(seed) {
    for (std::size_t i = 0; i < 120; ++i) {
      std::string name;
      const std::size_t parts = 2 + uniform(2);
      for (std::size_t p = 0; p < parts; ++p) name += kSyllables[uniform(kSyllables.size())];
      name[0] = static_cast<char>(name[0] - 'a' + 'A');
      names_.push_back(std::move(name));
    }
  }

  RawExample review(int label) {
    const std::size_t target = 10 + uniform(51);
    // The first sentence is an opinion that agrees with the label; order is
    // shuffled afterwards.
    std::vector<std::pair<std::string, std::size_t>> sentences;
    std::size_t tokens = 0;
    while (tokens < target) {
      std::string s;
      if (sentences.empty()) {
        s = opinion(label);
      } else if (chance(0.4)) {
        s = opinion(chance(0.8) ? label : 1 - label);
      } else {
        s = neutral();
      }
      const std::size_t n = tokenize(s).size();
      sentences.emplace_back(std::move(s), n);
      tokens += n;
    }
    while (tokens > 60 && sentences.size() > 1) {
      tokens -= sentences.back().second;
      sentences.pop_back();
    }
    std::shuffle(sentences.begin(), sentences.end(), rng_);
    std::string text;
    for (const auto& [s, n] : sentences) {
      if (!text.empty()) text.push_back(' ');
      text += s;
    }
    return {label, std::move(text)};
  }

 private:
  std::size_t uniform(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_);
  }
  bool chance(double p) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng_) < p; }
  std::string pick(const Words& w) { return std::string(w[uniform(w.size())]); }
  std::string name() { return names_[uniform(names_.size())]; }
  static std::string cap(std::string s) {
    if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = static_cast<char>(s[0] - 'a' + 'A');
    return s;
  }

  std::string opinion(int polarity) {
    const Words& adj = polarity ? kPositiveAdj : kNegativeAdj;
    const Words& opposite = polarity ? kNegativeAdj : kPositiveAdj;
    const Words& verb = polarity ? kPositiveVerb : kNegativeVerb;
    const Words& noun = polarity ? kPositiveNoun : kNegativeNoun;
    switch (uniform(9)) {
      case 0: return "The " + pick(kAspect) + " was " + pick(kIntensifier) + pick(adj) + ".";
      case 1: return "I " + pick(verb) + " the " + pick(kAspect) + "!";
      case 2: return "It's a " + pick(adj) + " " + pick(kGenre) + ".";
      case 3: return "The " + pick(kAspect) + " wasn't " + pick(opposite) + " at all.";
      case 4: return name() + " gave a " + pick(kIntensifier) + pick(adj) + " performance.";
      case 5: return "What a " + pick(noun) + "!";
      case 6: return "Honestly, I " + pick(verb) + " every minute of it.";
      case 7: return "This " + pick(kGenre) + " is " + pick(kIntensifier) + pick(adj) + " and " +
                     pick(adj) + ".";
      default: return "I didn't find it " + pick(opposite) + ".";
    }
  }

  std::string neutral() {
    switch (uniform(8)) {
      case 0: return name() + " plays a " + pick(kRole) + " who " + pick(kAction) + ".";
      case 1: return "The story is set in " + pick(kPlace) + " during " + pick(kTime) + ".";
      case 2: return "I watched it " + pick(kWatchContext) + ".";
      case 3: return cap(pick(kRole)) + " " + name() + " " + pick(kAction) + " in " + pick(kPlace) + ".";
      case 4: return "The " + pick(kGenre) + " runs about two hours.";
      case 5: return "There's a " + pick(kNeutralAdj) + " scene where the " + pick(kRole) + " " +
                     pick(kAction) + ".";
      case 6: return "It was directed by " + name() + " and stars " + name() + ".";
      default: return "The " + pick(kAspect) + " is " + pick(kNeutralAdj) + ".";
    }
  }

  std::mt19937_64 rng_;
  std::vector<std::string> names_;
};

}  // namespace

ToyCorpus generate_toy_corpus(std::uint64_t seed, std::size_t num_train, std::size_t num_test) {
  Generator gen(seed);
  ToyCorpus c;
  c.train.reserve(num_train);
  c.test.reserve(num_test);
  for (std::size_t i = 0; i < num_train; ++i) c.train.push_back(gen.review(static_cast<int>(i % 2)));
  for (std::size_t i = 0; i < num_test; ++i) c.test.push_back(gen.review(static_cast<int>(i % 2)));
  return c;
}

}  // namespace advtext
