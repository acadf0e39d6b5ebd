#include "gecw/synth.h"

#include <array>
#include <random>
#include <string>
#include <utility>

namespace gecw {
namespace {

struct Subject {
  const char* word;
  bool third_singular;
};

struct Verb {
  const char* base;
  const char* third;
  const char* prep;  // governed preposition, nullptr for transitive use
};

constexpr std::array<Subject, 8> kSubjects = {{{"he", true},
                                               {"she", true},
                                               {"it", true},
                                               {"i", false},
                                               {"we", false},
                                               {"they", false},
                                               {"you", false},
                                               {"tom", true}}};

constexpr std::array<Verb, 10> kVerbs = {{{"go", "goes", "to"},
                                          {"walk", "walks", "to"},
                                          {"listen", "listens", "to"},
                                          {"look", "looks", "at"},
                                          {"wait", "waits", "for"},
                                          {"arrive", "arrives", "at"},
                                          {"have", "has", nullptr},
                                          {"like", "likes", nullptr},
                                          {"see", "sees", nullptr},
                                          {"want", "wants", nullptr}}};

constexpr std::array<const char*, 12> kNouns = {
    "school", "park",  "teacher", "book",   "friend", "car",
    "house",  "river", "market",  "doctor", "dog",    "garden"};

constexpr std::array<const char*, 8> kAdjectives = {
    "big", "small", "old", "new", "good", "quiet", "busy", "green"};

constexpr std::array<const char*, 4> kTimes = {"today", "now", "again", "often"};

constexpr std::array<const char*, 6> kPreps = {"to", "at", "for", "in", "on", "with"};

constexpr std::array<std::pair<const char*, const char*>, 8> kMisspell = {{
    {"school", "schol"},
    {"friend", "freind"},
    {"teacher", "teachr"},
    {"garden", "gardn"},
    {"market", "markit"},
    {"doctor", "docter"},
    {"river", "rivr"},
    {"house", "hous"},
}};

class Generator {
 public:
  explicit Generator(std::uint64_t seed) : rng_(seed) {}

  std::size_t Pick(std::size_t n) { return static_cast<std::size_t>(rng_() % n); }
  double Uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

  Tokens CleanSentence() {
    const Subject& subj = kSubjects[Pick(kSubjects.size())];
    const Verb& verb = kVerbs[Pick(kVerbs.size())];
    Tokens s;
    s.emplace_back(subj.word);
    s.emplace_back(subj.third_singular ? verb.third : verb.base);
    if (verb.prep != nullptr) s.emplace_back(verb.prep);
    s.emplace_back(Pick(2) == 0 ? "the" : "a");
    if (Pick(2) == 0) s.emplace_back(kAdjectives[Pick(kAdjectives.size())]);
    s.emplace_back(kNouns[Pick(kNouns.size())]);
    if (Pick(3) == 0) s.emplace_back(kTimes[Pick(kTimes.size())]);
    s.emplace_back(".");
    return s;
  }

  // Applies one random error rule in place; returns false if none applied.
  bool InjectError(Tokens& s) {
    switch (Pick(6)) {
      case 0: {  // agreement: third-person form <-> base form
        for (const Verb& v : kVerbs) {
          if (s[1] == v.third) { s[1] = v.base; return true; }
          if (s[1] == v.base) { s[1] = v.third; return true; }
        }
        return false;
      }
      case 1: {  // dropped article
        for (std::size_t i = 0; i < s.size(); ++i) {
          if (s[i] == "the" || s[i] == "a") {
            s.erase(s.begin() + static_cast<std::ptrdiff_t>(i));
            return true;
          }
        }
        return false;
      }
      case 2: {  // dropped or wrong preposition
        for (std::size_t i = 0; i < s.size(); ++i) {
          for (const char* p : kPreps) {
            if (s[i] != p) continue;
            if (Pick(2) == 0) {
              s.erase(s.begin() + static_cast<std::ptrdiff_t>(i));
            } else {
              std::string other = s[i];
              while (other == s[i]) other = kPreps[Pick(kPreps.size())];
              s[i] = other;
            }
            return true;
          }
        }
        return false;
      }
      case 3: {  // duplicated word
        const std::size_t i = Pick(s.size() - 1);
        s.insert(s.begin() + static_cast<std::ptrdiff_t>(i), s[i]);
        return true;
      }
      case 4: {  // misspelling
        for (std::string& tok : s) {
          for (const auto& [right, wrong] : kMisspell) {
            if (tok == right) { tok = wrong; return true; }
          }
        }
        return false;
      }
      default: {  // wrong article
        for (std::string& tok : s) {
          if (tok == "the") { tok = "a"; return true; }
          if (tok == "a") { tok = "the"; return true; }
        }
        return false;
      }
    }
  }

  // A plausible-looking but wrong annotation of `source`.
  Tokens Corrupt(const Tokens& source, const Tokens& clean) {
    switch (Pick(3)) {
      case 0:
        if (source != clean) return source;  // correction missed
        [[fallthrough]];
      case 1: {  // spurious substitution
        Tokens t = clean;
        const std::size_t i = Pick(t.size() - 1);
        t[i] = RandomWord();
        return t;
      }
      default: {  // spurious insertion
        Tokens t = clean;
        const std::size_t i = 1 + Pick(t.size() - 1);
        t.insert(t.begin() + static_cast<std::ptrdiff_t>(i), RandomWord());
        return t;
      }
    }
  }

 private:
  std::string RandomWord() {
    switch (Pick(4)) {
      case 0: return kNouns[Pick(kNouns.size())];
      case 1: return kAdjectives[Pick(kAdjectives.size())];
      case 2: return kPreps[Pick(kPreps.size())];
      default: return kVerbs[Pick(kVerbs.size())].base;
    }
  }

  std::mt19937_64 rng_;
};

}  // namespace

SynthCorpus GenerateSynthetic(const SynthConfig& config) {
  Generator gen(config.seed);
  SynthCorpus out;
  out.noisy.name = "synthetic-noisy";
  out.clean.name = "synthetic-clean";
  for (std::size_t id = 0; id < config.num_samples; ++id) {
    const Tokens clean = gen.CleanSentence();
    Tokens source = clean;
    if (gen.Uniform() >= config.error_free_rate) {
      const int errors = 1 + static_cast<int>(gen.Pick(2));
      for (int e = 0, tries = 0; e < errors && tries < 10; ++tries) {
        if (gen.InjectError(source)) ++e;
      }
    }
    const bool corrupt = gen.Uniform() < config.corruption_rate;
    Tokens target = corrupt ? gen.Corrupt(source, clean) : clean;
    out.clean.samples.push_back({id, source, clean});
    out.noisy.samples.push_back({id, std::move(source), std::move(target)});
    out.corrupted.push_back(corrupt);
  }
  return out;
}

}  // namespace gecw
