#include "ldr/noise.hpp"

#include <random>

#include "ldr/errors.hpp"

namespace ldr {

std::string noise_kind_name(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::none: return "none";
    case NoiseKind::uniform: return "uniform";
    case NoiseKind::pairwise: return "pairwise";
    case NoiseKind::circular: return "circular";
  }
  return "none";
}

NoiseKind noise_kind_from_name(const std::string& name) {
  for (NoiseKind k : {NoiseKind::none, NoiseKind::uniform, NoiseKind::pairwise, NoiseKind::circular})
    if (noise_kind_name(k) == name) return k;
  throw ConfigError("unknown noise kind '" + name + "'");
}

void NoiseSpec::validate(std::size_t K) const {
  if (!(rate >= 0.0 && rate <= 1.0)) throw ConfigError("noise rate must lie in [0, 1]");
  if (kind == NoiseKind::pairwise && pairs.empty()) throw ConfigError("pairwise noise needs at least one pair");
  std::vector<char> used(K, 0);
  for (const auto& [a, b] : pairs) {
    if (a >= K || b >= K) throw ConfigError("noise pair references a class outside [0, K)");
    if (a == b) throw ConfigError("noise pair maps a class to itself");
    if (used[a] || used[b]) throw ConfigError("a class appears in more than one noise pair");
    used[a] = used[b] = 1;
  }
}

NoisyLabels inject_noise(std::span<const std::size_t> labels, std::size_t K, const NoiseSpec& spec) {
  spec.validate(K);
  std::vector<std::ptrdiff_t> partner(K, -1);
  for (const auto& [a, b] : spec.pairs) {
    partner[a] = static_cast<std::ptrdiff_t>(b);
    partner[b] = static_cast<std::ptrdiff_t>(a);
  }
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> any_class(0, K - 1);

  NoisyLabels out{Labels(labels.begin(), labels.end()), std::vector<char>(labels.size(), 0)};
  if (spec.kind == NoiseKind::none) return out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= K) throw DomainError("label outside [0, K)");
    // One coin per row keeps the stream aligned across kinds and rates.
    const bool flip = coin(rng) < spec.rate;
    switch (spec.kind) {
      case NoiseKind::uniform: {
        const std::size_t draw = any_class(rng);
        if (flip) out.labels[i] = draw;
        break;
      }
      case NoiseKind::pairwise:
        if (flip && partner[labels[i]] >= 0) out.labels[i] = static_cast<std::size_t>(partner[labels[i]]);
        break;
      case NoiseKind::circular:
        if (flip) out.labels[i] = (labels[i] + 1) % K;
        break;
      case NoiseKind::none: break;
    }
    out.corrupted[i] = out.labels[i] != labels[i];
  }
  return out;
}

std::vector<std::string> builtin_class_names(const std::string& dataset) {
  if (dataset == "letter") {
    std::vector<std::string> names;
    for (char c = 'A'; c <= 'Z'; ++c) names.emplace_back(1, c);
    return names;
  }
  if (dataset == "vowel") return {"i", "I", "E", "A", "a:", "Y", "O", "C:", "U", "u:", "3:"};
  if (dataset == "news20") {
    return {"alt.atheism", "comp.graphics", "comp.os.ms-windows.misc", "comp.sys.ibm.pc.hardware",
            "comp.sys.mac.hardware", "comp.windows.x", "misc.forsale", "rec.autos", "rec.motorcycles",
            "rec.sport.baseball", "rec.sport.hockey", "sci.crypt", "sci.electronics", "sci.med", "sci.space",
            "soc.religion.christian", "talk.politics.guns", "talk.politics.mideast", "talk.politics.misc",
            "talk.religion.misc"};
  }
  return {};
}

std::vector<std::pair<std::string, std::string>> builtin_flip_pairs(const std::string& dataset) {
  if (dataset == "letter") {
    return {{"B", "D"}, {"C", "G"}, {"E", "F"}, {"H", "N"}, {"I", "L"},
            {"K", "X"}, {"M", "W"}, {"O", "Q"}, {"P", "R"}, {"U", "V"}};
  }
  if (dataset == "vowel") return {{"i", "I"}, {"E", "A"}, {"a:", "Y"}, {"C:", "O"}, {"u:", "U"}};
  if (dataset == "news20") {
    return {{"comp.os.ms-windows.misc", "comp.windows.x"},
            {"comp.sys.ibm.pc.hardware", "comp.sys.mac.hardware"},
            {"rec.autos", "rec.motorcycles"},
            {"rec.sport.baseball", "rec.sport.hockey"},
            {"sci.crypt", "sci.electronics"},
            {"soc.religion.christian", "talk.politics.misc"}};
  }
  return {};
}

std::vector<ClassPair> resolve_flip_pairs(const std::string& rules, const Dataset& data) {
  const auto names = builtin_class_names(rules);
  if (names.empty()) throw ConfigError("no builtin flip rules for '" + rules + "'");
  if (data.K != names.size())
    throw ConfigError("flip rules '" + rules + "' expect " + std::to_string(names.size()) + " classes, dataset has " +
                      std::to_string(data.K));
  auto index_of = [&](const std::string& n) {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == n) return i;
    throw ConfigError("unknown class name '" + n + "'");
  };
  std::vector<ClassPair> out;
  for (const auto& [a, b] : builtin_flip_pairs(rules)) out.emplace_back(index_of(a), index_of(b));
  return out;
}

}  // namespace ldr
