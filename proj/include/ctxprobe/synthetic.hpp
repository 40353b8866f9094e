#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace ctxprobe {

// The bundled 50-fact probe: 5 relations x 10 facts, invented two-word
// subjects, one-sentence evidences that name the subject and the answer and
// no other candidate. Evidence shares enough content words with its own
// cloze query to clear the mock NSP gate and too few with any other fact's
// query to clear it.
struct SyntheticProbe {
  std::vector<nlohmann::json> relations;
  std::vector<nlohmann::json> facts;
  std::vector<nlohmann::json> paragraphs;
  std::vector<nlohmann::json> generated;
  std::vector<std::string> vocab;
  // Closed-form P@1 and NSP rates for the copy mock (uniform prior).
  nlohmann::json expected;
};

SyntheticProbe make_synthetic_probe();

// Writes facts.jsonl, relations.jsonl, vocab.txt, corpus.jsonl,
// generated.jsonl, expected.json and run_config.json into `dir`.
void write_synthetic_probe(const SyntheticProbe& probe, const std::filesystem::path& dir);

}  // namespace ctxprobe
