#include "ctxprobe/featurizer.hpp"

#include <algorithm>

#include "ctxprobe/error.hpp"
#include "ctxprobe/text.hpp"

namespace ctxprobe {

namespace {

void push_word(std::string_view word, std::vector<std::string>& out) {
  std::size_t lead = 0;
  while (lead < word.size() && is_ascii_punct(word[lead])) ++lead;
  if (lead == word.size()) {
    for (char c : word) out.emplace_back(1, c);
    return;
  }
  std::size_t tail = word.size();
  while (tail > lead && is_ascii_punct(word[tail - 1])) --tail;
  for (std::size_t i = 0; i < lead; ++i) out.emplace_back(1, word[i]);
  out.emplace_back(word.substr(lead, tail - lead));
  for (std::size_t i = tail; i < word.size(); ++i) out.emplace_back(1, word[i]);
}

}  // namespace

std::string_view to_string(SegmentMode m) noexcept {
  switch (m) {
    case SegmentMode::TwoSegment: return "two_segment";
    case SegmentMode::OneSegment: return "one_segment";
    case SegmentMode::SeparatorOnly: return "separator_only";
  }
  return "two_segment";
}

SegmentMode parse_segment_mode(std::string_view name) {
  for (auto m : {SegmentMode::TwoSegment, SegmentMode::OneSegment, SegmentMode::SeparatorOnly}) {
    if (to_string(m) == name) return m;
  }
  throw InvalidArgument("unknown segment mode '" + std::string(name) + "'");
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  for (auto chunk : split_whitespace(text)) {
    // "[MASK]." or "([MASK])": split around each embedded mask.
    std::size_t pos = 0;
    while (true) {
      auto hit = chunk.find(kMaskToken, pos);
      auto piece = chunk.substr(pos, hit == std::string_view::npos ? std::string_view::npos : hit - pos);
      if (!piece.empty()) push_word(piece, out);
      if (hit == std::string_view::npos) break;
      out.emplace_back(kMaskToken);
      pos = hit + kMaskToken.size();
    }
  }
  return out;
}

FeaturizedInput assemble(std::span<const std::string> query_tokens, std::span<const std::string> context_tokens,
                         SegmentMode mode, const Provenance& provenance, std::size_t max_length) {
  auto masks = std::count(query_tokens.begin(), query_tokens.end(), kMaskToken);
  if (masks != 1) throw InvalidArgument("query must contain exactly one mask token, found " + std::to_string(masks));
  if (std::find(context_tokens.begin(), context_tokens.end(), kMaskToken) != context_tokens.end()) {
    throw InvalidArgument("context must not contain the mask token");
  }
  if (query_tokens.size() + 2 > max_length) {
    throw QueryTooLong("query of " + std::to_string(query_tokens.size()) + " tokens does not fit in " +
                       std::to_string(max_length));
  }

  const bool sep_between = mode != SegmentMode::OneSegment;
  const std::size_t specials = sep_between ? 3 : 2;
  std::size_t budget = max_length >= query_tokens.size() + specials ? max_length - query_tokens.size() - specials : 0;
  auto context = context_tokens.first(std::min(budget, context_tokens.size()));

  FeaturizedInput fi;
  fi.mode = mode;
  fi.fact_uuid = provenance.fact_uuid;
  fi.strategy = provenance.strategy;
  fi.tokens.reserve(query_tokens.size() + context.size() + specials);

  fi.tokens.emplace_back(kClsToken);
  fi.query_begin = fi.tokens.size();
  fi.tokens.insert(fi.tokens.end(), query_tokens.begin(), query_tokens.end());
  fi.query_end = fi.tokens.size();

  if (context.empty()) {
    fi.tokens.emplace_back(kSepToken);
    fi.context_begin = fi.context_end = fi.tokens.size();
  } else {
    if (sep_between) fi.tokens.emplace_back(kSepToken);
    fi.context_begin = fi.tokens.size();
    fi.tokens.insert(fi.tokens.end(), context.begin(), context.end());
    fi.context_end = fi.tokens.size();
    fi.tokens.emplace_back(kSepToken);
  }

  fi.segment_ids.assign(fi.tokens.size(), 0);
  if (mode == SegmentMode::TwoSegment && !context.empty()) {
    std::fill(fi.segment_ids.begin() + static_cast<std::ptrdiff_t>(fi.context_begin), fi.segment_ids.end(), 1);
  }
  fi.mask_index = static_cast<std::size_t>(
      std::find(fi.tokens.begin() + static_cast<std::ptrdiff_t>(fi.query_begin), fi.tokens.end(), kMaskToken) -
      fi.tokens.begin());
  return fi;
}

}  // namespace ctxprobe
