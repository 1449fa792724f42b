#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <vector>

namespace floodsense {

/// Trie over sequences of `Symbol` (codepoints for unspaced scripts, whole
/// tokens otherwise) that answers "longest stored phrase starting here".
template <typename Symbol>
class PhraseTrie {
 public:
  using Payload = std::uint32_t;

  PhraseTrie() : nodes_(1) {}

  template <typename Seq>
  void insert(const Seq& phrase, Payload payload) {
    if (phrase.empty()) return;
    std::size_t node = 0;
    for (const auto& sym : phrase) {
      auto it = nodes_[node].next.find(sym);
      if (it == nodes_[node].next.end()) {
        nodes_.emplace_back();
        it = nodes_[node].next.emplace(sym, nodes_.size() - 1).first;
      }
      node = it->second;
    }
    nodes_[node].payloads.push_back(payload);
  }

  struct Match {
    std::size_t length = 0;  // symbols consumed
    const std::vector<Payload>* payloads = nullptr;
  };

  /// Longest phrase matching seq[start..]. `accept_end(k)` may veto a match
  /// ending after k symbols.
  template <typename Seq, typename AcceptEnd>
  std::optional<Match> longest_at(const Seq& seq, std::size_t start, AcceptEnd&& accept_end) const {
    std::optional<Match> best;
    std::size_t node = 0;
    for (std::size_t i = start; i < seq.size(); ++i) {
      auto it = nodes_[node].next.find(seq[i]);
      if (it == nodes_[node].next.end()) break;
      node = it->second;
      if (!nodes_[node].payloads.empty() && accept_end(i + 1 - start))
        best = Match{i + 1 - start, &nodes_[node].payloads};
    }
    return best;
  }

  template <typename Seq>
  std::optional<Match> longest_at(const Seq& seq, std::size_t start) const {
    return longest_at(seq, start, [](std::size_t) { return true; });
  }

  bool empty() const noexcept { return nodes_.size() == 1; }

 private:
  struct Node {
    std::map<Symbol, std::size_t> next;
    std::vector<Payload> payloads;
  };
  std::vector<Node> nodes_;
};

}  // namespace floodsense
