#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace htc {

using TopicId = std::string;
using TopicSet = std::set<TopicId>;

struct TopicNode {
  TopicId id;
  std::string name;
  std::optional<TopicId> parent;  // empty only for the synthetic root
  int depth = 0;

  bool operator==(const TopicNode&) const = default;
};

class TaxonomyError : public std::runtime_error {
 public:
  enum class Kind { kCycle, kDuplicateId, kMultipleRoots, kNoRoot, kDanglingParent, kUnknownTopic, kMalformed };

  TaxonomyError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

// Single-rooted topic tree. The root is structural only: it never appears in
// label sets, in topic_count() or in training_order().
class TaxonomyTree {
 public:
  TaxonomyTree() = default;

  // Validates and builds a tree from (id, name, parent) triples.
  static TaxonomyTree from_nodes(std::vector<TopicNode> nodes);
  static TaxonomyTree from_json(const nlohmann::json& doc);
  static TaxonomyTree load(const std::string& path);

  nlohmann::json to_json() const;
  void save(const std::string& path) const;

  const TopicId& root() const { return root_; }
  const TopicNode& node(const TopicId& id) const;
  bool contains(const TopicId& id) const { return nodes_.count(id) != 0; }
  bool is_topic(const TopicId& id) const { return contains(id) && id != root_; }

  // Number of non-root topics (n).
  std::size_t topic_count() const { return nodes_.empty() ? 0 : nodes_.size() - 1; }
  int max_depth() const { return max_depth_; }

  const std::map<TopicId, TopicNode>& nodes() const { return nodes_; }
  // Children sorted by id.
  const std::vector<TopicId>& children(const TopicId& id) const;
  const std::optional<TopicId>& parent(const TopicId& id) const { return node(id).parent; }

  // The topic together with all of its non-root ancestors.
  TopicSet expand_labels(const TopicId& assigned) const;

  TaxonomyTree truncate_to_level(int level) const;

  // Drops topics with fewer than min_support training examples along with
  // their whole subtree. Missing counts are treated as zero.
  TaxonomyTree prune_by_support(const std::map<TopicId, long>& train_counts, long min_support) const;

  // Breadth-first, siblings by id; every topic follows its parent.
  std::vector<TopicId> training_order() const;

  bool operator==(const TaxonomyTree& other) const { return root_ == other.root_ && nodes_ == other.nodes_; }

 private:
  TopicId root_;
  std::map<TopicId, TopicNode> nodes_;
  std::map<TopicId, std::vector<TopicId>> children_;
  int max_depth_ = 0;

  TaxonomyTree filtered(const std::set<TopicId>& keep) const;
};

}  // namespace htc
