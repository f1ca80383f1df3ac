#include "htc/taxonomy.hpp"

#include <algorithm>
#include <deque>
#include <fstream>

#include "htc/io.hpp"

namespace htc {

using Kind = TaxonomyError::Kind;

TaxonomyTree TaxonomyTree::from_nodes(std::vector<TopicNode> nodes) {
  TaxonomyTree tree;
  std::optional<TopicId> root;
  for (auto& n : nodes) {
    if (!n.parent) {
      if (root) throw TaxonomyError(Kind::kMultipleRoots, "multiple roots: '" + *root + "' and '" + n.id + "'");
      root = n.id;
    }
    if (!tree.nodes_.emplace(n.id, n).second) throw TaxonomyError(Kind::kDuplicateId, "duplicate topic id '" + n.id + "'");
  }
  if (!root) {
    if (nodes.empty()) throw TaxonomyError(Kind::kNoRoot, "empty taxonomy document");
    throw TaxonomyError(Kind::kCycle, "no root: every node has a parent, so the parent links form a cycle");
  }
  tree.root_ = *root;

  for (const auto& [id, n] : tree.nodes_) {
    tree.children_[id];
    if (!n.parent) continue;
    if (!tree.nodes_.count(*n.parent))
      throw TaxonomyError(Kind::kDanglingParent, "topic '" + id + "' refers to unknown parent '" + *n.parent + "'");
    tree.children_[*n.parent].push_back(id);
  }

  // Depths by BFS from the root; anything unreached sits on a cycle.
  for (auto& [id, n] : tree.nodes_) n.depth = -1;
  std::deque<TopicId> queue{tree.root_};
  tree.nodes_[tree.root_].depth = 0;
  std::size_t reached = 0;
  while (!queue.empty()) {
    TopicId id = queue.front();
    queue.pop_front();
    ++reached;
    const int d = tree.nodes_[id].depth;
    tree.max_depth_ = std::max(tree.max_depth_, d);
    for (const auto& c : tree.children_[id]) {
      tree.nodes_[c].depth = d + 1;
      queue.push_back(c);
    }
  }
  if (reached != tree.nodes_.size()) {
    for (const auto& [id, n] : tree.nodes_) {
      if (n.depth < 0)
        throw TaxonomyError(Kind::kCycle, "cycle detected: topic '" + id + "' is not reachable from the root");
    }
  }
  return tree;
}

TaxonomyTree TaxonomyTree::from_json(const nlohmann::json& doc) {
  if (!doc.is_array()) throw TaxonomyError(Kind::kMalformed, "taxonomy document must be a JSON array");
  std::vector<TopicNode> nodes;
  nodes.reserve(doc.size());
  for (const auto& item : doc) {
    if (!item.is_object() || !item.contains("id") || !item["id"].is_string())
      throw TaxonomyError(Kind::kMalformed, "taxonomy entry without string 'id': " + item.dump());
    TopicNode n;
    n.id = item["id"].get<std::string>();
    n.name = item.value("name", n.id);
    if (item.contains("parent") && !item["parent"].is_null()) {
      if (!item["parent"].is_string()) throw TaxonomyError(Kind::kMalformed, "parent of '" + n.id + "' must be a string or null");
      n.parent = item["parent"].get<std::string>();
    }
    nodes.push_back(std::move(n));
  }
  return from_nodes(std::move(nodes));
}

TaxonomyTree TaxonomyTree::load(const std::string& path) { return from_json(read_json(path)); }

nlohmann::json TaxonomyTree::to_json() const {
  // Parents before children so the document reads top-down.
  nlohmann::json out = nlohmann::json::array();
  auto emit = [&](const TopicNode& n) {
    out.push_back({{"id", n.id}, {"name", n.name}, {"parent", n.parent ? nlohmann::json(*n.parent) : nlohmann::json(nullptr)}});
  };
  if (nodes_.empty()) return out;
  emit(nodes_.at(root_));
  for (const auto& id : training_order()) emit(nodes_.at(id));
  return out;
}

void TaxonomyTree::save(const std::string& path) const { write_file_atomic(path, to_json().dump(2) + "\n"); }

const TopicNode& TaxonomyTree::node(const TopicId& id) const {
  auto it = nodes_.find(id);
  if (it == nodes_.end()) throw TaxonomyError(Kind::kUnknownTopic, "unknown topic id '" + id + "'");
  return it->second;
}

const std::vector<TopicId>& TaxonomyTree::children(const TopicId& id) const {
  auto it = children_.find(id);
  if (it == children_.end()) throw TaxonomyError(Kind::kUnknownTopic, "unknown topic id '" + id + "'");
  return it->second;
}

TopicSet TaxonomyTree::expand_labels(const TopicId& assigned) const {
  if (!is_topic(assigned)) throw TaxonomyError(Kind::kUnknownTopic, "cannot expand '" + assigned + "': not a topic of this tree");
  TopicSet out;
  const TopicNode* cur = &nodes_.at(assigned);
  while (cur->parent) {
    out.insert(cur->id);
    cur = &nodes_.at(*cur->parent);
  }
  return out;
}

TaxonomyTree TaxonomyTree::filtered(const std::set<TopicId>& keep) const {
  std::vector<TopicNode> kept;
  for (const auto& [id, n] : nodes_)
    if (id == root_ || keep.count(id)) kept.push_back(n);
  return from_nodes(std::move(kept));
}

TaxonomyTree TaxonomyTree::truncate_to_level(int level) const {
  if (level >= max_depth_) return *this;
  std::set<TopicId> keep;
  for (const auto& [id, n] : nodes_)
    if (n.depth <= level) keep.insert(id);
  return filtered(keep);
}

TaxonomyTree TaxonomyTree::prune_by_support(const std::map<TopicId, long>& train_counts, long min_support) const {
  std::set<TopicId> keep;
  // training_order visits parents first, so a dropped parent is known before its children.
  for (const auto& id : training_order()) {
    auto it = train_counts.find(id);
    const long count = it == train_counts.end() ? 0 : it->second;
    const auto& p = *nodes_.at(id).parent;
    const bool parent_alive = p == root_ || keep.count(p);
    if (parent_alive && count >= min_support) keep.insert(id);
  }
  return filtered(keep);
}

std::vector<TopicId> TaxonomyTree::training_order() const {
  std::vector<TopicId> order;
  if (nodes_.empty()) return order;
  order.reserve(topic_count());
  std::deque<TopicId> queue{root_};
  while (!queue.empty()) {
    const auto& kids = children_.at(queue.front());
    queue.pop_front();
    for (const auto& c : kids) {
      order.push_back(c);
      queue.push_back(c);
    }
  }
  return order;
}

}  // namespace htc
