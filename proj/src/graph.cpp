#include "enwalk/graph.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "enwalk/errors.hpp"
#include "json.hpp"

namespace enwalk {

namespace {

using nlohmann::json;

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

std::string_view strip_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

bool skippable(std::string_view line) {
  const auto first = line.find_first_not_of(" \t");
  return first == std::string_view::npos || line[first] == '#';
}

std::optional<double> parse_double(std::string_view text) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) return std::nullopt;
  return value;
}

std::uint64_t count_field(const json& obj, const char* key, bool required) {
  const auto it = obj.find(key);
  if (it == obj.end()) {
    if (required) throw std::invalid_argument(std::string("missing key '") + key + "'");
    return 0;
  }
  if (it->is_number_unsigned()) return it->get<std::uint64_t>();
  if (it->is_number_integer()) {
    if (it->get<std::int64_t>() < 0) throw std::invalid_argument(std::string("negative '") + key + "'");
    return it->get<std::uint64_t>();
  }
  throw std::invalid_argument(std::string("'") + key + "' must be a non-negative integer");
}

}  // namespace

void normalize_record(UserRecord& record) {
  if (record.fraud_tweets > record.total_tweets) {
    throw ValidationError("fraud_tweets exceeds total_tweets");
  }
  std::sort(record.active_days.begin(), record.active_days.end());
  record.active_days.erase(std::unique(record.active_days.begin(), record.active_days.end()),
                           record.active_days.end());
  for (const auto& [token, count] : record.mentions) {
    if (count == 0) throw ValidationError("mention '" + token + "' has zero count");
  }
  for (double f : record.trust_features) {
    if (!std::isfinite(f) || f < 0.0) throw ValidationError("trust features must be finite and >= 0");
  }
}

// --- SpamGraph ----------------------------------------------------------------

std::span<const Neighbor> SpamGraph::out_neighbors(NodeIndex v) const {
  return {out_adj_.data() + out_offsets_.at(v), out_adj_.data() + out_offsets_.at(v + 1)};
}

std::span<const Neighbor> SpamGraph::in_neighbors(NodeIndex v) const {
  return {in_adj_.data() + in_offsets_.at(v), in_adj_.data() + in_offsets_.at(v + 1)};
}

std::optional<NodeIndex> SpamGraph::find(std::string_view id) const {
  const auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

NodeIndex SpamGraph::index(std::string_view id) const {
  if (auto found = find(id)) return *found;
  throw LookupError("unknown node id '" + std::string(id) + "'");
}

// --- Builder ------------------------------------------------------------------

std::optional<NodeIndex> SpamGraph::Builder::find(std::string_view id) const {
  const auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

NodeIndex SpamGraph::Builder::add_node(std::string id, UserRecord record) {
  if (id.empty()) throw ValidationError("empty node id");
  if (index_.contains(id)) throw ValidationError("duplicate node id '" + id + "'");
  normalize_record(record);
  const auto idx = static_cast<NodeIndex>(ids_.size());
  index_.emplace(id, idx);
  ids_.push_back(std::move(id));
  records_.push_back(std::move(record));
  defaulted_.push_back(0);
  return idx;
}

NodeIndex SpamGraph::Builder::intern(std::string_view id) {
  if (auto found = find(id)) return *found;
  const NodeIndex idx = add_node(std::string(id), UserRecord{});
  defaulted_[idx] = 1;
  return idx;
}

void SpamGraph::Builder::add_edge(std::string_view src, std::string_view dst, double weight) {
  if (!std::isfinite(weight) || weight <= 0.0) {
    throw ValidationError("edge weight must be positive and finite");
  }
  const NodeIndex s = intern(src);
  const NodeIndex d = intern(dst);
  add_edge(s, d, weight);
}

void SpamGraph::Builder::add_edge(NodeIndex src, NodeIndex dst, double weight) {
  if (!std::isfinite(weight) || weight <= 0.0) {
    throw ValidationError("edge weight must be positive and finite");
  }
  if (src >= ids_.size() || dst >= ids_.size()) throw ValidationError("edge endpoint out of range");
  if (src == dst) {
    ++self_loops_;
    return;
  }
  edges_.push_back({src, dst, weight});
}

SpamGraph SpamGraph::Builder::build() && {
  SpamGraph g;
  g.ids_ = std::move(ids_);
  g.index_ = std::move(index_);
  g.records_ = std::move(records_);
  g.defaulted_ = std::move(defaulted_);
  g.stats_.self_loops_dropped = self_loops_;
  g.stats_.defaulted_records =
      static_cast<std::size_t>(std::count(g.defaulted_.begin(), g.defaulted_.end(), std::uint8_t{1}));

  std::stable_sort(edges_.begin(), edges_.end(), [](const Edge& a, const Edge& b) {
    return a.src != b.src ? a.src < b.src : a.dst < b.dst;
  });
  for (const Edge& e : edges_) {
    if (!g.edges_.empty() && g.edges_.back().src == e.src && g.edges_.back().dst == e.dst) {
      g.edges_.back().weight += e.weight;
      ++g.stats_.duplicate_edges_merged;
    } else {
      g.edges_.push_back(e);
    }
  }

  const std::size_t n = g.ids_.size();
  g.out_offsets_.assign(n + 1, 0);
  g.in_offsets_.assign(n + 1, 0);
  for (const Edge& e : g.edges_) {
    ++g.out_offsets_[e.src + 1];
    ++g.in_offsets_[e.dst + 1];
  }
  for (std::size_t i = 0; i < n; ++i) {
    g.out_offsets_[i + 1] += g.out_offsets_[i];
    g.in_offsets_[i + 1] += g.in_offsets_[i];
  }
  g.out_adj_.resize(g.edges_.size());
  g.in_adj_.resize(g.edges_.size());
  std::vector<std::size_t> out_fill(g.out_offsets_.begin(), g.out_offsets_.end() - 1);
  std::vector<std::size_t> in_fill(g.in_offsets_.begin(), g.in_offsets_.end() - 1);
  // Edges are sorted by (src, dst), so both lists come out sorted by neighbor.
  for (const Edge& e : g.edges_) {
    g.out_adj_[out_fill[e.src]++] = {e.dst, e.weight};
    g.in_adj_[in_fill[e.dst]++] = {e.src, e.weight};
  }
  return g;
}

// --- readers ------------------------------------------------------------------

void read_edges_tsv(std::istream& in, SpamGraph::Builder& builder, const std::string& source) {
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = strip_cr(raw);
    if (skippable(line)) continue;
    const auto fields = split_tabs(line);
    if (fields.size() < 2 || fields.size() > 3 || fields[0].empty() || fields[1].empty()) {
      throw ParseError(source, line_no, "expected src<TAB>dst[<TAB>weight]");
    }
    double weight = 1.0;
    if (fields.size() == 3) {
      const auto parsed = parse_double(fields[2]);
      if (!parsed) throw ParseError(source, line_no, "bad weight '" + std::string(fields[2]) + "'");
      weight = *parsed;
      if (!std::isfinite(weight) || weight <= 0.0) {
        throw ValidationError(source + ":" + std::to_string(line_no) + ": edge weight must be positive");
      }
    }
    builder.add_edge(fields[0], fields[1], weight);
  }
  if (in.bad()) throw IoError("read failure on " + source);
}

UserRecord parse_user_record(std::string_view json_line, std::string* id_out) {
  const json obj = json::parse(json_line);
  if (!obj.is_object()) throw std::invalid_argument("record must be a JSON object");
  const auto id_it = obj.find("id");
  if (id_it == obj.end() || !id_it->is_string()) throw std::invalid_argument("missing string key 'id'");
  if (id_out) *id_out = id_it->get<std::string>();

  UserRecord r;
  r.followers = count_field(obj, "followers", true);
  r.followings = count_field(obj, "followings", true);
  r.fraud_tweets = count_field(obj, "fraud_tweets", true);
  r.total_tweets = count_field(obj, "total_tweets", true);

  const auto days = obj.find("active_days");
  if (days == obj.end() || !days->is_array()) throw std::invalid_argument("'active_days' must be an array");
  for (const auto& d : *days) {
    if (!d.is_number_integer() || d.get<std::int64_t>() < 0 ||
        d.get<std::int64_t>() > std::numeric_limits<std::uint32_t>::max()) {
      throw std::invalid_argument("active_days entries must be non-negative integers");
    }
    r.active_days.push_back(d.get<std::uint32_t>());
  }

  const auto mentions = obj.find("mentions");
  if (mentions == obj.end() || !mentions->is_object()) throw std::invalid_argument("'mentions' must be an object");
  for (const auto& [token, count] : mentions->items()) {
    if (!count.is_number_integer() || count.get<std::int64_t>() <= 0) {
      throw std::invalid_argument("mention counts must be positive integers");
    }
    r.mentions.emplace(token, count.get<std::uint64_t>());
  }

  if (const auto trust = obj.find("trust_features"); trust != obj.end() && !trust->is_null()) {
    if (!trust->is_array() || trust->size() != kTrustFeatureCount) {
      throw std::invalid_argument("'trust_features' must be an array of 8 numbers");
    }
    for (std::size_t i = 0; i < kTrustFeatureCount; ++i) {
      if (!(*trust)[i].is_number()) throw std::invalid_argument("'trust_features' must be numeric");
      r.trust_features[i] = (*trust)[i].get<double>();
    }
  }
  if (const auto s = obj.find("suspended"); s != obj.end() && !s->is_null()) {
    if (s->is_boolean()) {
      r.suspended = s->get<bool>();
    } else if (s->is_number_integer() && (s->get<int>() == 0 || s->get<int>() == 1)) {
      r.suspended = s->get<int>() == 1;
    } else {
      throw std::invalid_argument("'suspended' must be a boolean");
    }
  }
  return r;
}

std::string format_user_record(const std::string& id, const UserRecord& r) {
  json obj = json::object();
  obj["id"] = id;
  obj["followers"] = r.followers;
  obj["followings"] = r.followings;
  obj["active_days"] = r.active_days;
  obj["fraud_tweets"] = r.fraud_tweets;
  obj["total_tweets"] = r.total_tweets;
  obj["mentions"] = json::object();
  for (const auto& [token, count] : r.mentions) obj["mentions"][token] = count;
  obj["trust_features"] = r.trust_features;
  if (r.suspended) obj["suspended"] = *r.suspended;
  return obj.dump();
}

void read_users_jsonl(std::istream& in, SpamGraph::Builder& builder, const std::string& source) {
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = strip_cr(raw);
    if (skippable(line)) continue;
    std::string id;
    UserRecord record;
    try {
      record = parse_user_record(line, &id);
    } catch (const json::exception& e) {
      throw ParseError(source, line_no, e.what());
    } catch (const std::invalid_argument& e) {
      throw ParseError(source, line_no, e.what());
    }
    try {
      builder.add_node(std::move(id), std::move(record));
    } catch (const ValidationError& e) {
      throw ValidationError(source + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (in.bad()) throw IoError("read failure on " + source);
}

SpamGraph load_graph(const std::filesystem::path& edges_path, const std::filesystem::path& users_path) {
  std::ifstream users(users_path);
  if (!users) throw IoError("cannot open " + users_path.string());
  std::ifstream edges(edges_path);
  if (!edges) throw IoError("cannot open " + edges_path.string());
  SpamGraph::Builder builder;
  read_users_jsonl(users, builder, users_path.string());
  read_edges_tsv(edges, builder, edges_path.string());
  return std::move(builder).build();
}

// --- writers ------------------------------------------------------------------

void write_edges_tsv(std::ostream& out, const SpamGraph& graph) {
  std::ostringstream weight;
  weight.precision(17);
  for (const Edge& e : graph.edges()) {
    out << graph.id(e.src) << '\t' << graph.id(e.dst);
    if (e.weight != 1.0) {
      weight.str({});
      weight << e.weight;
      out << '\t' << weight.str();
    }
    out << '\n';
  }
}

void write_users_jsonl(std::ostream& out, const SpamGraph& graph) {
  for (NodeIndex v = 0; v < graph.node_count(); ++v) {
    out << format_user_record(graph.id(v), graph.record(v)) << '\n';
  }
}

void save_graph(const SpamGraph& graph, const std::filesystem::path& edges_path,
                const std::filesystem::path& users_path) {
  std::ofstream edges(edges_path);
  if (!edges) throw IoError("cannot write " + edges_path.string());
  std::ofstream users(users_path);
  if (!users) throw IoError("cannot write " + users_path.string());
  write_edges_tsv(edges, graph);
  write_users_jsonl(users, graph);
  if (!edges || !users) throw IoError("write failure");
}

// --- labels -------------------------------------------------------------------

std::unordered_map<std::string, bool> read_labels_tsv(std::istream& in, const std::string& source) {
  std::unordered_map<std::string, bool> labels;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = strip_cr(raw);
    if (skippable(line)) continue;
    const auto fields = split_tabs(line);
    if (fields.size() != 2 || fields[0].empty() || (fields[1] != "0" && fields[1] != "1")) {
      throw ParseError(source, line_no, "expected node<TAB>0|1");
    }
    labels[std::string(fields[0])] = fields[1] == "1";
  }
  if (in.bad()) throw IoError("read failure on " + source);
  return labels;
}

void write_labels_tsv(std::ostream& out, const SpamGraph& graph, const Labels& labels) {
  if (labels.size() != graph.node_count()) throw ValidationError("label count does not match node count");
  for (NodeIndex v = 0; v < graph.node_count(); ++v) {
    out << graph.id(v) << '\t' << (labels[v] ? 1 : 0) << '\n';
  }
}

Labels resolve_labels(const SpamGraph& graph, const std::unordered_map<std::string, bool>& overrides) {
  Labels labels(graph.node_count(), 0);
  for (NodeIndex v = 0; v < graph.node_count(); ++v) {
    labels[v] = graph.record(v).suspended.value_or(false) ? 1 : 0;
  }
  for (const auto& [id, value] : overrides) labels[graph.index(id)] = value ? 1 : 0;
  return labels;
}

}  // namespace enwalk
