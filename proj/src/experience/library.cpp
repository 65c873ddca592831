#include "atc/experience/library.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <queue>

#include <fmt/format.h>

#include "atc/errors.hpp"
#include "atc/scenario/rng.hpp"

namespace atc::experience {

using nlohmann::json;

namespace {

std::uint64_t fnv1a64(const std::string& text) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

} // namespace

Library::Library(std::size_t dimension, HnswParams params)
    : dimension_(dimension), params_(params) {
    if (dimension_ == 0) raise(Errc::config_error, "library dimension must be positive");
    if (params_.max_links < 2 || params_.ef_construction < 1 || params_.ef_search < 1) {
        raise(Errc::config_error, "graph parameters out of range");
    }
}

Library::Library(Library&& other) noexcept {
    std::unique_lock lock(other.mu_);
    dimension_ = other.dimension_;
    params_ = other.params_;
    use_graph_ = other.use_graph_;
    docs_ = std::move(other.docs_);
    unit_ = std::move(other.unit_);
    by_id_ = std::move(other.by_id_);
    buckets_ = std::move(other.buckets_);
}

Library& Library::operator=(Library&& other) noexcept {
    if (this != &other) {
        std::scoped_lock lock(mu_, other.mu_);
        dimension_ = other.dimension_;
        params_ = other.params_;
        use_graph_ = other.use_graph_;
        docs_ = std::move(other.docs_);
        unit_ = std::move(other.unit_);
        by_id_ = std::move(other.by_id_);
        buckets_ = std::move(other.buckets_);
    }
    return *this;
}

std::size_t Library::size() const {
    std::shared_lock lock(mu_);
    return docs_.size();
}

std::vector<std::string> Library::ids() const {
    std::shared_lock lock(mu_);
    std::vector<std::string> out;
    out.reserve(docs_.size());
    for (const auto& d : docs_) out.push_back(d.id);
    std::sort(out.begin(), out.end());
    return out;
}

void Library::set_use_graph(bool use) {
    std::unique_lock lock(mu_);
    use_graph_ = use;
}

Library::BucketKey Library::key_of(const ExperienceDocument& doc) {
    return {doc.num_aircraft, static_cast<int>(doc.conflict_formation)};
}

std::vector<float> Library::normalized(const std::vector<float>& v) const {
    if (v.size() != dimension_) {
        raise(Errc::dimension_mismatch,
              fmt::format("vector has {} dimensions, library expects {}", v.size(), dimension_));
    }
    double norm2 = 0.0;
    for (float x : v) norm2 += static_cast<double>(x) * x;
    std::vector<float> out(v.size());
    if (norm2 < 1e-24) return out;
    double inv = 1.0 / std::sqrt(norm2);
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(v[i] * inv);
    return out;
}

double Library::dist(const std::vector<float>& q, std::size_t doc) const {
    const std::vector<float>& u = unit_[doc];
    double dot = 0.0;
    for (std::size_t i = 0; i < dimension_; ++i) dot += static_cast<double>(q[i]) * u[i];
    return 1.0 - dot;
}

int Library::assign_level(const std::string& id) const {
    std::uint64_t h = scenario::splitmix64(fnv1a64(id));
    double u = (static_cast<double>(h >> 11) + 1.0) * 0x1.0p-53; // (0, 1]
    double ml = 1.0 / std::log(static_cast<double>(params_.max_links));
    int level = static_cast<int>(std::floor(-std::log(u) * ml));
    return std::min(level, 24);
}

std::uint32_t Library::greedy_closest(const Bucket& b, const std::vector<float>& q,
                                      std::uint32_t ep, int layer) const {
    double best = dist(q, b.nodes[ep].doc);
    bool improved = true;
    while (improved) {
        improved = false;
        if (layer >= static_cast<int>(b.nodes[ep].links.size())) break;
        for (std::uint32_t nb : b.nodes[ep].links[layer]) {
            double d = dist(q, b.nodes[nb].doc);
            if (d < best) {
                best = d;
                ep = nb;
                improved = true;
            }
        }
    }
    return ep;
}

std::vector<std::pair<double, std::uint32_t>> Library::search_layer(const Bucket& b,
                                                                    const std::vector<float>& q,
                                                                    std::uint32_t ep,
                                                                    std::size_t ef,
                                                                    int layer) const {
    std::vector<char> visited(b.nodes.size(), 0);
    using Entry = std::pair<double, std::uint32_t>;
    // candidates: nearest first; result: farthest first (to trim)
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> candidates;
    std::priority_queue<Entry> result;

    double d0 = dist(q, b.nodes[ep].doc);
    visited[ep] = 1;
    candidates.emplace(d0, ep);
    result.emplace(d0, ep);

    while (!candidates.empty()) {
        auto [d, n] = candidates.top();
        candidates.pop();
        if (result.size() >= ef && d > result.top().first) break;
        if (layer < static_cast<int>(b.nodes[n].links.size())) {
            for (std::uint32_t nb : b.nodes[n].links[layer]) {
                if (visited[nb]) continue;
                visited[nb] = 1;
                double dn = dist(q, b.nodes[nb].doc);
                if (result.size() < ef || dn < result.top().first) {
                    candidates.emplace(dn, nb);
                    result.emplace(dn, nb);
                    if (result.size() > ef) result.pop();
                }
            }
        }
    }

    std::vector<Entry> out;
    out.reserve(result.size());
    while (!result.empty()) {
        out.push_back(result.top());
        result.pop();
    }
    std::sort(out.begin(), out.end());
    return out;
}

void Library::bucket_insert(Bucket& b, std::uint32_t n) {
    Node& node = b.nodes[n];
    node.links.assign(static_cast<std::size_t>(node.level) + 1, {});
    if (b.nodes.size() == 1) {
        b.entry = n;
        b.max_level = node.level;
        return;
    }

    const std::vector<float>& q = unit_[node.doc];
    std::uint32_t ep = b.entry;
    for (int layer = b.max_level; layer > node.level; --layer) {
        ep = greedy_closest(b, q, ep, layer);
    }
    for (int layer = std::min(node.level, b.max_level); layer >= 0; --layer) {
        auto found = search_layer(b, q, ep, static_cast<std::size_t>(params_.ef_construction),
                                  layer);
        std::size_t cap = static_cast<std::size_t>(layer == 0 ? 2 * params_.max_links
                                                              : params_.max_links);
        for (std::size_t i = 0; i < found.size() && i < cap; ++i) {
            std::uint32_t nb = found[i].second;
            if (nb == n) continue;
            node.links[layer].push_back(nb);
            auto& back = b.nodes[nb].links[layer];
            back.push_back(n);
            if (back.size() > cap) {
                const std::vector<float>& nv = unit_[b.nodes[nb].doc];
                std::stable_sort(back.begin(), back.end(),
                                 [&](std::uint32_t x, std::uint32_t y) {
                                     return dist(nv, b.nodes[x].doc) < dist(nv, b.nodes[y].doc);
                                 });
                back.resize(cap);
            }
        }
        if (!found.empty()) ep = found.front().second;
    }
    if (node.level > b.max_level) {
        b.max_level = node.level;
        b.entry = n;
    }
}

void Library::rebuild_bucket(Bucket& b) {
    std::vector<std::size_t> members;
    members.reserve(b.nodes.size());
    for (const auto& node : b.nodes) members.push_back(node.doc);
    std::sort(members.begin(), members.end());
    b.nodes.clear();
    b.max_level = -1;
    b.entry = 0;
    for (std::size_t doc : members) {
        Node node;
        node.doc = doc;
        node.level = assign_level(docs_[doc].id);
        b.nodes.push_back(std::move(node));
        bucket_insert(b, static_cast<std::uint32_t>(b.nodes.size() - 1));
    }
}

void Library::upsert(const ExperienceDocument& doc) {
    std::unique_lock lock(mu_);
    std::vector<float> unit = normalized(doc.embedding);

    auto it = by_id_.find(doc.id);
    if (it == by_id_.end()) {
        docs_.push_back(doc);
        unit_.push_back(std::move(unit));
        std::size_t idx = docs_.size() - 1;
        by_id_[doc.id] = idx;
        Bucket& b = buckets_[key_of(doc)];
        Node node;
        node.doc = idx;
        node.level = assign_level(doc.id);
        b.nodes.push_back(std::move(node));
        bucket_insert(b, static_cast<std::uint32_t>(b.nodes.size() - 1));
        return;
    }

    std::size_t idx = it->second;
    BucketKey old_key = key_of(docs_[idx]);
    BucketKey new_key = key_of(doc);
    docs_[idx] = doc;
    unit_[idx] = std::move(unit);
    if (old_key != new_key) {
        Bucket& old_bucket = buckets_[old_key];
        old_bucket.nodes.erase(std::remove_if(old_bucket.nodes.begin(), old_bucket.nodes.end(),
                                              [&](const Node& n) { return n.doc == idx; }),
                               old_bucket.nodes.end());
        if (old_bucket.nodes.empty()) {
            buckets_.erase(old_key);
        } else {
            rebuild_bucket(old_bucket);
        }
        Bucket& b = buckets_[new_key];
        Node node;
        node.doc = idx;
        node.level = assign_level(doc.id);
        b.nodes.push_back(std::move(node));
        rebuild_bucket(b);
    } else {
        rebuild_bucket(buckets_[new_key]);
    }
}

std::optional<ExperienceDocument> Library::get(const std::string& id) const {
    std::shared_lock lock(mu_);
    auto it = by_id_.find(id);
    if (it == by_id_.end()) return std::nullopt;
    ExperienceDocument doc = docs_[it->second];
    return doc;
}

std::optional<SearchHit> Library::brute_force_locked(const std::vector<float>& unit_query,
                                                     const Bucket& b) const {
    double best_sim = 0.0;
    std::size_t best_doc = 0;
    bool found = false;
    for (const auto& node : b.nodes) {
        double sim = 1.0 - dist(unit_query, node.doc);
        if (!found || sim > best_sim ||
            (sim == best_sim && docs_[node.doc].id < docs_[best_doc].id)) {
            found = true;
            best_sim = sim;
            best_doc = node.doc;
        }
    }
    if (!found) return std::nullopt;
    return SearchHit{docs_[best_doc], best_sim};
}

std::optional<SearchHit> Library::graph_locked(const std::vector<float>& unit_query,
                                               const Bucket& b) const {
    if (b.nodes.empty()) return std::nullopt;
    std::uint32_t ep = b.entry;
    for (int layer = b.max_level; layer >= 1; --layer) {
        ep = greedy_closest(b, unit_query, ep, layer);
    }
    auto found = search_layer(b, unit_query, ep,
                              static_cast<std::size_t>(params_.ef_search), 0);
    double best_sim = 0.0;
    std::size_t best_doc = 0;
    bool have = false;
    for (const auto& [d, n] : found) {
        double sim = 1.0 - d;
        std::size_t doc = b.nodes[n].doc;
        if (!have || sim > best_sim || (sim == best_sim && docs_[doc].id < docs_[best_doc].id)) {
            have = true;
            best_sim = sim;
            best_doc = doc;
        }
    }
    if (!have) return std::nullopt;
    return SearchHit{docs_[best_doc], best_sim};
}

std::optional<SearchHit> Library::search(const std::vector<float>& query, int num_aircraft,
                                         scenario::ConflictType formation) const {
    std::shared_lock lock(mu_);
    auto it = buckets_.find({num_aircraft, static_cast<int>(formation)});
    if (it == buckets_.end()) return std::nullopt;
    std::vector<float> q = normalized(query);
    if (!use_graph_) return brute_force_locked(q, it->second);
    return graph_locked(q, it->second);
}

std::optional<SearchHit> Library::brute_force_search(const std::vector<float>& query,
                                                     int num_aircraft,
                                                     scenario::ConflictType formation) const {
    std::shared_lock lock(mu_);
    auto it = buckets_.find({num_aircraft, static_cast<int>(formation)});
    if (it == buckets_.end()) return std::nullopt;
    return brute_force_locked(normalized(query), it->second);
}

namespace {

void put_f32le(std::string& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    out.push_back(static_cast<char>(bits & 0xff));
    out.push_back(static_cast<char>((bits >> 8) & 0xff));
    out.push_back(static_cast<char>((bits >> 16) & 0xff));
    out.push_back(static_cast<char>((bits >> 24) & 0xff));
}

float get_f32le(const char* p) {
    std::uint32_t bits = (static_cast<std::uint32_t>(static_cast<unsigned char>(p[0]))) |
                         (static_cast<std::uint32_t>(static_cast<unsigned char>(p[1])) << 8) |
                         (static_cast<std::uint32_t>(static_cast<unsigned char>(p[2])) << 16) |
                         (static_cast<std::uint32_t>(static_cast<unsigned char>(p[3])) << 24);
    float v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
}

} // namespace

void Library::save(const std::string& dir) const {
    std::shared_lock lock(mu_);
    namespace fs = std::filesystem;
    fs::create_directories(dir);

    std::ofstream docs(fs::path(dir) / "docs.jsonl", std::ios::trunc);
    std::string vec_bytes;
    vec_bytes.reserve(docs_.size() * dimension_ * 4);
    for (const auto& d : docs_) {
        docs << d.to_json().dump() << "\n";
        for (float v : d.embedding) put_f32le(vec_bytes, v);
    }
    docs.close();

    std::ofstream vectors(fs::path(dir) / "vectors.bin", std::ios::trunc | std::ios::binary);
    vectors.write(vec_bytes.data(), static_cast<std::streamsize>(vec_bytes.size()));
    vectors.close();

    json manifest = {{"version", 1},
                     {"dimension", dimension_},
                     {"count", docs_.size()},
                     {"vector_format", "float32-le"},
                     {"graph",
                      {{"max_links", params_.max_links},
                       {"ef_construction", params_.ef_construction},
                       {"ef_search", params_.ef_search}}}};
    std::ofstream mf(fs::path(dir) / "manifest.json", std::ios::trunc);
    mf << manifest.dump(2) << "\n";
}

Library Library::load(const std::string& dir) {
    namespace fs = std::filesystem;
    std::ifstream mf(fs::path(dir) / "manifest.json");
    if (!mf) raise(Errc::parse_error, fmt::format("no manifest.json in {}", dir));
    json manifest = json::parse(mf, nullptr, false);
    if (manifest.is_discarded()) raise(Errc::parse_error, "manifest.json is not valid JSON");

    HnswParams params;
    if (manifest.contains("graph")) {
        const auto& g = manifest["graph"];
        params.max_links = g.value("max_links", params.max_links);
        params.ef_construction = g.value("ef_construction", params.ef_construction);
        params.ef_search = g.value("ef_search", params.ef_search);
    }
    Library lib(manifest.at("dimension").get<std::size_t>(), params);
    std::size_t count = manifest.at("count").get<std::size_t>();

    std::ifstream vectors(fs::path(dir) / "vectors.bin", std::ios::binary);
    if (!vectors) raise(Errc::parse_error, fmt::format("no vectors.bin in {}", dir));
    std::string vec_bytes((std::istreambuf_iterator<char>(vectors)),
                          std::istreambuf_iterator<char>());
    if (vec_bytes.size() != count * lib.dimension_ * 4) {
        raise(Errc::parse_error,
              fmt::format("vectors.bin holds {} bytes, manifest implies {}", vec_bytes.size(),
                          count * lib.dimension_ * 4));
    }

    std::ifstream docs(fs::path(dir) / "docs.jsonl");
    if (!docs) raise(Errc::parse_error, fmt::format("no docs.jsonl in {}", dir));
    std::string line;
    std::size_t i = 0;
    while (std::getline(docs, line)) {
        if (line.empty()) continue;
        if (i >= count) raise(Errc::parse_error, "docs.jsonl holds more lines than the manifest");
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            raise(Errc::parse_error, fmt::format("docs.jsonl line {} is not valid JSON", i + 1));
        }
        ExperienceDocument d = ExperienceDocument::from_json(j);
        d.embedding.resize(lib.dimension_);
        const char* base = vec_bytes.data() + i * lib.dimension_ * 4;
        for (std::size_t k = 0; k < lib.dimension_; ++k) {
            d.embedding[k] = get_f32le(base + k * 4);
        }
        lib.upsert(d);
        ++i;
    }
    if (i != count) {
        raise(Errc::parse_error,
              fmt::format("docs.jsonl holds {} documents, manifest says {}", i, count));
    }
    return lib;
}

tools::ExperienceSearchFn make_search_tool(std::shared_ptr<Library> library,
                                           std::shared_ptr<const Embedder> embedder) {
    return [library, embedder](const tools::ExperienceQuery& query) {
        scenario::ConflictType formation =
            scenario::conflict_type_from(query.conflict_formation);
        auto hit = library->search(embedder->embed(query.conflict_description),
                                   query.num_aircraft, formation);
        tools::ToolResult r;
        if (!hit) {
            r.text = fmt::format("No stored experience matches {} aircraft in {} formation.",
                                 query.num_aircraft, scenario::conflict_type_name(formation));
            r.payload = {{"matched", false}};
            return r;
        }
        std::string text = fmt::format("Most relevant experience (similarity {:.2f}):\n{}\n",
                                       hit->similarity, hit->document.conflict_description);
        if (hit->document.commands.empty()) {
            text += "No commands were recorded for this experience.";
        } else {
            text += "Commands:";
            for (const auto& c : hit->document.commands) {
                text += fmt::format("\n- [{}] {}\n  Insight: {}",
                                    c.helpful ? "helpful" : "not helpful", c.command, c.insight);
            }
        }
        r.text = std::move(text);
        r.payload = {{"matched", true},
                     {"id", hit->document.id},
                     {"similarity", hit->similarity},
                     {"document", hit->document.to_json()}};
        return r;
    };
}

} // namespace atc::experience
