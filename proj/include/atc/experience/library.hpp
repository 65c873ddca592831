#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "atc/experience/document.hpp"
#include "atc/experience/embed.hpp"
#include "atc/tools/toolkit.hpp"

namespace atc::experience {

struct SearchHit {
    ExperienceDocument document;
    double similarity = 0.0;
};

struct HnswParams {
    int max_links = 16;      // M; layer 0 keeps 2M
    int ef_construction = 200;
    int ef_search = 64;
};

// Metadata-filtered vector store. Documents are grouped into one bucket per
// (num_aircraft, formation) pair, and each bucket carries its own small-world
// graph, so a search never touches a document outside the exact filter.
// Node levels derive from a hash of the document id: identical content gives
// identical graphs, no RNG involved.
class Library {
public:
    explicit Library(std::size_t dimension = 3072, HnswParams params = {});

    Library(Library&& other) noexcept;
    Library& operator=(Library&& other) noexcept;

    std::size_t dimension() const { return dimension_; }
    HnswParams params() const { return params_; }
    std::size_t size() const;
    std::vector<std::string> ids() const; // sorted

    // Routing search() through the exact scan instead of the graph; the
    // oracle-dominance property tests compare the two paths.
    void set_use_graph(bool use);

    // Insert or replace by id. Replacement rebuilds the affected buckets so
    // stale graph edges cannot survive. Throws DimensionMismatch.
    void upsert(const ExperienceDocument& doc);

    std::optional<ExperienceDocument> get(const std::string& id) const;

    // Top match by cosine similarity within the exact metadata bucket;
    // nullopt when the bucket is empty. Ties break toward the lowest id.
    std::optional<SearchHit> search(const std::vector<float>& query, int num_aircraft,
                                    scenario::ConflictType formation) const;
    std::optional<SearchHit> brute_force_search(const std::vector<float>& query, int num_aircraft,
                                                scenario::ConflictType formation) const;

    // docs.jsonl + vectors.bin (float32 little-endian) + manifest.json.
    void save(const std::string& dir) const;
    static Library load(const std::string& dir);

private:
    struct Node {
        std::size_t doc = 0; // global index into docs_
        int level = 0;
        std::vector<std::vector<std::uint32_t>> links; // per layer
    };
    struct Bucket {
        std::vector<Node> nodes;
        int max_level = -1;
        std::uint32_t entry = 0;
    };
    using BucketKey = std::pair<int, int>; // (num_aircraft, formation)

    static BucketKey key_of(const ExperienceDocument& doc);
    double dist(const std::vector<float>& q, std::size_t doc) const;
    std::uint32_t greedy_closest(const Bucket& b, const std::vector<float>& q, std::uint32_t ep,
                                 int layer) const;
    std::vector<std::pair<double, std::uint32_t>> search_layer(const Bucket& b,
                                                               const std::vector<float>& q,
                                                               std::uint32_t ep, std::size_t ef,
                                                               int layer) const;
    void bucket_insert(Bucket& b, std::uint32_t n);
    void rebuild_bucket(Bucket& b);
    int assign_level(const std::string& id) const;
    std::vector<float> normalized(const std::vector<float>& v) const;
    std::optional<SearchHit> brute_force_locked(const std::vector<float>& unit_query,
                                                const Bucket& b) const;
    std::optional<SearchHit> graph_locked(const std::vector<float>& unit_query,
                                          const Bucket& b) const;

    std::size_t dimension_;
    HnswParams params_;
    bool use_graph_ = true;
    std::vector<ExperienceDocument> docs_;
    std::vector<std::vector<float>> unit_; // normalized embeddings, aligned with docs_
    std::unordered_map<std::string, std::size_t> by_id_;
    std::map<BucketKey, Bucket> buckets_;
    mutable std::shared_mutex mu_;
};

// Bridges the library into the SEARCHEXPERIENCELIBRARY tool: embeds the
// query description, searches, and renders the hit (or a no-match notice).
tools::ExperienceSearchFn make_search_tool(std::shared_ptr<Library> library,
                                           std::shared_ptr<const Embedder> embedder);

} // namespace atc::experience
