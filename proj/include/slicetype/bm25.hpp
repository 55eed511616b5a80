#pragma once

#include <map>
#include <string>
#include <vector>

namespace slicetype {

/// Okapi BM25 over small token corpora. Documents are token lists (here:
/// character bigrams of type names); the index is immutable after build.
class Bm25Index {
  public:
    static constexpr double kDefaultK1 = 1.2;
    static constexpr double kDefaultB = 0.75;

    Bm25Index(double k1 = kDefaultK1, double b = kDefaultB) : k1_(k1), b_(b) {}

    void add_document(std::string id, const std::vector<std::string> &tokens);
    void finalize();

    /// Scores of every document against the query tokens, in insertion
    /// order. Empty index yields an empty list.
    std::vector<std::pair<std::string, double>> score_all(const std::vector<std::string> &query) const;

    /// Best-scoring document id, ties broken by ascending id; empty when the
    /// top score is zero or the index is empty.
    std::string best(const std::vector<std::string> &query) const;

  private:
    struct Doc {
        std::string id;
        std::map<std::string, int> tf;
        int length = 0;
    };
    double k1_;
    double b_;
    std::vector<Doc> docs_;
    std::map<std::string, int> df_;
    double avg_len_ = 0.0;
};

} // namespace slicetype
