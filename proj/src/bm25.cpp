#include "slicetype/bm25.hpp"

#include <cmath>
#include <set>

namespace slicetype {

void Bm25Index::add_document(std::string id, const std::vector<std::string> &tokens) {
    Doc doc;
    doc.id = std::move(id);
    doc.length = static_cast<int>(tokens.size());
    for (const auto &t : tokens) {
        ++doc.tf[t];
    }
    docs_.push_back(std::move(doc));
}

void Bm25Index::finalize() {
    df_.clear();
    double total = 0.0;
    for (const auto &doc : docs_) {
        total += doc.length;
        for (const auto &[token, tf] : doc.tf) {
            (void)tf;
            ++df_[token];
        }
    }
    avg_len_ = docs_.empty() ? 0.0 : total / static_cast<double>(docs_.size());
}

std::vector<std::pair<std::string, double>>
Bm25Index::score_all(const std::vector<std::string> &query) const {
    std::vector<std::pair<std::string, double>> out;
    const double n = static_cast<double>(docs_.size());
    for (const auto &doc : docs_) {
        double s = 0.0;
        for (const auto &q : query) {
            auto tf_it = doc.tf.find(q);
            if (tf_it == doc.tf.end()) {
                continue;
            }
            auto df_it = df_.find(q);
            double df = df_it == df_.end() ? 0.0 : static_cast<double>(df_it->second);
            double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
            double tf = static_cast<double>(tf_it->second);
            double norm = k1_ * (1.0 - b_ + b_ * static_cast<double>(doc.length) /
                                                  (avg_len_ > 0.0 ? avg_len_ : 1.0));
            s += idf * (tf * (k1_ + 1.0)) / (tf + norm);
        }
        out.emplace_back(doc.id, s);
    }
    return out;
}

std::string Bm25Index::best(const std::vector<std::string> &query) const {
    std::string best_id;
    double best_score = 0.0;
    for (const auto &[id, s] : score_all(query)) {
        if (s > best_score || (s == best_score && s > 0.0 && id < best_id)) {
            best_id = id;
            best_score = s;
        }
    }
    return best_score > 0.0 ? best_id : std::string{};
}

} // namespace slicetype
