#pragma once

#include "slicetype/backend.hpp"
#include "slicetype/evaluator.hpp"
#include "slicetype/ranker.hpp"
#include "slicetype/slicer.hpp"

#include <optional>
#include <string>
#include <vector>

namespace slicetype {

/// The prompt handed to the generation backend: masked slice text plus up to
/// five candidate-type blocks. Holds exactly one <mask>.
struct Prompt {
    std::string masked_slices;
    std::vector<RankedCandidate> candidates;
    std::string instructions;

    std::string text() const;
    /// Whitespace-token count of the rendered prompt.
    int token_estimate() const;
};

struct TypePrediction {
    std::vector<std::pair<std::string, int>> ranked; // (type, votes), votes non-increasing
    std::vector<std::string> raw_samples;
    int prompt_tokens = 0;
};

Prompt build_prompt(const std::vector<Slice> &slices, const std::vector<RankedCandidate> &candidates,
                    const MaskTarget &target);

/// Clean one completion: first non-empty line without fences/quotes, then
/// the longest token span that parses in the type grammar.
std::string canonicalize_sample(const std::string &completion);

/// Draw config.n_samples completions. Transport failures retry up to
/// config.max_retries, then the sample is dropped with a diagnostic; empty
/// completions are dropped too.
std::vector<std::string> sample(GenerationBackend &backend, const std::string &prompt,
                                const SamplingConfig &config, Diagnostics &diags);

/// Frequency voting: whitespace-canonicalized grouping, counts descending,
/// ties by earliest first occurrence.
TypePrediction vote(const std::vector<std::string> &samples);

/// Map a structural literal ("{name: str, age: int}") onto the best-scoring
/// knowledge-base record, when its score clears the threshold.
std::optional<std::string> normalize_structural(const std::string &raw, const KnowledgeBase &kb);

/// Repair a bare identifier that is not in the knowledge base by BM25 over
/// lowercase character bigrams of record names. Elementary type names pass
/// through untouched; so does the input when the top score is zero.
std::string normalize_name(const std::string &raw, const KnowledgeBase &kb);

struct InferOptions {
    SliceOptions slice;
    SamplingConfig sampling;
    bool no_candidates = false;
};

struct InferTarget {
    VariableRef ref;
    NodeId anchor;
    MaskSlot slot = MaskSlot::Variable;
};

/// Stage 1 (slice -> rank -> prompt -> sample -> vote) followed by stage 2
/// (structural and name normalization of the voted outputs, re-voted with
/// merged counts).
TypePrediction infer(const Project &project, const DependenceGraph &sdg, const KnowledgeBase &kb,
                     GenerationBackend &backend, const InferTarget &target,
                     const InferOptions &options, Diagnostics &diags);

/// The prompt infer() would send, exposed for mock preparation and debugging.
Prompt build_prompt_for_target(const Project &project, const DependenceGraph &sdg,
                               const KnowledgeBase &kb, const InferTarget &target,
                               const InferOptions &options);

} // namespace slicetype
