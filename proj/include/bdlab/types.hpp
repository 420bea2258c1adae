#pragma once

#include <string>
#include <vector>

#include "bdlab/errors.hpp"

namespace bdlab {

enum class Modality { text, code };
enum class Task { understanding, generation };

inline const char* to_string(Modality m) { return m == Modality::text ? "text" : "code"; }
inline const char* to_string(Task t) { return t == Task::understanding ? "understanding" : "generation"; }

inline Modality modality_from_string(const std::string& s) {
    if (s == "text") return Modality::text;
    if (s == "code") return Modality::code;
    throw DomainError("unknown modality: " + s);
}

inline Task task_from_string(const std::string& s) {
    if (s == "understanding") return Task::understanding;
    if (s == "generation") return Task::generation;
    throw DomainError("unknown task: " + s);
}

// The modality each task's responses are emitted in: understanding answers in
// text, generation answers in discrete codes.
inline Modality response_modality(Task t) {
    return t == Task::understanding ? Modality::text : Modality::code;
}

// A modality-tagged list of discrete token ids. A begin-of-sequence sentinel
// is implied at position 0 and is not part of `tokens`.
struct TokenSequence {
    Modality modality = Modality::text;
    std::vector<int> tokens;

    std::size_t size() const { return tokens.size(); }
};

// Context plus chosen/rejected responses for one task. construction_margin is
// the generator-side score gap, distinct from the model's implicit margin.
struct PreferencePair {
    Task task = Task::understanding;
    TokenSequence context;   // always text
    TokenSequence chosen;
    TokenSequence rejected;
    double construction_margin = 0.0;
};

inline void validate_pair_tags(const PreferencePair& p) {
    const Modality want = response_modality(p.task);
    if (p.context.modality != Modality::text)
        throw DomainError("preference pair context must be text");
    if (p.chosen.modality != want || p.rejected.modality != want)
        throw DomainError(std::string("responses of a ") + to_string(p.task) +
                          " pair must have modality " + to_string(want));
    if (p.task == Task::generation && p.chosen.size() != p.rejected.size())
        throw DomainError("generation responses must share length N");
}

}  // namespace bdlab
