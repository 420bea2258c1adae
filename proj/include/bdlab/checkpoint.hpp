#pragma once

#include <fstream>
#include <string>

#include <json.hpp>

#include "bdlab/config.hpp"
#include "bdlab/errors.hpp"
#include "bdlab/model.hpp"

namespace bdlab {

inline constexpr const char* kCheckpointMagic = "bdlab-ckpt-v1";

// Checkpoint document: config block, flat parameter array, trainable
// segmentation map, and the reference snapshot. JSON doubles round-trip
// exactly (shortest-representation encoding), so load(save(x)) == x bitwise.
inline json checkpoint_to_json(const ModelState& st) {
    json seg = json::array();
    for (const Segment& s : st.layout.trainable_map->segments())
        seg.push_back(json{{"name", s.name}, {"begin", s.begin}, {"end", s.end}});
    return json{{"magic", kCheckpointMagic},
                {"config", st.config},
                {"segmentation", seg},
                {"params", st.params},
                {"reference", st.reference}};
}

inline void save_checkpoint(const ModelState& st, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << checkpoint_to_json(st).dump() << "\n";
    if (!out) throw IoError("failed while writing " + path);
}

inline ModelState checkpoint_from_json(const json& j) {
    if (j.value("magic", "") != kCheckpointMagic)
        throw IoError(std::string("not a ") + kCheckpointMagic + " checkpoint");
    ModelConfig cfg = j.at("config").get<ModelConfig>();
    cfg.validate();
    ModelState st;
    st.config = cfg;
    st.layout = ParamLayout::build(cfg);
    j.at("params").get_to(st.params);
    j.at("reference").get_to(st.reference);
    if (st.params.size() != st.layout.total || st.reference.size() != st.layout.total)
        throw IoError("checkpoint parameter array does not match its config");
    // The stored segmentation is re-derived from the config; verify it agrees.
    const auto& segs = st.layout.trainable_map->segments();
    const json& stored = j.at("segmentation");
    if (stored.size() != segs.size()) throw IoError("checkpoint segmentation mismatch");
    for (std::size_t i = 0; i < segs.size(); ++i) {
        if (stored[i].at("name").get<std::string>() != segs[i].name ||
            stored[i].at("begin").get<std::size_t>() != segs[i].begin ||
            stored[i].at("end").get<std::size_t>() != segs[i].end)
            throw IoError("checkpoint segmentation mismatch at " + segs[i].name);
    }
    return st;
}

inline ModelState load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw IoError(path + " is not a valid checkpoint: " + e.what());
    }
    return checkpoint_from_json(j);
}

}  // namespace bdlab
