#include "etpick/checkpoint.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace etpick {

using nlohmann::json;

static json netconfig_to_json(const NetConfig& c) {
    return {{"in_channels", c.in_channels},
            {"num_classes", c.num_classes},
            {"stem_channels", c.stem_channels},
            {"encoder_channels", c.encoder_channels},
            {"decoder_channels", c.decoder_channels},
            {"output_stride", c.output_stride},
            {"norm_groups", c.norm_groups}};
}

static NetConfig netconfig_from_json(const json& j) {
    NetConfig c;
    c.in_channels = j.at("in_channels").get<int>();
    c.num_classes = j.at("num_classes").get<int>();
    c.stem_channels = j.at("stem_channels").get<int>();
    c.encoder_channels = j.at("encoder_channels").get<std::vector<int>>();
    c.decoder_channels = j.at("decoder_channels").get<std::vector<int>>();
    c.output_stride = j.at("output_stride").get<int>();
    c.norm_groups = j.at("norm_groups").get<int>();
    c.validate();
    return c;
}

json netconfig_json(const NetConfig& c) { return netconfig_to_json(c); }
NetConfig netconfig_parse(const json& j) { return netconfig_from_json(j); }

namespace {

struct PayloadWriter {
    std::ofstream f;
    std::int64_t offset = 0;
    json entries = json::array();

    explicit PayloadWriter(const std::string& path) : f(path, std::ios::binary) {
        if (!f) throw std::runtime_error("cannot open for write: " + path);
    }

    void add(const std::string& section, const std::string& name, const TensorF& t) {
        entries.push_back({{"section", section},
                           {"name", name},
                           {"shape", t.shape},
                           {"offset", offset},
                           {"count", t.numel()}});
        f.write(reinterpret_cast<const char*>(t.data.data()),
                static_cast<std::streamsize>(t.data.size() * sizeof(float)));
        offset += t.numel() * static_cast<std::int64_t>(sizeof(float));
    }
};

TensorF read_tensor(std::ifstream& f, const json& e) {
    TensorF t(e.at("shape").get<std::vector<int>>());
    if (t.numel() != e.at("count").get<std::int64_t>())
        throw std::runtime_error("checkpoint: tensor count/shape mismatch");
    f.seekg(e.at("offset").get<std::int64_t>());
    f.read(reinterpret_cast<char*>(t.data.data()),
           static_cast<std::streamsize>(t.data.size() * sizeof(float)));
    if (!f) throw std::runtime_error("checkpoint: short payload read");
    return t;
}

}  // namespace

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
    PayloadWriter pw(path + ".bin");
    for (int i = 0; i < ck.student.size(); ++i)
        pw.add("student", ck.student.names[static_cast<std::size_t>(i)],
               ck.student.tensors[static_cast<std::size_t>(i)]);
    for (int i = 0; i < ck.teacher.size(); ++i)
        pw.add("teacher", ck.teacher.names[static_cast<std::size_t>(i)],
               ck.teacher.tensors[static_cast<std::size_t>(i)]);
    if (ck.optimizer) {
        for (int i = 0; i < ck.student.size(); ++i)
            pw.add("opt.m", ck.student.names[static_cast<std::size_t>(i)],
                   ck.optimizer->m[static_cast<std::size_t>(i)]);
        for (int i = 0; i < ck.student.size(); ++i)
            pw.add("opt.v", ck.student.names[static_cast<std::size_t>(i)],
                   ck.optimizer->v[static_cast<std::size_t>(i)]);
    }

    json manifest = {
        {"format", "etpick-checkpoint-v1"},
        {"stage", ck.stage},
        {"step", ck.step},
        {"dtype", "f32le"},
        {"output_stride", ck.net.output_stride},
        {"catalog_hash", ck.catalog_hash},
        {"config_hash", ck.config_hash},
        {"net", netconfig_to_json(ck.net)},
        {"payload", "bin"},
        {"tensors", pw.entries},
    };
    if (ck.optimizer) {
        manifest["optimizer"] = {{"step", ck.optimizer->step},
                                 {"lr", ck.optimizer->cfg.lr},
                                 {"beta1", ck.optimizer->cfg.beta1},
                                 {"beta2", ck.optimizer->cfg.beta2},
                                 {"eps", ck.optimizer->cfg.eps}};
    }
    std::ofstream mf(path + ".json");
    if (!mf) throw std::runtime_error("cannot open for write: " + path + ".json");
    mf << manifest.dump(2) << "\n";
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream mf(path + ".json");
    if (!mf) throw std::runtime_error("cannot open checkpoint manifest: " + path + ".json");
    json manifest;
    try {
        mf >> manifest;
    } catch (const json::exception& e) {
        throw std::runtime_error("malformed checkpoint manifest: " + std::string(e.what()));
    }
    if (manifest.value("format", "") != "etpick-checkpoint-v1")
        throw std::runtime_error("unsupported checkpoint format in " + path);
    if (manifest.value("dtype", "") != "f32le")
        throw std::runtime_error("unsupported checkpoint dtype in " + path);

    Checkpoint ck;
    ck.stage = manifest.at("stage").get<std::string>();
    ck.step = manifest.at("step").get<std::int64_t>();
    ck.catalog_hash = manifest.at("catalog_hash").get<std::uint64_t>();
    ck.config_hash = manifest.value("config_hash", 0ull);
    ck.net = netconfig_from_json(manifest.at("net"));

    std::ifstream pf(path + ".bin", std::ios::binary);
    if (!pf) throw std::runtime_error("cannot open checkpoint payload: " + path + ".bin");

    bool has_opt = manifest.contains("optimizer");
    std::vector<TensorF> opt_m, opt_v;
    for (const auto& e : manifest.at("tensors")) {
        const std::string section = e.at("section").get<std::string>();
        const std::string name = e.at("name").get<std::string>();
        TensorF t = read_tensor(pf, e);
        if (section == "student")
            ck.student.add(name, std::move(t));
        else if (section == "teacher")
            ck.teacher.add(name, std::move(t));
        else if (section == "opt.m")
            opt_m.push_back(std::move(t));
        else if (section == "opt.v")
            opt_v.push_back(std::move(t));
        else
            throw std::runtime_error("unknown checkpoint section: " + section);
    }
    if (has_opt) {
        OptimizerStateF st;
        const auto& jo = manifest.at("optimizer");
        st.step = jo.at("step").get<std::int64_t>();
        st.cfg.lr = jo.at("lr").get<double>();
        st.cfg.beta1 = jo.at("beta1").get<double>();
        st.cfg.beta2 = jo.at("beta2").get<double>();
        st.cfg.eps = jo.at("eps").get<double>();
        st.m = std::move(opt_m);
        st.v = std::move(opt_v);
        ck.optimizer = std::move(st);
    }
    ck.student.step = ck.step;
    ck.teacher.step = ck.step;
    return ck;
}

}  // namespace etpick
