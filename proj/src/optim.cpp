#include "facesculpt/optim.hpp"

#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "facesculpt/blobio.hpp"

namespace facesculpt {

using json = nlohmann::json;

void ParamStore::add(const std::string& name, ad::Tensor init) {
    if (slots_.count(name))
        throw std::invalid_argument("facesculpt: parameter already registered: " + name);
    Slot s;
    s.grad = ad::Tensor::zeros(init.shape);
    s.m = ad::Tensor::zeros(init.shape);
    s.v = ad::Tensor::zeros(init.shape);
    s.value = std::move(init);
    slots_.emplace(name, std::move(s));
}

ad::Tensor& ParamStore::value(const std::string& name) { return slot(name).value; }

const ad::Tensor& ParamStore::value(const std::string& name) const {
    auto it = slots_.find(name);
    if (it == slots_.end()) throw std::invalid_argument("facesculpt: unknown parameter: " + name);
    return it->second.value;
}

ParamStore::Slot& ParamStore::slot(const std::string& name) {
    auto it = slots_.find(name);
    if (it == slots_.end()) throw std::invalid_argument("facesculpt: unknown parameter: " + name);
    return it->second;
}

std::vector<std::string> ParamStore::names() const {
    std::vector<std::string> out;
    out.reserve(slots_.size());
    for (const auto& [name, slot] : slots_) out.push_back(name);
    return out;
}

void ParamStore::zero_grads() {
    for (auto& [name, s] : slots_) {
        std::fill(s.grad.v.begin(), s.grad.v.end(), 0.0);
        s.grad_valid = false;
    }
}

void ParamStore::accumulate_grad(const std::string& name, const ad::Tensor& g) {
    Slot& s = slot(name);
    if (!s.value.same_shape(g))
        throw std::invalid_argument("facesculpt: gradient shape mismatch for " + name);
    for (std::size_t i = 0; i < g.v.size(); ++i) s.grad.v[i] += g.v[i];
    s.grad_valid = true;
}

namespace {

std::vector<std::string> resolve_names(const ParamStore& store, const std::vector<std::string>& names) {
    return names.empty() ? store.names() : names;
}

}  // namespace

void adam_step(ParamStore& store, const AdamConfig& cfg, const std::vector<std::string>& names) {
    for (const std::string& name : resolve_names(store, names)) {
        ParamStore::Slot& s = store.slot(name);
        if (!s.grad_valid)
            throw std::runtime_error("facesculpt: adam_step on stale gradient for " + name);
        s.step += 1;
        const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(s.step));
        const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(s.step));
        for (std::size_t i = 0; i < s.value.v.size(); ++i) {
            const double g = s.grad.v[i];
            s.m.v[i] = cfg.beta1 * s.m.v[i] + (1.0 - cfg.beta1) * g;
            s.v.v[i] = cfg.beta2 * s.v.v[i] + (1.0 - cfg.beta2) * g * g;
            const double mhat = s.m.v[i] / bc1;
            const double vhat = s.v.v[i] / bc2;
            s.value.v[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
        }
    }
    store.set_global_step(store.global_step() + 1);
}

void rmsprop_step(ParamStore& store, const RmsPropConfig& cfg, const std::vector<std::string>& names) {
    for (const std::string& name : resolve_names(store, names)) {
        ParamStore::Slot& s = store.slot(name);
        if (!s.grad_valid)
            throw std::runtime_error("facesculpt: rmsprop_step on stale gradient for " + name);
        s.step += 1;
        for (std::size_t i = 0; i < s.value.v.size(); ++i) {
            const double g = s.grad.v[i];
            s.m.v[i] = cfg.decay * s.m.v[i] + (1.0 - cfg.decay) * g * g;
            s.value.v[i] -= cfg.lr * g / (std::sqrt(s.m.v[i]) + cfg.eps);
        }
    }
    store.set_global_step(store.global_step() + 1);
}

void ParamStore::save_checkpoint(const std::string& json_path, const std::string& meta_json) const {
    BlobWriter writer;
    json meta = meta_json.empty() ? json::object() : json::parse(meta_json);
    meta["step"] = global_step_;
    json steps = json::object();
    for (const auto& [name, s] : slots_) {
        writer.add(name, s.value.shape, s.value.v);
        writer.add(name + ".opt_m", s.m.shape, s.m.v);
        writer.add(name + ".opt_v", s.v.shape, s.v.v);
        steps[name] = s.step;
    }
    meta["param_steps"] = std::move(steps);
    writer.set_meta(meta.dump());
    std::string bin = json_path;
    const auto dot = bin.rfind('.');
    bin = (dot == std::string::npos ? bin : bin.substr(0, dot)) + ".bin";
    writer.write(json_path, bin);
}

void ParamStore::load_checkpoint(const std::string& json_path) {
    BlobReader reader(json_path);
    json meta = json::parse(reader.meta_text());
    for (auto& [name, s] : slots_) {
        if (!reader.has(name))
            throw std::runtime_error("facesculpt: checkpoint missing parameter " + name);
        if (reader.shape(name) != s.value.shape)
            throw std::runtime_error("facesculpt: checkpoint shape mismatch for " + name);
        s.value.v = reader.array(name);
        if (reader.has(name + ".opt_m")) s.m.v = reader.array(name + ".opt_m");
        if (reader.has(name + ".opt_v")) s.v.v = reader.array(name + ".opt_v");
        s.grad_valid = false;
        std::fill(s.grad.v.begin(), s.grad.v.end(), 0.0);
        if (meta.contains("param_steps") && meta["param_steps"].contains(name))
            s.step = meta["param_steps"][name].get<std::int64_t>();
    }
    if (meta.contains("step")) global_step_ = meta["step"].get<std::int64_t>();
}

std::string ParamStore::checkpoint_meta(const std::string& json_path) {
    BlobReader reader(json_path);
    return reader.meta_text();
}

}  // namespace facesculpt
