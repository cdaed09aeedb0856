#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "facesculpt/tensor.hpp"

namespace facesculpt {

// Named parameter registry with per-parameter gradient and optimizer state.
// Iteration order is the lexicographic name order of std::map, which keeps
// checkpoints and update sweeps deterministic.
class ParamStore {
public:
    struct Slot {
        ad::Tensor value;
        ad::Tensor grad;
        bool grad_valid = false;
        ad::Tensor m;        // Adam first moment / RMSprop mean square
        ad::Tensor v;        // Adam second moment
        std::int64_t step = 0;
    };

    void add(const std::string& name, ad::Tensor init);
    bool has(const std::string& name) const { return slots_.count(name) != 0; }
    ad::Tensor& value(const std::string& name);
    const ad::Tensor& value(const std::string& name) const;
    Slot& slot(const std::string& name);
    std::vector<std::string> names() const;

    // Clears gradients and marks them stale; optimizer steps refuse to run on
    // stale gradients so a missing backward() surfaces as an error.
    void zero_grads();
    void accumulate_grad(const std::string& name, const ad::Tensor& g);

    std::int64_t global_step() const { return global_step_; }
    void set_global_step(std::int64_t s) { global_step_ = s; }

    void save_checkpoint(const std::string& json_path, const std::string& meta_json) const;
    // Restores values and optimizer state; shapes must match the live store.
    void load_checkpoint(const std::string& json_path);
    static std::string checkpoint_meta(const std::string& json_path);

private:
    std::map<std::string, Slot> slots_;
    std::int64_t global_step_ = 0;
};

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct RmsPropConfig {
    double lr = 1e-3;
    double decay = 0.99;
    double eps = 1e-8;
};

// Updates the named parameters in place (all parameters when `names` is
// empty). Throws if any target parameter has a stale gradient.
void adam_step(ParamStore& store, const AdamConfig& cfg,
               const std::vector<std::string>& names = {});
void rmsprop_step(ParamStore& store, const RmsPropConfig& cfg,
                  const std::vector<std::string>& names = {});

}  // namespace facesculpt
