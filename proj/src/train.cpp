#include "qsmpad/train.hpp"

#include <cmath>
#include <string>

#include "qsmpad/patches.hpp"
#include "qsmpad/rng.hpp"

namespace qsmpad {

const char* task_name(Task t) {
    switch (t) {
        case Task::BackgroundRemoval: return "background_removal";
        case Task::Inversion: return "inversion";
        case Task::SingleStep: return "single_step";
    }
    return "?";
}

Task task_from_name(const std::string& name) {
    if (name == "background_removal") return Task::BackgroundRemoval;
    if (name == "inversion") return Task::Inversion;
    if (name == "single_step") return Task::SingleStep;
    throw ValidationError("unknown task: " + name);
}

const Volume3D& TaskSpec::input_of(const QsmSample& s) const {
    return task == Task::Inversion ? s.local_field : s.total_field;
}

const Volume3D& TaskSpec::target_of(const QsmSample& s) const {
    return task == Task::BackgroundRemoval ? s.local_field : s.chi;
}

void TrainConfig::validate() const {
    for (int a = 0; a < 3; ++a)
        if (patch_size[a] < 2) throw ValidationError("TrainConfig: patch_size must be >= 2");
    if (batch_size < 1) throw ValidationError("TrainConfig: batch_size must be >= 1");
    if (epochs < 1) throw ValidationError("TrainConfig: epochs must be >= 1");
    if (patches_per_epoch < 1) throw ValidationError("TrainConfig: patches_per_epoch must be >= 1");
    if (!(learning_rate > 0.0)) throw ValidationError("TrainConfig: learning_rate must be > 0");
    if (crop_loss_margin < 0 ||
        crop_loss_margin >= (std::min({patch_size[0], patch_size[1], patch_size[2]}) + 1) / 2)
        throw ValidationError("TrainConfig: crop margin must be < patch_size/2");
}

Adam::Adam(UNet& model, double lr, double beta1, double beta2, double eps)
    : model_(&model), lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {
    model_->for_each_param([&](double*, double*, std::size_t n) {
        m_.emplace_back(n, 0.0);
        v_.emplace_back(n, 0.0);
    });
}

void Adam::step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(b1_, t_);
    const double bc2 = 1.0 - std::pow(b2_, t_);
    std::size_t k = 0;
    model_->for_each_param([&](double* p, double* g, std::size_t n) {
        auto& m = m_[k];
        auto& v = v_[k];
        for (std::size_t i = 0; i < n; ++i) {
            m[i] = b1_ * m[i] + (1.0 - b1_) * g[i];
            v[i] = b2_ * v[i] + (1.0 - b2_) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            p[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
        ++k;
    });
    model_->zero_grad();
    model_->clamp_mask_kernels();
}

namespace {

// One training example: ROI-masked input patch, target patch, patch mask.
struct PatchExample {
    FeatureTensor input;
    FeatureTensor target;
    Mask3D mask;
};

PatchExample assemble_patch(const QsmSample& sample, const TaskSpec& spec,
                            const std::array<int, 3>& origin, const std::array<int, 3>& size) {
    PatchExample ex;
    ex.mask = crop_mask(sample.brain_mask, origin, size);
    Volume3D in = crop_volume(spec.input_of(sample), origin, size);
    Volume3D tg = crop_volume(spec.target_of(sample), origin, size);
    for (std::size_t i = 0; i < in.data.size(); ++i)
        if (!ex.mask.data[i]) in.data[i] = 0.0;
    ex.input = tensor_from_volume(in);
    ex.target = tensor_from_volume(tg);
    return ex;
}

} // namespace

TrainHistory train(UNet& model, const std::vector<QsmSample>& dataset, const TrainConfig& cfg) {
    cfg.validate();
    if (dataset.empty()) throw ValidationError("train: dataset is empty");
    model.check_patch_dims(cfg.patch_size);

    const TaskSpec spec{cfg.task};
    Rng rng(cfg.seed);

    // Per-sample origin samplers are reusable across the whole run.
    std::vector<PatchSampler> samplers;
    samplers.reserve(dataset.size());
    for (const auto& s : dataset) samplers.emplace_back(s.brain_mask, cfg.patch_size);

    Adam opt(model, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps);
    model.zero_grad();

    TrainHistory history;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        double epoch_loss = 0.0;
        int drawn = 0;
        while (drawn < cfg.patches_per_epoch) {
            const int batch = std::min(cfg.batch_size, cfg.patches_per_epoch - drawn);
            double batch_loss = 0.0;
            for (int b = 0; b < batch; ++b) {
                const std::size_t si = rng.uniform_int(dataset.size());
                const auto origin = samplers[si].sample_origin(rng);
                PatchExample ex = assemble_patch(dataset[si], spec, origin, cfg.patch_size);

                Tape tape;
                const int in_id = tape.input(std::move(ex.input));
                const auto masks = model.mask_pyramid(ex.mask);
                const int out_id = model.forward(tape, in_id, masks);
                const int loss_id = tape.l2_loss(out_id, ex.target, ex.mask, cfg.crop_loss_margin);
                const double loss = tape.scalar(loss_id);
                if (!std::isfinite(loss))
                    throw TrainingError("training diverged (non-finite loss) at epoch " +
                                        std::to_string(epoch) + ", step " + std::to_string(drawn + b));
                batch_loss += loss;
                // Scale so the batch's accumulated gradient is the mean.
                tape.backward(loss_id, 1.0 / batch);
            }
            opt.step();
            epoch_loss += batch_loss;
            drawn += batch;
        }
        history.epoch_mean_loss.push_back(epoch_loss / cfg.patches_per_epoch);
    }
    return history;
}

} // namespace qsmpad
