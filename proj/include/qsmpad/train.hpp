#pragma once

#include <cstdint>
#include <vector>

#include "qsmpad/dataset.hpp"
#include "qsmpad/unet.hpp"

namespace qsmpad {

enum class Task { BackgroundRemoval, Inversion, SingleStep };

const char* task_name(Task t);
Task task_from_name(const std::string& name);

// Which volumes feed and supervise the network for each task:
// background_removal total->local, inversion local->chi, single_step total->chi.
struct TaskSpec {
    Task task = Task::BackgroundRemoval;
    const Volume3D& input_of(const QsmSample& s) const;
    const Volume3D& target_of(const QsmSample& s) const;
};

struct TrainConfig {
    Task task = Task::BackgroundRemoval;
    std::array<int, 3> patch_size{32, 32, 32};
    int batch_size = 2;
    int epochs = 6;
    int patches_per_epoch = 64;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::uint64_t seed = 0;
    int crop_loss_margin = 0;

    void validate() const;
};

struct TrainHistory {
    std::vector<double> epoch_mean_loss;
};

// First-order adaptive-moment optimizer over the model's parameter list.
class Adam {
public:
    Adam(UNet& model, double lr, double beta1, double beta2, double eps);
    void step(); // consumes current gradients, then zeroes them

private:
    UNet* model_;
    double lr_, b1_, b2_, eps_;
    long t_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

// Patch-based L2 training. Inputs are masked to the ROI before entering the
// network (outside-ROI voxels carry no measurement); the loss is always
// masked and optionally cropped. Deterministic given cfg.seed.
TrainHistory train(UNet& model, const std::vector<QsmSample>& dataset, const TrainConfig& cfg);

} // namespace qsmpad
