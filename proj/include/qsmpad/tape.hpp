#pragma once

#include <memory>
#include <vector>

#include "qsmpad/conv_ops.hpp"
#include "qsmpad/tensor.hpp"

namespace qsmpad {

// Records one forward pass as a linear sequence of operations and replays it
// reversed for exact gradients. Gradients accumulate additively; parameter
// gradients land in each ConvLayer's grad buffers, input gradients are read
// back via grad(id). One tape is one logical thread of execution;
// independent tapes may run concurrently.
class Tape {
public:
    struct Node;
    struct Op {
        virtual ~Op() = default;
        virtual void backward(Tape& tape, Node& self) = 0;
    };
    struct Node {
        std::unique_ptr<Op> op; // null for leaves
        std::vector<int> inputs;
        FeatureTensor value;
        FeatureTensor grad; // allocated lazily during backward
        bool grad_live = false;
    };

    int input(FeatureTensor x);
    int conv3d(int x, ConvLayer& layer, const Mask3D* mask = nullptr);
    int maxpool3d(int x);
    int upsample3d(int x);
    int leaky_relu(int x, double slope);
    int concat(int a, int b);
    int add(int a, int b);

    // Masked mean squared error over voxels valid in `mask` and at least
    // crop_margin voxels from the patch edge. Returns a scalar node.
    int l2_loss(int pred, const FeatureTensor& target, const Mask3D& mask, int crop_margin);

    // Seeds d(node)=seed and sweeps the recorded order in reverse.
    void backward(int node, double seed = 1.0);

    const FeatureTensor& value(int id) const { return at(id).value; }
    const FeatureTensor& grad(int id) const;
    double scalar(int id) const;
    std::size_t node_count() const { return nodes_.size(); }

    FeatureTensor& grad_buffer(int id); // allocates if needed (internal use)

private:
    std::vector<Node> nodes_;
    const Node& at(int id) const;
    Node& at(int id);
    int push(std::unique_ptr<Op> op, std::vector<int> inputs, FeatureTensor value);
};

} // namespace qsmpad
