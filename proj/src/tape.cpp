#include "qsmpad/tape.hpp"

#include <cmath>
#include <string>

namespace qsmpad {

namespace {

struct ConvOp final : Tape::Op {
    ConvLayer* layer;
    const Mask3D* mask;
    PaddedInput xp; // saved padded input (post-estimate in neighbor mode)

    void backward(Tape& tape, Tape::Node& self) override {
        FeatureTensor gy = self.grad;
        if (layer->mode == PadMode::Neighbor) {
            // Forward zeroed outputs at invalid voxels, so no gradient flows
            // through them into the convolution.
            const std::size_t vox = gy.voxels();
            for (int c = 0; c < gy.channels; ++c) {
                double* g = gy.channel(c);
                for (std::size_t i = 0; i < vox; ++i)
                    if (!mask->data[i]) g[i] = 0.0;
            }
        }
        std::vector<double> grad_xpad;
        conv_backward_core(xp, *layer, gy, grad_xpad);
        FeatureTensor gx;
        pad_backward(xp, tape.value(self.inputs[0]), layer->mode, mask, layer, grad_xpad, gx);
        FeatureTensor& sink = tape.grad_buffer(self.inputs[0]);
        for (std::size_t i = 0; i < sink.data.size(); ++i) sink.data[i] += gx.data[i];
    }
};

struct MaxPoolOp final : Tape::Op {
    std::vector<std::uint32_t> argmax;
    void backward(Tape& tape, Tape::Node& self) override {
        FeatureTensor& gx = tape.grad_buffer(self.inputs[0]);
        maxpool_backward(self.grad, argmax, gx);
    }
};

struct UpsampleOp final : Tape::Op {
    void backward(Tape& tape, Tape::Node& self) override {
        FeatureTensor& gx = tape.grad_buffer(self.inputs[0]);
        upsample_backward(self.grad, gx);
    }
};

struct LeakyReluOp final : Tape::Op {
    double slope;
    void backward(Tape& tape, Tape::Node& self) override {
        const FeatureTensor& x = tape.value(self.inputs[0]);
        FeatureTensor& gx = tape.grad_buffer(self.inputs[0]);
        for (std::size_t i = 0; i < x.data.size(); ++i)
            gx.data[i] += self.grad.data[i] * (x.data[i] >= 0.0 ? 1.0 : slope);
    }
};

struct ConcatOp final : Tape::Op {
    void backward(Tape& tape, Tape::Node& self) override {
        FeatureTensor& ga = tape.grad_buffer(self.inputs[0]);
        FeatureTensor& gb = tape.grad_buffer(self.inputs[1]);
        const std::size_t na = ga.data.size();
        for (std::size_t i = 0; i < na; ++i) ga.data[i] += self.grad.data[i];
        for (std::size_t i = 0; i < gb.data.size(); ++i) gb.data[i] += self.grad.data[na + i];
    }
};

struct AddOp final : Tape::Op {
    void backward(Tape& tape, Tape::Node& self) override {
        for (int k = 0; k < 2; ++k) {
            FeatureTensor& g = tape.grad_buffer(self.inputs[k]);
            for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] += self.grad.data[i];
        }
    }
};

struct L2LossOp final : Tape::Op {
    FeatureTensor target;
    std::vector<std::uint8_t> in_region; // spatial membership
    std::size_t denom = 0;               // channels * |region|

    void backward(Tape& tape, Tape::Node& self) override {
        const double seed = self.grad.data[0];
        const FeatureTensor& pred = tape.value(self.inputs[0]);
        FeatureTensor& gx = tape.grad_buffer(self.inputs[0]);
        const std::size_t vox = pred.voxels();
        const double scale = 2.0 * seed / static_cast<double>(denom);
        for (int c = 0; c < pred.channels; ++c) {
            const double* p = pred.channel(c);
            const double* t = target.channel(c);
            double* g = gx.channel(c);
            for (std::size_t i = 0; i < vox; ++i)
                if (in_region[i]) g[i] += scale * (p[i] - t[i]);
        }
    }
};

} // namespace

const Tape::Node& Tape::at(int id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size())
        throw StateError("tape: node id " + std::to_string(id) + " out of range");
    return nodes_[id];
}

Tape::Node& Tape::at(int id) { return const_cast<Node&>(static_cast<const Tape*>(this)->at(id)); }

int Tape::push(std::unique_ptr<Op> op, std::vector<int> inputs, FeatureTensor value) {
    Node n;
    n.op = std::move(op);
    n.inputs = std::move(inputs);
    n.value = std::move(value);
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

FeatureTensor& Tape::grad_buffer(int id) {
    Node& n = at(id);
    if (!n.grad_live) {
        n.grad = FeatureTensor(n.value.channels, n.value.dims);
        n.grad_live = true;
    }
    return n.grad;
}

const FeatureTensor& Tape::grad(int id) const {
    const Node& n = at(id);
    if (!n.grad_live) throw StateError("tape: gradient requested before backward()");
    return n.grad;
}

double Tape::scalar(int id) const {
    const Node& n = at(id);
    if (n.value.data.size() != 1) throw StateError("tape: node is not a scalar");
    return n.value.data[0];
}

int Tape::input(FeatureTensor x) { return push(nullptr, {}, std::move(x)); }

int Tape::conv3d(int x, ConvLayer& layer, const Mask3D* mask) {
    const FeatureTensor& xin = value(x);
    if (xin.channels != layer.in_channels)
        throw ValidationError("conv3d: input has " + std::to_string(xin.channels) +
                              " channels, layer expects " + std::to_string(layer.in_channels));
    auto op = std::make_unique<ConvOp>();
    op->layer = &layer;
    op->mask = mask;
    op->xp = pad_input(xin, layer.mode, mask,
                       layer.mode == PadMode::Neighbor ? &layer.feat_kernel : nullptr,
                       layer.mode == PadMode::Neighbor ? &layer.mask_kernel : nullptr);
    FeatureTensor y;
    conv_forward_core(op->xp, layer, y);
    if (layer.mode == PadMode::Neighbor) {
        const std::size_t vox = y.voxels();
        for (int c = 0; c < y.channels; ++c) {
            double* chan = y.channel(c);
            for (std::size_t i = 0; i < vox; ++i)
                if (!mask->data[i]) chan[i] = 0.0;
        }
    }
    return push(std::move(op), {x}, std::move(y));
}

int Tape::maxpool3d(int x) {
    auto op = std::make_unique<MaxPoolOp>();
    FeatureTensor y;
    maxpool_forward(value(x), y, op->argmax);
    return push(std::move(op), {x}, std::move(y));
}

int Tape::upsample3d(int x) {
    FeatureTensor y;
    upsample_forward(value(x), y);
    return push(std::make_unique<UpsampleOp>(), {x}, std::move(y));
}

int Tape::leaky_relu(int x, double slope) {
    if (slope < 0.0 || slope >= 1.0)
        throw ValidationError("leaky_relu: slope must be in [0,1)");
    auto op = std::make_unique<LeakyReluOp>();
    op->slope = slope;
    const FeatureTensor& xin = value(x);
    FeatureTensor y(xin.channels, xin.dims);
    for (std::size_t i = 0; i < xin.data.size(); ++i) {
        const double v = xin.data[i];
        y.data[i] = v >= 0.0 ? v : slope * v;
    }
    return push(std::move(op), {x}, std::move(y));
}

int Tape::concat(int a, int b) {
    const FeatureTensor& ta = value(a);
    const FeatureTensor& tb = value(b);
    if (ta.dims != tb.dims) throw ValidationError("concat: spatial dims differ");
    FeatureTensor y(ta.channels + tb.channels, ta.dims);
    std::copy(ta.data.begin(), ta.data.end(), y.data.begin());
    std::copy(tb.data.begin(), tb.data.end(), y.data.begin() + ta.data.size());
    return push(std::make_unique<ConcatOp>(), {a, b}, std::move(y));
}

int Tape::add(int a, int b) {
    const FeatureTensor& ta = value(a);
    const FeatureTensor& tb = value(b);
    if (!ta.same_shape(tb)) throw ValidationError("add: shapes differ");
    FeatureTensor y(ta.channels, ta.dims);
    for (std::size_t i = 0; i < y.data.size(); ++i) y.data[i] = ta.data[i] + tb.data[i];
    return push(std::make_unique<AddOp>(), {a, b}, std::move(y));
}

int Tape::l2_loss(int pred, const FeatureTensor& target, const Mask3D& mask, int crop_margin) {
    const FeatureTensor& p = value(pred);
    if (!p.same_shape(target)) throw ValidationError("l2_loss: pred and target shapes differ");
    if (mask.meta.dims != p.dims) throw ValidationError("l2_loss: mask dims differ");
    if (crop_margin < 0) throw ValidationError("l2_loss: crop_margin must be >= 0");
    const int nx = p.dims[0], ny = p.dims[1], nz = p.dims[2];
    if (crop_margin >= (std::min({nx, ny, nz}) + 1) / 2)
        throw ValidationError("l2_loss: crop_margin must be < patch_size/2");

    auto op = std::make_unique<L2LossOp>();
    op->target = target;
    op->in_region.assign(p.voxels(), 0);
    std::size_t region = 0;
    for (int z = 0; z < nz; ++z)
        for (int y = 0; y < ny; ++y)
            for (int x = 0; x < nx; ++x) {
                const bool inner = x >= crop_margin && x < nx - crop_margin && y >= crop_margin &&
                                   y < ny - crop_margin && z >= crop_margin && z < nz - crop_margin;
                if (inner && mask.at(x, y, z)) {
                    op->in_region[p.index(0, x, y, z)] = 1;
                    ++region;
                }
            }
    if (region == 0)
        throw ValidationError("l2_loss: no valid voxels remain after mask and crop margin");
    op->denom = region * static_cast<std::size_t>(p.channels);

    double acc = 0.0;
    const std::size_t vox = p.voxels();
    for (int c = 0; c < p.channels; ++c) {
        const double* pp = p.channel(c);
        const double* tt = target.channel(c);
        for (std::size_t i = 0; i < vox; ++i)
            if (op->in_region[i]) {
                const double d = pp[i] - tt[i];
                acc += d * d;
            }
    }
    FeatureTensor y(1, {1, 1, 1});
    y.data[0] = acc / static_cast<double>(op->denom);
    return push(std::move(op), {pred}, std::move(y));
}

void Tape::backward(int node, double seed) {
    if (nodes_.empty()) throw StateError("tape: backward() before any forward pass was recorded");
    at(node); // bounds check
    grad_buffer(node).data.assign(at(node).value.data.size(), 0.0);
    grad_buffer(node).data[0] = seed;
    if (at(node).value.data.size() > 1) {
        // Non-scalar seeds are uniform; only scalar terminals are used in
        // practice but keep the general case sane.
        for (auto& g : grad_buffer(node).data) g = seed;
    }
    for (int i = node; i >= 0; --i) {
        Node& n = nodes_[i];
        if (!n.grad_live || !n.op) continue;
        n.op->backward(*this, n);
    }
}

} // namespace qsmpad
