#include "vggsvm/layers.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>

#include "vggsvm/error.hpp"

namespace vggsvm::nn {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;
using ConstVectorMap = Eigen::Map<const Eigen::VectorXd>;
using VectorMap = Eigen::Map<Eigen::VectorXd>;

using Index = Eigen::Index;

Index idx(std::size_t v) { return static_cast<Index>(v); }

void require_conv_shapes(const Tensor& input, const Tensor& weight, const Tensor& bias)
{
    if (input.rank() != 4) throw PreconditionError("conv input must be (n, c, h, w), got " + shape_to_string(input.shape()));
    if (weight.rank() != 4 || weight.dim(2) != 3 || weight.dim(3) != 3)
        throw PreconditionError("conv weight must be (out, in, 3, 3)");
    if (weight.dim(1) != input.dim(1))
        throw PreconditionError("conv expects " + std::to_string(weight.dim(1)) + " input channels, got " +
                                std::to_string(input.dim(1)));
    if (bias.size() != weight.dim(0)) throw PreconditionError("conv bias length mismatch");
}

// Unfolds one (c, h, w) image into a (c*9, h*w) matrix of zero-padded 3x3 patches.
void im2col(const double* image, std::size_t c, std::size_t h, std::size_t w, double* cols)
{
    const std::size_t hw = h * w;
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t ky = 0; ky < 3; ++ky)
            for (std::size_t kx = 0; kx < 3; ++kx)
            {
                double* dst = cols + ((ch * 3 + ky) * 3 + kx) * hw;
                const double* src = image + ch * hw;
                for (std::size_t y = 0; y < h; ++y)
                {
                    const auto sy = static_cast<std::ptrdiff_t>(y + ky) - 1;
                    double* row = dst + y * w;
                    if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h))
                    {
                        std::fill(row, row + w, 0.0);
                        continue;
                    }
                    const double* srow = src + static_cast<std::size_t>(sy) * w;
                    for (std::size_t x = 0; x < w; ++x)
                    {
                        const auto sx = static_cast<std::ptrdiff_t>(x + kx) - 1;
                        row[x] = (sx < 0 || sx >= static_cast<std::ptrdiff_t>(w)) ? 0.0
                                                                                 : srow[static_cast<std::size_t>(sx)];
                    }
                }
            }
}

// Adjoint of im2col: scatters patch gradients back into a (c, h, w) image.
void col2im(const double* cols, std::size_t c, std::size_t h, std::size_t w, double* image)
{
    const std::size_t hw = h * w;
    std::fill(image, image + c * hw, 0.0);
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t ky = 0; ky < 3; ++ky)
            for (std::size_t kx = 0; kx < 3; ++kx)
            {
                const double* src = cols + ((ch * 3 + ky) * 3 + kx) * hw;
                double* dst = image + ch * hw;
                for (std::size_t y = 0; y < h; ++y)
                {
                    const auto sy = static_cast<std::ptrdiff_t>(y + ky) - 1;
                    if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h)) continue;
                    double* drow = dst + static_cast<std::size_t>(sy) * w;
                    const double* row = src + y * w;
                    for (std::size_t x = 0; x < w; ++x)
                    {
                        const auto sx = static_cast<std::ptrdiff_t>(x + kx) - 1;
                        if (sx >= 0 && sx < static_cast<std::ptrdiff_t>(w)) drow[static_cast<std::size_t>(sx)] += row[x];
                    }
                }
            }
}

}  // namespace

Tensor conv3x3_forward(const Tensor& input, const Tensor& weight, const Tensor& bias)
{
    require_conv_shapes(input, weight, bias);
    const auto n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
    const auto out_c = weight.dim(0);
    const auto hw = h * w;
    const auto k = c * 9;

    Tensor output({n, out_c, h, w});
    std::vector<double> cols(k * hw);
    ConstMatrixMap wmat(weight.data().data(), idx(out_c), idx(k));
    ConstVectorMap b(bias.data().data(), idx(out_c));
    for (std::size_t s = 0; s < n; ++s)
    {
        im2col(input.data().data() + s * c * hw, c, h, w, cols.data());
        MatrixMap out(output.data().data() + s * out_c * hw, idx(out_c), idx(hw));
        out.noalias() = wmat * ConstMatrixMap(cols.data(), idx(k), idx(hw));
        out.colwise() += b;
    }
    return output;
}

void conv3x3_backward(const Tensor& input, const Tensor& weight, const Tensor& grad_output, Tensor* grad_input,
                      Tensor& grad_weight, Tensor& grad_bias)
{
    require_conv_shapes(input, weight, grad_bias);
    const auto n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
    const auto out_c = weight.dim(0);
    const auto hw = h * w;
    const auto k = c * 9;
    if (grad_output.shape() != Tensor::Shape{n, out_c, h, w})
        throw PreconditionError("conv grad_output shape mismatch");
    if (grad_weight.shape() != weight.shape()) throw PreconditionError("conv grad_weight shape mismatch");

    if (grad_input) *grad_input = Tensor(input.shape());
    std::vector<double> cols(k * hw);
    ConstMatrixMap wmat(weight.data().data(), idx(out_c), idx(k));
    MatrixMap gw(grad_weight.data().data(), idx(out_c), idx(k));
    VectorMap gb(grad_bias.data().data(), idx(out_c));
    for (std::size_t s = 0; s < n; ++s)
    {
        ConstMatrixMap gout(grad_output.data().data() + s * out_c * hw, idx(out_c), idx(hw));
        im2col(input.data().data() + s * c * hw, c, h, w, cols.data());
        gw.noalias() += gout * ConstMatrixMap(cols.data(), idx(k), idx(hw)).transpose();
        gb += gout.rowwise().sum();
        if (grad_input)
        {
            MatrixMap(cols.data(), idx(k), idx(hw)).noalias() = wmat.transpose() * gout;
            col2im(cols.data(), c, h, w, grad_input->data().data() + s * c * hw);
        }
    }
}

Tensor relu_forward(const Tensor& input)
{
    Tensor out = input;
    for (auto& v : out.data()) v = v > 0.0 ? v : 0.0;
    return out;
}

Tensor relu_backward(const Tensor& output, const Tensor& grad_output)
{
    if (output.shape() != grad_output.shape()) throw PreconditionError("relu grad shape mismatch");
    Tensor grad = grad_output;
    for (std::size_t i = 0; i < grad.size(); ++i)
        if (!(output[i] > 0.0)) grad[i] = 0.0;
    return grad;
}

PoolOutput maxpool2_forward(const Tensor& input)
{
    if (input.rank() != 4) throw PreconditionError("maxpool input must be (n, c, h, w)");
    const auto n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
    if (h % 2 != 0 || w % 2 != 0)
        throw PreconditionError("maxpool needs even spatial extents, got " + shape_to_string(input.shape()));
    const auto oh = h / 2, ow = w / 2;

    PoolOutput result{Tensor({n, c, oh, ow}), std::vector<std::uint32_t>(n * c * oh * ow)};
    std::size_t o = 0;
    for (std::size_t plane = 0; plane < n * c; ++plane)
    {
        const std::size_t base = plane * h * w;
        for (std::size_t y = 0; y < oh; ++y)
            for (std::size_t x = 0; x < ow; ++x, ++o)
            {
                std::size_t best = base + (2 * y) * w + 2 * x;
                for (std::size_t dy = 0; dy < 2; ++dy)
                    for (std::size_t dx = 0; dx < 2; ++dx)
                    {
                        const std::size_t at = base + (2 * y + dy) * w + 2 * x + dx;
                        if (input[at] > input[best]) best = at;
                    }
                result.output[o] = input[best];
                result.argmax[o] = static_cast<std::uint32_t>(best);
            }
    }
    return result;
}

Tensor maxpool2_backward(const Tensor::Shape& input_shape, std::span<const std::uint32_t> argmax,
                         const Tensor& grad_output)
{
    if (argmax.size() != grad_output.size()) throw PreconditionError("maxpool argmax/grad size mismatch");
    Tensor grad(input_shape);
    for (std::size_t o = 0; o < argmax.size(); ++o) grad[argmax[o]] += grad_output[o];
    return grad;
}

Tensor linear_forward(const Tensor& input, const Tensor& weight, const Tensor& bias)
{
    if (input.rank() != 2 || weight.rank() != 2) throw PreconditionError("linear layer expects 2-D input and weight");
    const auto n = input.dim(0), in = input.dim(1), out = weight.dim(0);
    if (weight.dim(1) != in)
        throw PreconditionError("linear layer expects " + std::to_string(weight.dim(1)) + " inputs, got " +
                                std::to_string(in));
    if (bias.size() != out) throw PreconditionError("linear bias length mismatch");

    Tensor output({n, out});
    ConstMatrixMap wmat(weight.data().data(), idx(out), idx(in));
    ConstVectorMap b(bias.data().data(), idx(out));
    for (std::size_t s = 0; s < n; ++s)
    {
        VectorMap y(output.data().data() + s * out, idx(out));
        y.noalias() = wmat * ConstVectorMap(input.data().data() + s * in, idx(in));
        y += b;
    }
    return output;
}

void linear_backward(const Tensor& input, const Tensor& weight, const Tensor& grad_output, Tensor* grad_input,
                     Tensor& grad_weight, Tensor& grad_bias)
{
    const auto n = input.dim(0), in = input.dim(1), out = weight.dim(0);
    if (grad_output.shape() != Tensor::Shape{n, out}) throw PreconditionError("linear grad_output shape mismatch");
    if (grad_weight.shape() != weight.shape()) throw PreconditionError("linear grad_weight shape mismatch");

    ConstMatrixMap x(input.data().data(), idx(n), idx(in));
    ConstMatrixMap gout(grad_output.data().data(), idx(n), idx(out));
    ConstMatrixMap wmat(weight.data().data(), idx(out), idx(in));
    MatrixMap(grad_weight.data().data(), idx(out), idx(in)).noalias() += gout.transpose() * x;
    VectorMap(grad_bias.data().data(), idx(out)) += gout.colwise().sum().transpose();
    if (grad_input)
    {
        *grad_input = Tensor({n, in});
        MatrixMap(grad_input->data().data(), idx(n), idx(in)).noalias() = gout * wmat;
    }
}

Tensor softmax(const Tensor& logits)
{
    if (logits.rank() != 2) throw PreconditionError("softmax expects (n, k) logits");
    Tensor probs = logits;
    for (std::size_t s = 0; s < logits.dim(0); ++s)
    {
        auto row = probs.row(s);
        const double mx = *std::max_element(row.begin(), row.end());
        double total = 0.0;
        for (auto& v : row) total += (v = std::exp(v - mx));
        for (auto& v : row) v /= total;
    }
    return probs;
}

LossOutput cross_entropy(const Tensor& logits, std::span<const int> labels)
{
    if (logits.rank() != 2 || logits.dim(0) != labels.size())
        throw PreconditionError("cross_entropy expects (n, k) logits with n labels");
    const auto n = logits.dim(0), k = logits.dim(1);
    LossOutput result{0.0, Tensor({n, k})};
    for (std::size_t s = 0; s < n; ++s)
    {
        const auto label = labels[s];
        if (label < 0 || static_cast<std::size_t>(label) >= k)
            throw PreconditionError("label " + std::to_string(label) + " outside [0, " + std::to_string(k) + ")");
        auto row = logits.row(s);
        const double mx = *std::max_element(row.begin(), row.end());
        double total = 0.0;
        for (double v : row) total += std::exp(v - mx);
        const double log_z = mx + std::log(total);
        result.loss += log_z - row[static_cast<std::size_t>(label)];

        auto grad = result.grad_logits.row(s);
        for (std::size_t j = 0; j < k; ++j)
            grad[j] = (std::exp(row[j] - log_z) - (static_cast<std::size_t>(label) == j ? 1.0 : 0.0)) /
                      static_cast<double>(n);
    }
    result.loss /= static_cast<double>(n);
    return result;
}

}  // namespace vggsvm::nn
